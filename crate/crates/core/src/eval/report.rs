//! AUROC tables in the shape of the four experiment layouts.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::training::{FoldResult, Method};

pub const TABLE2_DIMS: [usize; 4] = [128, 256, 512, 1024];

/// Which experiment grid a report covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportLayout {
    /// Basic vs width-preserving autoencoder latents, fold 1 only.
    Table1,
    /// Expansion-width sweep of the width-preserving pipeline, fold 1 only.
    Table2 { dims: Vec<usize> },
    /// Raw features, expansion width 10 vs 1024, every fold.
    Table3 { folds: usize },
    /// Basic vs width-preserving latents with expansion, every fold.
    Table4 { folds: usize },
}

impl ReportLayout {
    pub fn from_number(table: u8, folds: usize, dims: &[usize]) -> Result<Self> {
        match table {
            1 => Ok(ReportLayout::Table1),
            2 if dims.is_empty() => Err(Error::Validation("table 2 needs a non-empty expansion sweep".into())),
            2 => Ok(ReportLayout::Table2 { dims: dims.to_vec() }),
            3 => Ok(ReportLayout::Table3 { folds }),
            4 => Ok(ReportLayout::Table4 { folds }),
            n => Err(Error::Validation(format!("unknown table {n}, expected 1-4"))),
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            ReportLayout::Table1 => 1,
            ReportLayout::Table2 { .. } => 2,
            ReportLayout::Table3 { .. } => 3,
            ReportLayout::Table4 { .. } => 4,
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            ReportLayout::Table1 => "Autoencoder comparison with AUROC",
            ReportLayout::Table2 { .. } => "Expansion dimension comparison with AUROC",
            ReportLayout::Table3 { .. } => "Linear model without vs with expansion",
            ReportLayout::Table4 { .. } => "BA model and our model performance comparison",
        }
    }

    /// Methods compared, in column order.
    pub fn methods(&self) -> Vec<Method> {
        match self {
            ReportLayout::Table1 | ReportLayout::Table4 { .. } => vec![Method::BA_LATENT_CLF, Method::OURS_LATENT_CLF],
            ReportLayout::Table2 { dims } => dims.iter().map(|&e| Method::OURS_LATENT_CLF.with_expansion(e)).collect(),
            ReportLayout::Table3 { .. } => vec![Method::LINEAR_RAW_E10, Method::LINEAR_RAW_E1024],
        }
    }

    /// `(method, fold)` grid the layout needs, folds zero-based.
    pub fn tasks(&self) -> Vec<(Method, usize)> {
        match self {
            ReportLayout::Table1 | ReportLayout::Table2 { .. } => self.methods().into_iter().map(|m| (m, 0)).collect(),
            ReportLayout::Table3 { folds } | ReportLayout::Table4 { folds } => (0..*folds)
                .flat_map(|f| self.methods().into_iter().map(move |m| (m, f)))
                .collect(),
        }
    }
}

/// One AUROC cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub method: Method,
    pub fold: usize,
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub layout: ReportLayout,
    pub seed: u64,
    pub cells: Vec<ReportCell>,
}

fn fmt_auroc(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |a| format!("{a:.6}"))
}

/// Mean and sample standard deviation of the defined values.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

pub fn assemble_report(results: &[FoldResult], layout: &ReportLayout, seed: u64) -> Result<ExperimentReport> {
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for (method, fold) in layout.tasks() {
        match results.iter().find(|r| r.method == method && r.fold == fold) {
            Some(r) => cells.push(ReportCell {
                method,
                fold,
                auroc: r.auroc,
            }),
            None => missing.push(format!("fold {} / {}", fold + 1, method.label())),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCell(missing.join(", ")));
    }
    Ok(ExperimentReport {
        layout: layout.clone(),
        seed,
        cells,
    })
}

impl ExperimentReport {
    pub fn value(&self, method: Method, fold: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.fold == fold)
            .and_then(|c| c.auroc)
    }

    pub fn values(&self, method: Method) -> Vec<Option<f64>> {
        self.cells.iter().filter(|c| c.method == method).map(|c| c.auroc).collect()
    }

    /// Unweighted mean over defined cells.
    pub fn mean(&self, method: Method) -> Option<f64> {
        mean_std(&self.values(method).into_iter().flatten().collect::<Vec<_>>()).0
    }

    pub fn std(&self, method: Method) -> Option<f64> {
        mean_std(&self.values(method).into_iter().flatten().collect::<Vec<_>>()).1
    }

    pub fn undefined_cells(&self) -> Vec<&ReportCell> {
        self.cells.iter().filter(|c| c.auroc.is_none()).collect()
    }

    fn per_fold(&self) -> bool {
        matches!(self.layout, ReportLayout::Table3 { .. } | ReportLayout::Table4 { .. })
    }

    /// `table,method,fold_or_dim,auroc,seed`. Summary rows use `mean` / `std`
    /// in the `fold_or_dim` column.
    pub fn to_csv(&self) -> String {
        let t = self.layout.number();
        let mut out = String::from("table,method,fold_or_dim,auroc,seed\n");
        for c in &self.cells {
            let key = match self.layout {
                ReportLayout::Table2 { .. } => c.method.expansion_dim.to_string(),
                _ => (c.fold + 1).to_string(),
            };
            let _ = writeln!(out, "{t},{},{key},{},{}", c.method.name(), fmt_auroc(c.auroc), self.seed);
        }
        if self.per_fold() {
            for m in self.layout.methods() {
                let _ = writeln!(out, "{t},{},mean,{},{}", m.name(), fmt_auroc(self.mean(m)), self.seed);
                let _ = writeln!(out, "{t},{},std,{},{}", m.name(), fmt_auroc(self.std(m)), self.seed);
            }
        }
        if let ReportLayout::Table2 { .. } = self.layout {
            let all: Vec<f64> = self.cells.iter().filter_map(|c| c.auroc).collect();
            let (mean, std) = mean_std(&all);
            let _ = writeln!(out, "{t},Ours_latent_clf_sweep,mean,{},{}", fmt_auroc(mean), self.seed);
            let _ = writeln!(out, "{t},Ours_latent_clf_sweep,std,{},{}", fmt_auroc(std), self.seed);
        }
        out
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let header: Vec<String>;
        match &self.layout {
            ReportLayout::Table1 => {
                header = vec!["Method".into(), "AUROC".into()];
                for c in &self.cells {
                    let name = match c.method.representation {
                        crate::training::Representation::BasicLatent => "Linear model w/ BA",
                        _ => "Linear model w/ Ours",
                    };
                    rows.push(vec![name.into(), fmt_auroc(c.auroc)]);
                }
            }
            ReportLayout::Table2 { .. } => {
                header = vec!["Method".into(), "Expansion dimension".into(), "AUROC".into()];
                for c in &self.cells {
                    rows.push(vec![
                        "Ours w/ expansion".into(),
                        c.method.expansion_dim.to_string(),
                        fmt_auroc(c.auroc),
                    ]);
                }
                let all: Vec<f64> = self.cells.iter().filter_map(|c| c.auroc).collect();
                let (mean, std) = mean_std(&all);
                rows.push(vec!["(added) mean".into(), String::new(), fmt_auroc(mean)]);
                rows.push(vec!["(added) std".into(), String::new(), fmt_auroc(std)]);
            }
            ReportLayout::Table3 { folds } | ReportLayout::Table4 { folds } => {
                let methods = self.layout.methods();
                header = std::iter::once("Fold".to_string())
                    .chain(methods.iter().map(|m| format!("{} AUROC", m.label())))
                    .collect();
                for f in 0..*folds {
                    let mut row = vec![(f + 1).to_string()];
                    row.extend(methods.iter().map(|&m| fmt_auroc(self.value(m, f))));
                    rows.push(row);
                }
                let mut mean = vec!["(added) mean".to_string()];
                mean.extend(methods.iter().map(|&m| fmt_auroc(self.mean(m))));
                let mut std = vec!["(added) std".to_string()];
                std.extend(methods.iter().map(|&m| fmt_auroc(self.std(m))));
                rows.push(mean);
                rows.push(std);
            }
        }

        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| -> String {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
        let mut out = format!("Table {}: {} (seed {})\n", self.layout.number(), self.layout.title(), self.seed);
        out.push_str(&line(&header));
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        if !self.undefined_cells().is_empty() {
            out.push_str("note: 'undefined' cells had a single class in the test fold\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainTrace;

    fn result(method: Method, fold: usize, auroc: Option<f64>) -> FoldResult {
        FoldResult {
            method,
            fold,
            auroc,
            n_test: 10,
            n_test_anomalies: 1,
            ae_trace: None,
            clf_trace: TrainTrace {
                epoch_loss: vec![],
                epoch_seconds: vec![],
                checksum: String::new(),
            },
        }
    }

    #[test]
    fn table2_expects_four_dims() {
        let layout = ReportLayout::from_number(2, 10, &TABLE2_DIMS).unwrap();
        let dims: Vec<usize> = layout.tasks().iter().map(|(m, _)| m.expansion_dim).collect();
        assert_eq!(dims, vec![128, 256, 512, 1024]);
        assert!(ReportLayout::from_number(2, 10, &[]).is_err());
    }

    #[test]
    fn table4_grid() {
        let tasks = ReportLayout::Table4 { folds: 10 }.tasks();
        assert_eq!(tasks.len(), 20);
        assert!(tasks.contains(&(Method::BA_LATENT_CLF, 9)));
        assert!(tasks.contains(&(Method::OURS_LATENT_CLF, 0)));
    }

    #[test]
    fn single_fold_into_table4_names_missing_cells() {
        let results = vec![
            result(Method::BA_LATENT_CLF, 0, Some(0.9)),
            result(Method::OURS_LATENT_CLF, 0, Some(0.95)),
        ];
        match assemble_report(&results, &ReportLayout::Table4 { folds: 10 }, 0).unwrap_err() {
            Error::MissingCell(msg) => {
                for f in 2..=10 {
                    assert!(msg.contains(&format!("fold {f} /")), "{msg}");
                }
                assert!(!msg.contains("fold 1 /"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn csv_and_summary_rows() {
        let layout = ReportLayout::Table3 { folds: 2 };
        let results = vec![
            result(Method::LINEAR_RAW_E10, 0, Some(0.9)),
            result(Method::LINEAR_RAW_E1024, 0, Some(0.8)),
            result(Method::LINEAR_RAW_E10, 1, Some(0.7)),
            result(Method::LINEAR_RAW_E1024, 1, None),
        ];
        let report = assemble_report(&results, &layout, 7).unwrap();
        assert!((report.mean(Method::LINEAR_RAW_E10).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(report.mean(Method::LINEAR_RAW_E1024), Some(0.8));
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "table,method,fold_or_dim,auroc,seed");
        assert_eq!(lines[1], "3,LinearRaw_E10,1,0.900000,7");
        assert!(lines.contains(&"3,LinearRaw_E1024,2,undefined,7"));
        assert!(lines.contains(&"3,LinearRaw_E10,mean,0.800000,7"));
        let text = report.to_text();
        assert!(text.contains("Linear model w/o expansion AUROC"));
        assert!(text.contains("undefined"));
    }
}
