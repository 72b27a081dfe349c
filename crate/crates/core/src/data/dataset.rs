use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Feature matrix with binary labels (1 = anomaly).
///
/// `row_ids` carries each row's index in the originally loaded dataset, so a
/// subset always knows where its rows came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T = f64> {
    features: Matrix<T>,
    labels: Vec<u8>,
    column_names: Vec<String>,
    row_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub anomalies: usize,
}

impl DatasetSummary {
    pub fn anomaly_rate(&self) -> f64 {
        self.anomalies as f64 / self.rows.max(1) as f64
    }
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Matrix<T>, labels: Vec<u8>, column_names: Vec<String>) -> Result<Self> {
        let n = features.rows();
        Self::with_row_ids(features, labels, column_names, (0..n).collect())
    }

    pub fn with_row_ids(
        features: Matrix<T>,
        labels: Vec<u8>,
        column_names: Vec<String>,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dim("Dataset::new", format!("{} labels", features.rows()), labels.len()));
        }
        if row_ids.len() != features.rows() {
            return Err(Error::dim("Dataset::new", format!("{} row ids", features.rows()), row_ids.len()));
        }
        if column_names.len() != features.cols() {
            return Err(Error::dim(
                "Dataset::new",
                format!("{} column names", features.cols()),
                column_names.len(),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {bad} not in {{0, 1}}")));
        }
        features.ensure_finite("dataset features")?;
        Ok(Self {
            features,
            labels,
            column_names,
            row_ids,
        })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            rows: self.n_rows(),
            features: self.n_features(),
            anomalies: self.anomaly_count(),
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let a = self.anomaly_count();
        a > 0 && a < self.n_rows()
    }

    /// Rows at `indices` (positions in this dataset), keeping their original ids.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub fn normal_rows(&self) -> Self {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.labels[i] == 0).collect();
        self.subset(&idx)
    }

    /// Same rows and labels with replaced features.
    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        if features.rows() != self.n_rows() || features.cols() != self.n_features() {
            return Err(Error::dim(
                "Dataset::with_features",
                format!("{}x{}", self.n_rows(), self.n_features()),
                format!("{}x{}", features.rows(), features.cols()),
            ));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Writes the generic CSV schema: one column per feature, then `Class`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.column_names.clone();
        header.push("Class".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            record.clear();
            record.extend(self.features.row(r).iter().map(|v| v.to_f64_lossless().to_string()));
            record.push(self.labels[r].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }
}

/// Expected CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// `Time, V1..V28, Amount, Class`: 30 features plus the label.
    CreditCard,
    /// Any numeric header; the label is the column named `Class` (or `label`,
    /// case-insensitive), otherwise the last column.
    Generic,
}

impl Schema {
    pub fn credit_card_header() -> Vec<String> {
        let mut cols = vec!["Time".to_string()];
        cols.extend((1..=28).map(|i| format!("V{i}")));
        cols.push("Amount".into());
        cols.push("Class".into());
        cols
    }
}

/// Index of the label column in a header, per the generic-schema rule.
pub fn label_column(header: &[String]) -> Option<usize> {
    header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("class") || h.eq_ignore_ascii_case("label"))
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: Schema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Validation("empty CSV: no header row".into()));
    }

    let label_idx = match schema {
        Schema::CreditCard => {
            let expected = Schema::credit_card_header();
            for (i, want) in expected.iter().enumerate() {
                match header.get(i) {
                    Some(got) if got == want => {}
                    Some(got) => {
                        return Err(Error::Schema(format!(
                            "column {} should be '{want}', found '{got}'",
                            i + 1
                        )))
                    }
                    None => return Err(Error::Schema(format!("missing column '{want}'"))),
                }
            }
            if header.len() > expected.len() {
                return Err(Error::Schema(format!(
                    "unexpected extra column '{}'",
                    header[expected.len()]
                )));
            }
            expected.len() - 1
        }
        Schema::Generic => {
            if header.len() < 2 {
                return Err(Error::Schema("need at least one feature column and a label column".into()));
            }
            label_column(&header).unwrap_or(header.len() - 1)
        }
    };

    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                column: "*".into(),
                message: format!("{} fields, header has {}", rec.len(), header.len()),
            });
        }
        for (i, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: header[i].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: header[i].clone(),
                    message: format!("'{cell}' is not finite"),
                });
            }
            if i == label_idx {
                let y = match v {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => {
                        return Err(Error::Validation(format!(
                            "row {line}: label '{cell}' in column '{}' is not 0 or 1",
                            header[i]
                        )))
                    }
                };
                labels.push(y);
            } else {
                data.push(T::lit(v));
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Validation("CSV has a header but no data rows".into()));
    }
    let n = labels.len();
    Dataset::new(Matrix::from_vec(n, d, data)?, labels, feature_names)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset<T>> {
    read_csv(File::open(path)?, schema)
}
