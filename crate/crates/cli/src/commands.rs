use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use lvx_core::data::Dataset;
use lvx_core::eval::{assemble_report, pca_fit, ExperimentReport, ReportLayout};
use lvx_core::nn::Matrix;
use lvx_core::training::{
    fit_pipeline, run_grid, test_representation, FitAudit, FoldResult, NoAudit, Pipeline,
};

use crate::args::{Cli, Command, GenDataArgs, PcaArgs, ReproduceArgs, ScoreArgs, TrainArgs};
use crate::config::{env_seed, KeyValues, RunConfig};

pub const MANIFEST: &str = "manifest.txt";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reproduce(a) => cmd_reproduce(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Pca(a) => cmd_pca(&a).map(|_| ()),
        Command::GenData(a) => cmd_gen_data(&a),
    }
}

fn config_file(path: Option<&Path>) -> Result<KeyValues> {
    path.map(KeyValues::load).transpose().map(Option::unwrap_or_default)
}

/// Output of [`reproduce`].
#[derive(Debug)]
pub struct Reproduction {
    pub report: ExperimentReport,
    pub results: Vec<FoldResult>,
    pub text_path: PathBuf,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<Reproduction> {
    let file = config_file(args.run.config.as_deref())?;
    let table = match args.table {
        Some(t) => t,
        None => file
            .get::<u8>("table")?
            .ok_or_else(|| anyhow!("which table? pass --table 1, 2, 3 or 4"))?,
    };
    let cfg = RunConfig::resolve(&args.run, &file)?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => file
            .raw("out")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(format!("lvx-table{table}"))),
    };
    let outcome = reproduce(table, &cfg, &out, &NoAudit)?;
    print!("{}", outcome.report.to_text());
    info!(
        "wrote {}, {} and {}",
        outcome.text_path.display(),
        outcome.csv_path.display(),
        outcome.manifest_path.display()
    );
    Ok(outcome)
}

/// Runs the grid for `table`, writes `table{N}.txt`, `table{N}.csv` and the
/// manifest into `out`. Every fit call is reported to `audit`.
pub fn reproduce(table: u8, cfg: &RunConfig, out: &Path, audit: &dyn FitAudit) -> Result<Reproduction> {
    let started = Instant::now();
    let layout = ReportLayout::from_number(table, cfg.k, &cfg.expansion)?;
    let data = cfg.load_dataset()?;
    let summary = data.summary();
    info!(
        "dataset: {} rows, {} features, {} anomalies",
        summary.rows, summary.features, summary.anomalies
    );
    let plan = cfg.fold_plan(&data)?;
    let tasks = layout.tasks();
    info!("running {} fold tasks on {} worker(s)", tasks.len(), cfg.jobs);
    let results = run_grid(&tasks, &data, &plan, &cfg.train, cfg.jobs, audit)?;
    let report = assemble_report(&results, &layout, cfg.seed)?;
    for cell in report.undefined_cells() {
        warn!(
            "AUROC undefined for {} on fold {}: the test fold holds a single class",
            cell.method.label(),
            cell.fold + 1
        );
    }

    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let text_path = out.join(format!("table{table}.txt"));
    let csv_path = out.join(format!("table{table}.csv"));
    let manifest_path = out.join(MANIFEST);
    fs::write(&text_path, report.to_text())?;
    fs::write(&csv_path, report.to_csv())?;

    let mut manifest = String::from("# lvx reproduce manifest; pass this file to --config to repeat the run\n");
    writeln!(manifest, "# git_describe: {}", git_describe())?;
    writeln!(manifest, "# wall_seconds: {:.3}", started.elapsed().as_secs_f64())?;
    writeln!(
        manifest,
        "# dataset: {} rows, {} features, {} anomalies",
        summary.rows, summary.features, summary.anomalies
    )?;
    if matches!(layout, ReportLayout::Table1 | ReportLayout::Table2 { .. }) {
        writeln!(manifest, "# arrangement: fold 1 of the {}-fold plan", cfg.k)?;
    }
    writeln!(manifest, "table={table}")?;
    manifest.push_str(&cfg.to_key_values());
    fs::write(&manifest_path, manifest)?;

    Ok(Reproduction {
        report,
        results,
        text_path,
        csv_path,
        manifest_path,
    })
}

fn git_describe() -> String {
    Process::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = config_file(args.run.config.as_deref())?;
    let cfg = RunConfig::resolve(&args.run, &file)?;
    let method = match args.run.expansion.as_slice() {
        [] => args.method,
        [e] => args.method.with_expansion(*e),
        _ => bail!("train takes a single --expansion width"),
    };
    let data = cfg.load_dataset()?;
    let fitted = fit_pipeline(method, &data, &cfg.train, &NoAudit, None)?;
    fitted
        .pipeline
        .save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let last = fitted.clf_trace.epoch_loss.last().copied();
    info!(
        "trained {} on {} rows (final classifier loss {}), saved to {}",
        method.name(),
        data.n_rows(),
        last.map_or("n/a".into(), |l| format!("{l:.6}")),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let pipeline = Pipeline::<f64>::load(&args.model)
        .with_context(|| format!("cannot load pipeline bundle {}", args.model.display()))?;
    let mut reader =
        csv::Reader::from_path(&args.data).with_context(|| format!("cannot open {}", args.data.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    // a named label column is carried through but never scored
    let label = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("class") || h.eq_ignore_ascii_case("label"));
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label).collect();
    let d = pipeline.n_features();
    if feature_cols.len() != d {
        bail!(
            "dimension mismatch: the model expects D = {d} feature columns, {} has {}",
            args.data.display(),
            feature_cols.len()
        );
    }
    let mut records = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV record {}", args.data.display(), i + 1))?;
        for &c in &feature_cols {
            let cell = rec.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| {
                anyhow!(
                    "{}: row {}, column '{}': cannot parse '{cell}' as a number",
                    args.data.display(),
                    i + 1,
                    header[c]
                )
            })?;
            values.push(v);
        }
        records.push(rec);
    }
    let x = Matrix::from_vec(records.len(), d, values)?;
    let scores = pipeline.score(&x)?;
    let prob = scores.probability();

    let mut writer =
        csv::Writer::from_path(&args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut out_header = header.clone();
    out_header.extend(["logit".to_string(), "probability".to_string()]);
    writer.write_record(&out_header)?;
    for (i, rec) in records.iter().enumerate() {
        let mut row: Vec<String> = rec.iter().map(str::to_string).collect();
        row.push(format!("{}", scores.logit[i]));
        row.push(format!("{}", prob[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    info!("scored {} rows into {}", records.len(), args.out.display());
    Ok(())
}

/// Projects the test rows of each selected fold, as seen by each method's
/// classifier, onto their top two principal axes. Returns the written paths.
pub fn cmd_pca(args: &PcaArgs) -> Result<Vec<PathBuf>> {
    let manifest = args.run.join(MANIFEST);
    if !manifest.is_file() {
        bail!(
            "{} has no {MANIFEST}; point --run at the output directory of a reproduce run",
            args.run.display()
        );
    }
    let file = KeyValues::load(&manifest)?;
    let cfg = RunConfig::resolve(&Default::default(), &file)?;
    for &f in &args.fold {
        if f == 0 || f > cfg.k {
            bail!("unknown fold {f}: folds are numbered 1 to {}", cfg.k);
        }
    }
    let data = cfg.load_dataset()?;
    let plan = cfg.fold_plan(&data)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    for &method in &args.method {
        for &fold in &args.fold {
            let path = out_dir.join(format!("pca_{}_fold{fold}.csv", method.name()));
            let (repr, labels) = test_representation(method, fold - 1, &data, &plan, &cfg.train)?;
            write_projection(&path, &repr, &labels)?;
            info!("wrote {}", path.display());
            written.push(path);
        }
    }
    Ok(written)
}

fn write_projection(path: &Path, repr: &Matrix<f64>, labels: &[u8]) -> Result<()> {
    let pca = pca_fit(repr)?;
    let proj = pca.project(repr)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pc1", "pc2", "label"])?;
    for (r, &label) in labels.iter().enumerate() {
        w.write_record([
            format!("{}", proj.get(r, 0)),
            format!("{}", proj.get(r, 1)),
            label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let data: Dataset = args.synthetic.generate(seed)?;
    data.save_csv(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let s = data.summary();
    info!(
        "wrote {} rows ({} anomalies, {} features) to {}",
        s.rows,
        s.anomalies,
        s.features,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use clap::Parser;
    use lvx_core::data::{load_csv, Schema};

    use super::*;

    fn lvx(args: &[&str]) -> Result<()> {
        run(Cli::try_parse_from(std::iter::once("lvx").chain(args.iter().copied()))?)
    }

    fn p(path: &Path) -> &str {
        path.to_str().unwrap()
    }

    fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
            .collect();
        (header, rows)
    }

    #[test]
    fn train_then_score_matches_in_process() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("data.csv");
        let model = dir.path().join("m.lvxp");
        let scored = dir.path().join("scored.csv");
        lvx(&["gen-data", "--synthetic", "n=300,anomaly=0.05,sep=3,d=5", "--seed", "4", "--out", p(&csv)]).unwrap();
        lvx(&[
            "train", "--method", "ba", "--data", p(&csv), "--epochs-ae", "3", "--epochs-clf", "2", "--seed", "4",
            "--out", p(&model),
        ])
        .unwrap();
        lvx(&["score", "--model", p(&model), "--data", p(&csv), "--out", p(&scored)]).unwrap();

        let data: Dataset = load_csv(&csv, Schema::Generic).unwrap();
        let pipeline = Pipeline::<f64>::load(&model).unwrap();
        let expected = pipeline.score(data.features()).unwrap();
        let (header, rows) = read_rows(&scored);
        assert_eq!(header.last().unwrap(), "probability");
        assert_eq!(header[header.len() - 2], "logit");
        assert_eq!(header[..header.len() - 2], ["x1", "x2", "x3", "x4", "x5", "Class"]);
        assert_eq!(rows.len(), 300);
        for (row, (&logit, &prob)) in rows.iter().zip(expected.logit.iter().zip(&expected.probability())) {
            assert_eq!(row[6].parse::<f64>().unwrap().to_bits(), logit.to_bits());
            assert_eq!(row[7].parse::<f64>().unwrap().to_bits(), prob.to_bits());
        }
    }

    #[test]
    fn score_checks_width_and_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("data.csv");
        let narrow = dir.path().join("narrow.csv");
        let model = dir.path().join("m.lvxp");
        let out = dir.path().join("o.csv");
        lvx(&["gen-data", "--synthetic", "n=100,anomaly=0.1,sep=3,d=3", "--out", p(&csv)]).unwrap();
        lvx(&["gen-data", "--synthetic", "n=100,anomaly=0.1,sep=3,d=2", "--out", p(&narrow)]).unwrap();
        lvx(&["train", "--method", "LinearRaw_E10", "--data", p(&csv), "--epochs-clf", "1", "--out", p(&model)]).unwrap();

        let err = lvx(&["score", "--model", p(&model), "--data", p(&narrow), "--out", p(&out)]).unwrap_err();
        assert!(format!("{err:#}").contains("D = 3"), "{err:#}");

        let bytes = fs::read(&model).unwrap();
        fs::write(&model, &bytes[..bytes.len() - 1]).unwrap();
        let err = lvx(&["score", "--model", p(&model), "--data", p(&csv), "--out", p(&out)]).unwrap_err();
        assert!(format!("{err:#}").contains("truncated"), "{err:#}");
        assert!(!out.exists());
    }

    #[test]
    fn reproduce_table2_writes_reports_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        lvx(&[
            "reproduce", "--table", "2", "--synthetic", "n=400,anomaly=0.05,sep=3,d=4", "--k", "3", "--epochs-ae", "2",
            "--epochs-clf", "1", "--out", p(&out),
        ])
        .unwrap();
        let csv = fs::read_to_string(out.join("table2.csv")).unwrap();
        let dims: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
        assert_eq!(dims, ["128", "256", "512", "1024", "mean", "std"]);
        let manifest = fs::read_to_string(out.join(MANIFEST)).unwrap();
        assert!(manifest.contains("table=2\n") && manifest.contains("# arrangement: fold 1"));
        assert!(fs::read_to_string(out.join("table2.txt")).unwrap().contains("1024"));

        // the manifest alone repeats the run
        let again = dir.path().join("again");
        lvx(&["reproduce", "--config", p(&out.join(MANIFEST)), "--out", p(&again)]).unwrap();
        assert_eq!(fs::read(again.join("table2.csv")).unwrap(), csv.as_bytes());
    }

    #[test]
    fn reproduce_without_dataset_names_schema() {
        let err = lvx(&["reproduce", "--table", "1", "--data", "/nonexistent/creditcard.csv"]).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("Time,V1,V2") && msg.contains("V28,Amount,Class"), "{msg}");
        let err = lvx(&["reproduce", "--table", "1"]).unwrap_err();
        assert!(format!("{err:#}").contains("--synthetic"));
    }

    #[test]
    fn single_class_folds_are_reported_undefined() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::resolve(
            &crate::args::RunArgs {
                synthetic: Some("n=60,anomaly=0.05,sep=3,d=3".parse().unwrap()),
                k: Some(10),
                epochs_ae: Some(1),
                epochs_clf: Some(1),
                ..Default::default()
            },
            &KeyValues::default(),
        )
        .unwrap();
        let run = reproduce(3, &cfg, dir.path(), &NoAudit).unwrap();
        assert!(!run.report.undefined_cells().is_empty());
        assert!(fs::read_to_string(&run.csv_path).unwrap().contains("undefined"));
    }

    #[test]
    fn pca_projects_each_test_fold() {
        let dir = tempfile::tempdir().unwrap();
        let run_dir = dir.path().join("run");
        lvx(&[
            "reproduce", "--table", "4", "--synthetic", "n=600,anomaly=0.1,sep=6,d=6", "--k", "3", "--epochs-ae", "20",
            "--epochs-clf", "1", "--out", p(&run_dir),
        ])
        .unwrap();
        let written = cmd_pca(&PcaArgs {
            run: run_dir.clone(),
            fold: vec![1, 3],
            method: vec!["ours".parse().unwrap(), "ba".parse().unwrap()],
            out: None,
        })
        .unwrap();
        assert_eq!(written.len(), 4);

        let data = RunConfig::resolve(&Default::default(), &KeyValues::load(&run_dir.join(MANIFEST)).unwrap())
            .unwrap();
        let plan = data.fold_plan(&data.load_dataset().unwrap()).unwrap();
        for path in &written {
            let (header, rows) = read_rows(path);
            assert_eq!(header, ["pc1", "pc2", "label"]);
            let fold = if path.to_str().unwrap().ends_with("fold1.csv") { 0 } else { 2 };
            assert_eq!(rows.len(), plan.fold_sizes()[fold]);
            assert!(rows.iter().all(|r| r[2] == "0" || r[2] == "1"));

            if !path.to_str().unwrap().contains("Ours") {
                continue;
            }
            // six-sigma gap: class centroids stand well apart in PC space
            let pts: Vec<(f64, f64, bool)> = rows
                .iter()
                .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2] == "1"))
                .collect();
            let centroid = |cls: bool| {
                let v: Vec<_> = pts.iter().filter(|p| p.2 == cls).collect();
                let n = v.len() as f64;
                let (cx, cy) = (v.iter().map(|p| p.0).sum::<f64>() / n, v.iter().map(|p| p.1).sum::<f64>() / n);
                let var = v.iter().map(|p| (p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sum::<f64>() / (n - 1.0);
                (cx, cy, var.sqrt())
            };
            let (ax, ay, _) = centroid(true);
            let (nx, ny, nstd) = centroid(false);
            let gap = ((ax - nx).powi(2) + (ay - ny).powi(2)).sqrt();
            assert!(gap > 2.0 * nstd, "{}: gap {gap} vs normal spread {nstd}", path.display());
        }

        for bad in [0, 4] {
            let err = cmd_pca(&PcaArgs {
                run: run_dir.clone(),
                fold: vec![bad],
                method: vec!["ours".parse().unwrap()],
                out: None,
            })
            .unwrap_err();
            assert!(err.to_string().contains("unknown fold"), "{err}");
        }
    }
}
