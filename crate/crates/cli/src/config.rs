//! Run configuration: flag / config-file / environment layering and the
//! key=value format shared by config files and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lvx_core::data::{gen_synthetic, kfold_split, load_csv, stratified_kfold_split, Dataset, FoldPlan, Schema};
use lvx_core::eval::TABLE2_DIMS;
use lvx_core::training::TrainConfig;

use crate::args::{RunArgs, SchemaArg};

pub const SEED_ENV: &str = "LVX_SEED";
pub const DEFAULT_K: usize = 10;

/// `n=10000,anomaly=0.005,sep=2.5[,d=10][,seed=S]`
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub anomaly_rate: f64,
    pub separation: f64,
    pub dims: usize,
    /// Data seed; the run seed is used when absent.
    pub seed: Option<u64>,
}

impl SyntheticSpec {
    /// `(normal, anomalous)` row counts.
    pub fn counts(&self) -> Result<(usize, usize)> {
        let anomalies = (self.n as f64 * self.anomaly_rate).round() as usize;
        if anomalies == 0 || anomalies >= self.n {
            bail!(
                "synthetic spec n={} anomaly={} gives {anomalies} anomalies; need at least one of each class",
                self.n,
                self.anomaly_rate
            );
        }
        Ok((self.n - anomalies, anomalies))
    }

    pub fn generate(&self, run_seed: u64) -> Result<Dataset> {
        let (normal, anomalous) = self.counts()?;
        Ok(gen_synthetic(
            normal,
            anomalous,
            self.dims,
            self.separation,
            self.seed.unwrap_or(run_seed),
        )?)
    }
}

impl FromStr for SyntheticSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut n = None;
        let mut rate = None;
        let mut sep = None;
        let mut dims = 10;
        let mut seed = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value in synthetic spec, got '{part}'"))?;
            let bad = |e: &dyn fmt::Display| anyhow!("synthetic spec {k}={v}: {e}");
            match k.trim() {
                "n" => n = Some(v.parse().map_err(|e| bad(&e))?),
                "anomaly" => rate = Some(v.parse().map_err(|e| bad(&e))?),
                "sep" | "separation" => sep = Some(v.parse().map_err(|e| bad(&e))?),
                "d" | "dims" => dims = v.parse().map_err(|e| bad(&e))?,
                "seed" => seed = Some(v.parse().map_err(|e| bad(&e))?),
                other => bail!("unknown synthetic spec key '{other}' (expected n, anomaly, sep, d, seed)"),
            }
        }
        let spec = SyntheticSpec {
            n: n.ok_or_else(|| anyhow!("synthetic spec needs n=<rows>"))?,
            anomaly_rate: rate.ok_or_else(|| anyhow!("synthetic spec needs anomaly=<fraction>"))?,
            separation: sep.ok_or_else(|| anyhow!("synthetic spec needs sep=<distance>"))?,
            dims,
            seed,
        };
        if !(0.0..1.0).contains(&spec.anomaly_rate) {
            bail!("synthetic anomaly fraction must be in (0, 1), got {}", spec.anomaly_rate);
        }
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},anomaly={},sep={},d={}",
            self.n, self.anomaly_rate, self.separation, self.dims
        )?;
        if let Some(s) = self.seed {
            write!(f, ",seed={s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, schema: Option<Schema> },
    Synthetic(SyntheticSpec),
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub train: TrainConfig,
    pub expansion: Vec<usize>,
    pub jobs: usize,
}

/// Parsed key=value file. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "data",
    "schema",
    "synthetic",
    "k",
    "seed",
    "epochs_ae",
    "epochs_clf",
    "lr",
    "batch",
    "expansion",
    "jobs",
    "stratified",
    "normal_only_ae",
    "table",
    "out",
];

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key=value, got '{line}'", no + 1))?;
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{origin}:{}: unknown key '{}'", no + 1, k.trim());
            }
            entries.insert(key, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key}={v}: {e}")))
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(anyhow!("config key {key}={v}: expected true or false")),
            })
            .transpose()
    }
}

pub fn parse_schema(s: &str) -> Result<Schema> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "credit-card" | "creditcard" => Ok(Schema::CreditCard),
        "generic" => Ok(Schema::Generic),
        _ => bail!("unknown schema '{s}' (expected credit-card or generic)"),
    }
}

pub fn schema_name(schema: Schema) -> &'static str {
    match schema {
        Schema::CreditCard => "credit-card",
        Schema::Generic => "generic",
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|e| anyhow!("bad expansion width '{p}': {e}")))
        .collect()
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(
            v.trim().parse().map_err(|e| anyhow!("{SEED_ENV}={v} is not a valid seed: {e}"))?,
        )),
        Err(_) => Ok(None),
    }
}

/// Text shown whenever the dataset cannot be found.
pub fn schema_help() -> String {
    let header = Schema::credit_card_header().join(",");
    format!(
        "expected a CSV with the credit-card schema (header {header}; 30 numeric features, Class in {{0,1}}), \
         or with --schema generic a header of numeric feature columns plus a Class or label column. \
         Use --synthetic n=10000,anomaly=0.005,sep=2.5 to run without a dataset"
    )
}

impl RunConfig {
    /// Layers explicit flags over the config file, then `LVX_SEED` for the
    /// seed, then built-in defaults.
    pub fn resolve(args: &RunArgs, file: &KeyValues) -> Result<Self> {
        let defaults = TrainConfig::default();
        let seed = match args.seed {
            Some(s) => s,
            None => match file.get::<u64>("seed")? {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            },
        };
        let schema = match args.schema {
            Some(SchemaArg::CreditCard) => Some(Schema::CreditCard),
            Some(SchemaArg::Generic) => Some(Schema::Generic),
            None => file.raw("schema").map(parse_schema).transpose()?,
        };
        let source = if let Some(spec) = &args.synthetic {
            DataSource::Synthetic(spec.clone())
        } else if let Some(path) = &args.data {
            DataSource::Csv {
                path: path.clone(),
                schema,
            }
        } else if let Some(spec) = file.get::<SyntheticSpec>("synthetic")? {
            DataSource::Synthetic(spec)
        } else if let Some(path) = file.raw("data") {
            DataSource::Csv {
                path: PathBuf::from(path),
                schema,
            }
        } else {
            bail!("no dataset given: pass --data <csv> or --synthetic <spec>; {}", schema_help());
        };
        let expansion = if !args.expansion.is_empty() {
            args.expansion.clone()
        } else if let Some(v) = file.raw("expansion") {
            parse_list(v)?
        } else {
            TABLE2_DIMS.to_vec()
        };
        let cfg = RunConfig {
            source,
            k: args.k.or(file.get("k")?).unwrap_or(DEFAULT_K),
            seed,
            stratified: args.stratified || file.flag("stratified")?.unwrap_or(false),
            train: TrainConfig {
                ae_epochs: args.epochs_ae.or(file.get("epochs_ae")?).unwrap_or(defaults.ae_epochs),
                clf_epochs: args.epochs_clf.or(file.get("epochs_clf")?).unwrap_or(defaults.clf_epochs),
                lr: args.lr.or(file.get("lr")?).unwrap_or(defaults.lr),
                batch_size: args.batch.or(file.get("batch")?).unwrap_or(defaults.batch_size),
                seed,
                normal_only_ae: args.normal_only_ae || file.flag("normal_only_ae")?.unwrap_or(false),
                ..defaults
            },
            expansion,
            jobs: args.jobs.or(file.get("jobs")?).unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            bail!("--k must be at least 2, got {}", self.k);
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        if self.expansion.iter().any(|&e| e == 0) {
            bail!("expansion widths must be >= 1");
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.source {
            DataSource::Synthetic(spec) => spec.generate(self.seed),
            DataSource::Csv { path, schema } => {
                if !path.is_file() {
                    bail!("dataset file '{}' not found; {}", path.display(), schema_help());
                }
                let schema = match schema {
                    Some(s) => *s,
                    None => detect_schema(path)?,
                };
                load_csv(path, schema)
                    .with_context(|| format!("cannot load {} as {} CSV", path.display(), schema_name(schema)))
            }
        }
    }

    pub fn fold_plan(&self, data: &Dataset) -> Result<FoldPlan> {
        Ok(if self.stratified {
            stratified_kfold_split(data.labels(), self.k, self.seed)?
        } else {
            kfold_split(data.n_rows(), self.k, self.seed)?
        })
    }

    /// Settings as key=value lines; feeding them back through `--config`
    /// repeats the run.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        match &self.source {
            DataSource::Synthetic(spec) => out.push_str(&format!("synthetic={spec}\n")),
            DataSource::Csv { path, schema } => {
                let path = fs::canonicalize(path).unwrap_or_else(|_| path.clone());
                out.push_str(&format!("data={}\n", path.display()));
                if let Some(s) = schema {
                    out.push_str(&format!("schema={}\n", schema_name(*s)));
                }
            }
        }
        let t = &self.train;
        let expansion: Vec<String> = self.expansion.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "k={}\nseed={}\nstratified={}\nepochs_ae={}\nepochs_clf={}\nlr={}\nbatch={}\nnormal_only_ae={}\nexpansion={}\njobs={}\n",
            self.k,
            self.seed,
            self.stratified,
            t.ae_epochs,
            t.clf_epochs,
            t.lr,
            t.batch_size,
            t.normal_only_ae,
            expansion.join(","),
            self.jobs
        ));
        out
    }
}

/// Credit-card when the header matches it exactly, generic otherwise.
pub fn detect_schema(path: &Path) -> Result<Schema> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("cannot read the header of {}", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    Ok(if header == Schema::credit_card_header() {
        Schema::CreditCard
    } else {
        Schema::Generic
    })
}
