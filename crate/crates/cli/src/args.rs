use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lvx_core::training::Method;

use crate::config::SyntheticSpec;

#[derive(Debug, Parser)]
#[command(name = "lvx", version, about = "Latent vector expansion autoencoder experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full method grid for one of the result tables.
    Reproduce(ReproduceArgs),
    /// Fit one pipeline on every row of a dataset and save it.
    Train(TrainArgs),
    /// Append logit and probability columns to a CSV using a saved pipeline.
    Score(ScoreArgs),
    /// Export 2-D PCA projections of classifier inputs from a finished run.
    Pca(PcaArgs),
    /// Write a synthetic imbalanced dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    CreditCard,
    Generic,
}

/// Dataset and training options shared by `reproduce` and `train`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat key=value file; explicit flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV layout; detected from the header when omitted.
    #[arg(long, value_enum)]
    pub schema: Option<SchemaArg>,
    /// Generate data instead of reading a CSV, e.g. n=10000,anomaly=0.005,sep=2.5[,d=10][,seed=3]
    #[arg(long)]
    pub synthetic: Option<SyntheticSpec>,
    /// Number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Master seed [fallback: LVX_SEED, then 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs_ae: Option<usize>,
    #[arg(long)]
    pub epochs_clf: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Expansion widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub expansion: Vec<usize>,
    /// Worker threads for fold execution.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Deal anomalies evenly across folds.
    #[arg(long)]
    pub stratified: bool,
    /// Train autoencoders on normal training rows only.
    #[arg(long)]
    pub normal_only_ae: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    /// Table number, 1 to 4.
    #[arg(long)]
    pub table: Option<u8>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for reports and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// LinearRaw_E10, LinearRaw_E1024, BA_latent_clf, Ours_latent_clf (or ba, ours).
    #[arg(long, default_value = "ours")]
    pub method: Method,
    #[command(flatten)]
    pub run: RunArgs,
    /// Destination of the pipeline bundle.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Pipeline bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV to score. A Class/label column, if present, is carried through.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PcaArgs {
    /// Directory of a finished `reproduce` run.
    #[arg(long)]
    pub run: PathBuf,
    /// 1-based fold numbers, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub fold: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ours,ba")]
    pub method: Vec<Method>,
    /// Output directory [default: the run directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub synthetic: SyntheticSpec,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}
