//! Dataset ingestion, scaling, fold plans and synthetic data.

mod dataset;
mod kfold;
mod scaler;
mod synthetic;

pub use dataset::{label_column, load_csv, read_csv, Dataset, DatasetSummary, Schema};
pub use kfold::{kfold_split, stratified_kfold_split, FoldPlan};
pub use scaler::Scaler;
pub use synthetic::gen_synthetic;
