//! Metrics and diagnostics.

mod auroc;
mod pca;
mod report;

pub use auroc::{auroc, RocInput};
pub use pca::{jacobi_eigen, pca_fit, pca_project, PcaModel};
pub use report::{assemble_report, ExperimentReport, ReportCell, ReportLayout, TABLE2_DIMS};
