//! Per-fold experiment pipelines.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::eval::auroc;
use crate::models::{ModelKind, DEFAULT_EXPANSION_DIM};
use crate::nn::Matrix;
use crate::scalar::Scalar;
use crate::training::pipeline::{fit_pipeline, fit_representation};
use crate::training::{TrainConfig, TrainTrace};

/// What the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Representation {
    /// Scaled features, no autoencoder.
    Raw,
    /// Bottleneck of the basic autoencoder.
    BasicLatent,
    /// Re-expanded latent of the width-preserving autoencoder.
    OursLatent,
}

impl Representation {
    pub fn code(self) -> u8 {
        match self {
            Representation::Raw => 0,
            Representation::BasicLatent => 1,
            Representation::OursLatent => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Representation::Raw),
            1 => Some(Representation::BasicLatent),
            2 => Some(Representation::OursLatent),
            _ => None,
        }
    }

    pub fn autoencoder_kind(self) -> Option<ModelKind> {
        match self {
            Representation::Raw => None,
            Representation::BasicLatent => Some(ModelKind::BasicAe),
            Representation::OursLatent => Some(ModelKind::OursAe),
        }
    }
}

/// Representation plus the classifier's expansion width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Method {
    pub representation: Representation,
    pub expansion_dim: usize,
}

impl Method {
    pub const LINEAR_RAW_E10: Method = Method {
        representation: Representation::Raw,
        expansion_dim: 10,
    };
    pub const LINEAR_RAW_E1024: Method = Method {
        representation: Representation::Raw,
        expansion_dim: DEFAULT_EXPANSION_DIM,
    };
    pub const BA_LATENT_CLF: Method = Method {
        representation: Representation::BasicLatent,
        expansion_dim: DEFAULT_EXPANSION_DIM,
    };
    pub const OURS_LATENT_CLF: Method = Method {
        representation: Representation::OursLatent,
        expansion_dim: DEFAULT_EXPANSION_DIM,
    };

    pub fn with_expansion(self, expansion_dim: usize) -> Self {
        Self { expansion_dim, ..self }
    }

    /// Stable identifier: `LinearRaw_E10`, `BA_latent_clf`, `Ours_latent_clf_E128`, ...
    pub fn name(&self) -> String {
        match self.representation {
            Representation::Raw => format!("LinearRaw_E{}", self.expansion_dim),
            Representation::BasicLatent | Representation::OursLatent => {
                let base = if self.representation == Representation::BasicLatent {
                    "BA_latent_clf"
                } else {
                    "Ours_latent_clf"
                };
                if self.expansion_dim == DEFAULT_EXPANSION_DIM {
                    base.to_string()
                } else {
                    format!("{base}_E{}", self.expansion_dim)
                }
            }
        }
    }

    /// Row label in the printed tables.
    pub fn label(&self) -> String {
        match self.representation {
            Representation::Raw if self.expansion_dim == 10 => "Linear model w/o expansion".into(),
            Representation::Raw if self.expansion_dim == DEFAULT_EXPANSION_DIM => "Linear model w/ expansion".into(),
            Representation::Raw => format!("Linear model E={}", self.expansion_dim),
            Representation::BasicLatent => "BA w/ expansion".into(),
            Representation::OursLatent => "Ours w/ expansion".into(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown method '{s}'"));
        let (base, expansion) = match s.rsplit_once("_E") {
            Some((b, e)) if !e.is_empty() && e.bytes().all(|c| c.is_ascii_digit()) => {
                (b, Some(e.parse::<usize>().map_err(|_| bad())?))
            }
            _ => (s, None),
        };
        let representation = match base.to_ascii_lowercase().as_str() {
            "linearraw" | "raw" => Representation::Raw,
            "ba_latent_clf" | "ba" => Representation::BasicLatent,
            "ours_latent_clf" | "ours" => Representation::OursLatent,
            _ => return Err(bad()),
        };
        if representation == Representation::Raw && expansion.is_none() {
            return Err(Error::Validation(format!(
                "method '{s}' needs an expansion suffix, e.g. LinearRaw_E10"
            )));
        }
        Ok(Method {
            representation,
            expansion_dim: expansion.unwrap_or(DEFAULT_EXPANSION_DIM),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitStage {
    Scaler,
    Autoencoder,
    Classifier,
}

/// One call that learns from data. `rows` are original dataset row ids.
#[derive(Debug, Clone, Copy)]
pub struct FitEvent<'a> {
    pub fold: Option<usize>,
    pub method: Method,
    pub stage: FitStage,
    pub rows: &'a [usize],
}

/// Observer of every fit/train call made by the experiment runner.
pub trait FitAudit: Sync {
    fn record(&self, event: &FitEvent<'_>);
}

pub struct NoAudit;

impl FitAudit for NoAudit {
    fn record(&self, _: &FitEvent<'_>) {}
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub method: Method,
    pub fold: usize,
    /// `None` when the test fold holds a single class.
    pub auroc: Option<f64>,
    pub n_test: usize,
    pub n_test_anomalies: usize,
    pub ae_trace: Option<TrainTrace>,
    pub clf_trace: TrainTrace,
}

fn fold_seed(cfg: &TrainConfig, fold: usize) -> TrainConfig {
    cfg.with_seed(cfg.seed ^ fold as u64)
}

fn split<T: Scalar>(data: &Dataset<T>, plan: &FoldPlan, fold: usize) -> Result<(Dataset<T>, Dataset<T>)> {
    if plan.n_rows() != data.n_rows() {
        return Err(Error::dim("run_fold", format!("plan over {} rows", data.n_rows()), plan.n_rows()));
    }
    let train = data.subset(&plan.train_indices(fold)?);
    let test = data.subset(&plan.test_indices(fold)?);
    Ok((train, test))
}

pub fn run_fold<T: Scalar>(
    method: Method,
    fold: usize,
    data: &Dataset<T>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
) -> Result<FoldResult> {
    run_fold_audited(method, fold, data, plan, cfg, &NoAudit)
}

/// Runs `method` on fold `fold`: fit on the training rows, score the test rows
/// by classifier logit, and compute AUROC. The fold's RNG seed is `seed ⊕ fold`.
pub fn run_fold_audited<T: Scalar>(
    method: Method,
    fold: usize,
    data: &Dataset<T>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
    audit: &dyn FitAudit,
) -> Result<FoldResult> {
    let (train, test) = split(data, plan, fold)?;
    let cfg = fold_seed(cfg, fold);
    let fitted = fit_pipeline(method, &train, &cfg, audit, Some(fold))?;
    let scores = fitted.pipeline.score(test.features())?;
    let auroc = if test.has_both_classes() {
        Some(auroc(&scores.logit, test.labels())?)
    } else {
        None
    };
    Ok(FoldResult {
        method,
        fold,
        auroc,
        n_test: test.n_rows(),
        n_test_anomalies: test.anomaly_count(),
        ae_trace: fitted.ae_trace,
        clf_trace: fitted.clf_trace,
    })
}

/// Test-row representation that `method`'s classifier would see on `fold`,
/// with the test labels. Only the scaler and autoencoder are fit.
pub fn test_representation<T: Scalar>(
    method: Method,
    fold: usize,
    data: &Dataset<T>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
) -> Result<(Matrix<T>, Vec<u8>)> {
    let (train, test) = split(data, plan, fold)?;
    let cfg = fold_seed(cfg, fold);
    let (scaler, ae, _) = fit_representation(method, &train, &cfg, &NoAudit, Some(fold))?;
    let scaled = scaler.transform(test.features())?;
    let repr = match ae {
        Some((ae, _)) => ae.encode(&scaled)?,
        None => scaled,
    };
    Ok((repr, test.labels().to_vec()))
}

/// Runs every `(method, fold)` task on a pool of `jobs` threads. Results come
/// back in task order and do not depend on `jobs`.
pub fn run_grid<T: Scalar>(
    tasks: &[(Method, usize)],
    data: &Dataset<T>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
    jobs: usize,
    audit: &dyn FitAudit,
) -> Result<Vec<FoldResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(method, fold)| run_fold_audited(method, fold, data, plan, cfg, audit))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::LINEAR_RAW_E10,
            Method::LINEAR_RAW_E1024,
            Method::BA_LATENT_CLF,
            Method::OURS_LATENT_CLF,
            Method::OURS_LATENT_CLF.with_expansion(128),
        ] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(Method::LINEAR_RAW_E10.name(), "LinearRaw_E10");
        assert_eq!("ours".parse::<Method>().unwrap(), Method::OURS_LATENT_CLF);
        assert!("raw".parse::<Method>().is_err());
        assert!("mystery".parse::<Method>().is_err());
    }
}
