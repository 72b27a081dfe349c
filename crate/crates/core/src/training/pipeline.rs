//! A fitted scaler → (encoder) → classifier chain and its on-disk bundle.
//!
//! Bundle layout, little-endian:
//!
//! ```text
//! magic            4 bytes  "LVXP"
//! version          u32      1
//! representation   u8       0 = raw, 1 = basic latent, 2 = width-preserving latent
//! expansion_dim    u32
//! feature_count    u32      D
//! mins             D × f64
//! maxs             D × f64
//! has_autoencoder  u8
//! [ae_len u64, ae checkpoint bytes]      when has_autoencoder = 1
//! clf_len u64, classifier checkpoint bytes
//! ```
//!
//! The embedded models use the `LVXM` checkpoint format unchanged.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::models::{decode_model, encode_model, Model, ModelKind, ModelSpec, Scores};
use crate::nn::Matrix;
use crate::scalar::Scalar;
use crate::training::experiment::{FitAudit, FitEvent, FitStage, Method, Representation};
use crate::training::{train_autoencoder, train_classifier, TrainConfig, TrainTrace};

pub const PIPELINE_MAGIC: &[u8; 4] = b"LVXP";
pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<T = f64> {
    method: Method,
    scaler: Scaler<T>,
    autoencoder: Option<Model<T>>,
    classifier: Model<T>,
}

/// Output of [`fit_pipeline`].
#[derive(Debug, Clone)]
pub struct FittedPipeline<T = f64> {
    pub pipeline: Pipeline<T>,
    pub ae_trace: Option<TrainTrace>,
    pub clf_trace: TrainTrace,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(
        method: Method,
        scaler: Scaler<T>,
        autoencoder: Option<Model<T>>,
        classifier: Model<T>,
    ) -> Result<Self> {
        let expected_kind = method.representation.autoencoder_kind();
        match (&autoencoder, expected_kind) {
            (None, None) => {}
            (Some(ae), Some(kind)) if ae.spec().kind == kind => {
                if ae.spec().input_dim != scaler.n_features() {
                    return Err(Error::dim("Pipeline::new", scaler.n_features(), ae.spec().input_dim));
                }
            }
            _ => {
                return Err(Error::Kind(format!(
                    "autoencoder does not match method {}",
                    method.name()
                )))
            }
        }
        let spec = classifier.spec();
        if spec.kind != ModelKind::ExpansionClassifier {
            return Err(Error::Kind("pipeline head must be the expansion classifier".into()));
        }
        let repr_width = autoencoder
            .as_ref()
            .map_or(scaler.n_features(), |ae| ae.spec().latent_width());
        if spec.input_dim != repr_width {
            return Err(Error::dim("Pipeline::new", repr_width, spec.input_dim));
        }
        Ok(Self {
            method,
            scaler,
            autoencoder,
            classifier,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn scaler(&self) -> &Scaler<T> {
        &self.scaler
    }

    pub fn autoencoder(&self) -> Option<&Model<T>> {
        self.autoencoder.as_ref()
    }

    pub fn classifier(&self) -> &Model<T> {
        &self.classifier
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    /// Representation of already-scaled features that the classifier consumes.
    pub fn represent(&self, scaled: &Matrix<T>) -> Result<Matrix<T>> {
        match &self.autoencoder {
            Some(ae) => ae.encode(scaled),
            None => Ok(scaled.clone()),
        }
    }

    /// Scores raw (unscaled) feature rows.
    pub fn score(&self, raw: &Matrix<T>) -> Result<Scores<T>> {
        if raw.cols() != self.n_features() {
            return Err(Error::dim(
                "Pipeline::score",
                format!("{} feature columns", self.n_features()),
                format!("{} columns", raw.cols()),
            ));
        }
        let scaled = self.scaler.transform(raw)?;
        self.classifier.classify(&self.represent(&scaled)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(PIPELINE_MAGIC);
        out.extend_from_slice(&PIPELINE_VERSION.to_le_bytes());
        out.push(self.method.representation.code());
        out.extend_from_slice(&(self.method.expansion_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.scaler.n_features() as u32).to_le_bytes());
        for &v in self.scaler.mins().iter().chain(self.scaler.maxs()) {
            out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
        match &self.autoencoder {
            Some(ae) => {
                out.push(1);
                let blob = encode_model(ae);
                out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
                out.extend_from_slice(&blob);
            }
            None => out.push(0),
        }
        let blob = encode_model(&self.classifier);
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Format(format!("truncated pipeline bundle while reading {what}")))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4, "magic")? != PIPELINE_MAGIC {
            return Err(Error::Format("bad magic, expected \"LVXP\"".into()));
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
        if version != PIPELINE_VERSION {
            return Err(Error::Format(format!(
                "unsupported pipeline version {version}, expected {PIPELINE_VERSION}"
            )));
        }
        let repr_code = take(1, "representation")?[0];
        let representation = Representation::from_code(repr_code)
            .ok_or_else(|| Error::Format(format!("unknown representation {repr_code}")))?;
        let expansion_dim = u32::from_le_bytes(take(4, "expansion")?.try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(take(4, "feature count")?.try_into().unwrap()) as usize;
        let mut bound = |what: &str| -> Result<Vec<T>> {
            Ok(take(d * 8, what)?
                .chunks_exact(8)
                .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
                .collect())
        };
        let mins = bound("mins")?;
        let maxs = bound("maxs")?;
        let scaler = Scaler::from_bounds(mins, maxs).map_err(|e| Error::Format(e.to_string()))?;
        let has_ae = take(1, "autoencoder flag")?[0];
        let mut blob = |what: &str| -> Result<Model<T>> {
            let len = u64::from_le_bytes(take(8, what)?.try_into().unwrap()) as usize;
            decode_model(take(len, what)?)
        };
        let autoencoder = match has_ae {
            0 => None,
            1 => Some(blob("autoencoder")?),
            f => return Err(Error::Format(format!("bad autoencoder flag {f}"))),
        };
        let classifier = blob("classifier")?;
        if pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes in pipeline bundle", bytes.len() - pos)));
        }
        Pipeline::new(
            Method {
                representation,
                expansion_dim,
            },
            scaler,
            autoencoder,
            classifier,
        )
        .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Scaler and (for latent methods) autoencoder, fit on `train` only.
pub(crate) fn fit_representation<T: Scalar>(
    method: Method,
    train: &Dataset<T>,
    cfg: &TrainConfig,
    audit: &dyn FitAudit,
    fold: Option<usize>,
) -> Result<(Scaler<T>, Option<(Model<T>, TrainTrace)>, Dataset<T>)> {
    let event = |stage, rows: &[usize]| {
        audit.record(&FitEvent {
            fold,
            method,
            stage,
            rows,
        })
    };
    event(FitStage::Scaler, train.row_ids());
    let scaler = Scaler::fit(train)?;
    let scaled = scaler.apply(train)?;

    let ae = match method.representation.autoencoder_kind() {
        None => None,
        Some(kind) => {
            let spec = match kind {
                ModelKind::OursAe => ModelSpec::ours_ae(scaled.n_features()),
                _ => ModelSpec::basic_ae(scaled.n_features()),
            };
            let ae_rows = if cfg.normal_only_ae {
                scaled.normal_rows()
            } else {
                scaled.clone()
            };
            event(FitStage::Autoencoder, ae_rows.row_ids());
            Some(train_autoencoder(spec, &ae_rows, cfg)?)
        }
    };
    Ok((scaler, ae, scaled))
}

/// Fits the full chain for `method` on `train`. Every fit call is reported to
/// `audit` with the original row ids it consumed.
pub fn fit_pipeline<T: Scalar>(
    method: Method,
    train: &Dataset<T>,
    cfg: &TrainConfig,
    audit: &dyn FitAudit,
    fold: Option<usize>,
) -> Result<FittedPipeline<T>> {
    let (scaler, ae, scaled) = fit_representation(method, train, cfg, audit, fold)?;
    let (autoencoder, ae_trace) = match ae {
        Some((m, t)) => (Some(m), Some(t)),
        None => (None, None),
    };
    let repr = match &autoencoder {
        Some(ae) => ae.encode(scaled.features())?,
        None => scaled.features().clone(),
    };
    audit.record(&FitEvent {
        fold,
        method,
        stage: FitStage::Classifier,
        rows: scaled.row_ids(),
    });
    let spec = ModelSpec::expansion_classifier(repr.cols(), method.expansion_dim);
    let (classifier, clf_trace) = train_classifier(spec, &repr, scaled.labels(), cfg)?;
    Ok(FittedPipeline {
        pipeline: Pipeline::new(method, scaler, autoencoder, classifier)?,
        ae_trace,
        clf_trace,
    })
}
