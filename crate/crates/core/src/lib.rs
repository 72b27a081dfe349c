//! Latent vector expansion autoencoders for anomaly detection on imbalanced
//! tabular data.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small dense-network kernel (matrices, linear layers, losses, Adam).
//! - [`models`]: the basic autoencoder, the width-preserving autoencoder and the
//!   expansion classifier, plus the binary checkpoint format.
//! - [`data`]: CSV ingestion, Min-Max scaling, K-fold plans and a synthetic
//!   imbalanced generator.
//! - [`training`]: training loops and the per-fold experiment runner.
//! - [`eval`]: tie-correct AUROC, 2-component PCA and report assembly.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the 64-bit instantiation used by the experiments.

pub mod data;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;

pub type Matrix64 = nn::Matrix<f64>;
pub type Matrix32 = nn::Matrix<f32>;
pub type DenseLayer64 = nn::DenseLayer<f64>;
pub type DenseLayer32 = nn::DenseLayer<f32>;
pub type Model64 = models::Model<f64>;
pub type Model32 = models::Model<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Scaler64 = data::Scaler<f64>;
pub type Pipeline64 = training::Pipeline<f64>;
pub type PcaModel64 = eval::PcaModel<f64>;
