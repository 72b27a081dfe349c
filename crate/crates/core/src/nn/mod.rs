//! Dense-network numeric kernel.

mod adam;
mod layer;
mod loss;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::{log_sigmoid, sigmoid, softplus, Activation, DenseLayer, ForwardCache, LayerGrads, Mode};
pub use loss::{loss_bce, loss_mse};
pub use matrix::Matrix;
