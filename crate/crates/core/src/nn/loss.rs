//! Mean-reduced losses.

use crate::error::{Error, Result};
use crate::nn::layer::{sigmoid, softplus};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Mean squared error over all elements, with its gradient `2(pred - target)/N`.
pub fn loss_mse<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(
            "loss_mse",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    pred.ensure_finite("loss_mse pred")?;
    target.ensure_finite("loss_mse target")?;
    let n = T::from_usize(pred.len().max(1)).unwrap();
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.as_slice().iter().zip(target.as_slice()) {
        let d = p - t;
        loss = loss + d * d;
        grad.push(two * d / n);
    }
    Ok((loss / n, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
}

/// Binary cross-entropy of a log-sigmoid head, evaluated from the logits.
///
/// With `p = σ(z)`, the per-row loss `-(y log p + (1-y) log(1-p))` equals
/// `softplus(z) - y·z`, which never exponentiates a large argument. The
/// returned gradient is w.r.t. the logits: `(σ(z) - y)/N`.
pub fn loss_bce<T: Scalar>(logits: &[T], labels: &[u8]) -> Result<(T, Vec<T>)> {
    if logits.len() != labels.len() {
        return Err(Error::dim("loss_bce", logits.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Validation(format!("label {bad} not in {{0, 1}}")));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("loss_bce logits".into()));
    }
    let n = T::from_usize(logits.len().max(1)).unwrap();
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        let y = if y == 1 { T::one() } else { T::zero() };
        loss = loss + softplus(z) - y * z;
        grad.push((sigmoid(z) - y) / n);
    }
    Ok((loss / n, grad))
}
