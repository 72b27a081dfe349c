//! Per-column Min-Max scaling fit on training rows.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// `x' = (x - min) / (max - min)`, clamped to `[0, 1]`; constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler<T = f64> {
    mins: Vec<T>,
    maxs: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    /// Learns column ranges from `train`. Pass only the training split.
    pub fn fit(train: &Dataset<T>) -> Result<Self> {
        Self::fit_matrix(train.features())
    }

    pub fn fit_matrix(x: &Matrix<T>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Validation("cannot fit a scaler on zero rows".into()));
        }
        x.ensure_finite("scaler input")?;
        let mut mins = x.row(0).to_vec();
        let mut maxs = x.row(0).to_vec();
        for r in 1..x.rows() {
            for (c, &v) in x.row(r).iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn from_bounds(mins: Vec<T>, maxs: Vec<T>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::dim("Scaler::from_bounds", mins.len(), maxs.len()));
        }
        if mins.iter().zip(&maxs).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Validation("scaler bounds need finite min <= max".into()));
        }
        Ok(Self { mins, maxs })
    }

    pub fn mins(&self) -> &[T] {
        &self.mins
    }

    pub fn maxs(&self) -> &[T] {
        &self.maxs
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.n_features() {
            return Err(Error::dim(
                "Scaler::transform",
                format!("{} columns", self.n_features()),
                format!("{} columns", x.cols()),
            ));
        }
        x.ensure_finite("scaler input")?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.mins[c], self.maxs[c]);
                *v = if hi > lo {
                    ((*v - lo) / (hi - lo)).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                };
            }
        }
        Ok(out)
    }

    pub fn apply(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        data.with_features(self.transform(data.features())?)
    }

    /// Maps scaled values back to the original units. Constant columns return
    /// their single value; clamped values are not recoverable.
    pub fn inverse(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.n_features() {
            return Err(Error::dim("Scaler::inverse", self.n_features(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.mins[c] + *v * (self.maxs[c] - self.mins[c]);
            }
        }
        Ok(out)
    }
}
