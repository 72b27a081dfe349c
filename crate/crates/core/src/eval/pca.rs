//! Two-component PCA via cyclic Jacobi eigen-decomposition of the covariance.

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T = f64> {
    means: Vec<T>,
    /// `D × 2`, orthonormal columns.
    axes: Matrix<T>,
    explained_variance: [T; 2],
}

/// Eigen-decomposition of a symmetric matrix. Returns eigenvalues and the
/// eigenvectors as columns of a `n × n` matrix, unsorted.
pub fn jacobi_eigen<T: Scalar>(sym: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = sym.rows();
    if sym.cols() != n {
        return Err(Error::dim("jacobi_eigen", "square matrix", format!("{:?}", sym.shape())));
    }
    let mut a = sym.clone();
    let mut v = Matrix::identity(n);
    let total: T = a.as_slice().iter().map(|&x| x * x).sum();
    let tol = T::epsilon() * T::epsilon() * total.max(T::min_positive_value());

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a.get(p, q) * a.get(p, q);
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (T::lit(2.0) * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Ok(((0..n).map(|i| a.get(i, i)).collect(), v))
}

/// Sample covariance (`N - 1` divisor) of column-centred data.
fn covariance<T: Scalar>(x: &Matrix<T>, means: &[T]) -> Result<Matrix<T>> {
    let mut centred = x.clone();
    for r in 0..centred.rows() {
        for (v, &m) in centred.row_mut(r).iter_mut().zip(means) {
            *v = *v - m;
        }
    }
    let denom = T::from_usize(x.rows() - 1).unwrap();
    Ok(centred.t_matmul(&centred)?.map(|v| v / denom))
}

impl<T: Scalar> PcaModel<T> {
    pub fn fit(x: &Matrix<T>) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::Validation(format!("PCA needs at least 2 rows, got {}", x.rows())));
        }
        if x.cols() < 2 {
            return Err(Error::Validation(format!("PCA needs at least 2 columns, got {}", x.cols())));
        }
        x.ensure_finite("PCA input")?;
        let means = x.column_means();
        let (values, vectors) = jacobi_eigen(&covariance(x, &means)?)?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());

        let d = x.cols();
        let mut axes = Matrix::zeros(d, 2);
        let mut explained = [T::zero(); 2];
        for (slot, &idx) in order.iter().take(2).enumerate() {
            let mut col = vectors.column(idx);
            let pivot = col
                .iter()
                .copied()
                .fold(T::zero(), |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < T::zero() {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            for (r, v) in col.into_iter().enumerate() {
                axes.set(r, slot, v);
            }
            explained[slot] = values[idx].max(T::zero());
        }
        Ok(Self {
            means,
            axes,
            explained_variance: explained,
        })
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn axes(&self) -> &Matrix<T> {
        &self.axes
    }

    pub fn explained_variance(&self) -> [T; 2] {
        self.explained_variance
    }

    /// `(X - mean) · axes`.
    pub fn project(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.means.len() {
            return Err(Error::dim("pca_project", self.means.len(), x.cols()));
        }
        x.ensure_finite("PCA input")?;
        let mut centred = x.clone();
        for r in 0..centred.rows() {
            for (v, &m) in centred.row_mut(r).iter_mut().zip(&self.means) {
                *v = *v - m;
            }
        }
        centred.matmul(&self.axes)
    }
}

pub fn pca_fit<T: Scalar>(x: &Matrix<T>) -> Result<PcaModel<T>> {
    PcaModel::fit(x)
}

pub fn pca_project<T: Scalar>(model: &PcaModel<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    model.project(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let a = Matrix::from_rows(&[[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]]).unwrap();
        let (vals, vecs) = jacobi_eigen(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs.get(i, k) * vals[k] * vecs.get(j, k)).sum();
                assert!((r - a.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn line_data_has_rank_one() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let m = PcaModel::fit(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let s5 = 5f64.sqrt();
        assert!((m.axes().get(0, 0) - 1.0 / s5).abs() < 1e-12);
        assert!((m.axes().get(1, 0) - 2.0 / s5).abs() < 1e-12);
        assert!(m.explained_variance()[1].abs() < 1e-10);
    }

    #[test]
    fn projected_variances_match_explained() {
        let mut rng = Rng::new(6);
        let x = Matrix::from_vec(
            500,
            4,
            (0..2000).map(|i| rng.standard_normal() * (1.0 + (i % 4) as f64)).collect(),
        )
        .unwrap();
        let m = PcaModel::fit(&x).unwrap();
        let p = m.project(&x).unwrap();
        for c in 0..2 {
            let col = p.column(c);
            let mean = col.iter().sum::<f64>() / 500.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 499.0;
            assert!((var - m.explained_variance()[c]).abs() < 1e-8);
        }
        assert!(m.explained_variance()[0] >= m.explained_variance()[1]);
    }

    #[test]
    fn too_few_rows() {
        assert!(PcaModel::<f64>::fit(&Matrix::zeros(1, 3)).is_err());
    }
}
