use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Imbalanced two-Gaussian dataset.
///
/// Normal rows are `N(0, I)`; anomalies are `N(separation · u, I)` for a random
/// unit vector `u`. Rows are shuffled, so labels are interleaved.
pub fn gen_synthetic<T: Scalar>(
    n_normal: usize,
    n_anomaly: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_normal == 0 || n_anomaly == 0 {
        return Err(Error::Validation(format!(
            "class counts must be >= 1, got {n_normal} normal / {n_anomaly} anomalous"
        )));
    }
    if dims < 2 {
        return Err(Error::Validation(format!("need at least 2 features, got {dims}")));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Validation(format!("separation must be finite and >= 0, got {separation}")));
    }

    let root = Rng::new(seed);
    let mut dir_rng = root.fork(1);
    let direction: Vec<f64> = loop {
        let v: Vec<f64> = (0..dims).map(|_| dir_rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break v.into_iter().map(|x| x / norm).collect();
        }
    };

    let n = n_normal + n_anomaly;
    let mut labels: Vec<u8> = std::iter::repeat_n(0, n_normal)
        .chain(std::iter::repeat_n(1, n_anomaly))
        .collect();
    root.fork(2).shuffle(&mut labels);

    let mut noise = root.fork(3);
    let mut data = Vec::with_capacity(n * dims);
    for &y in &labels {
        for &u in &direction {
            let shift = if y == 1 { separation * u } else { 0.0 };
            data.push(T::lit(shift + noise.standard_normal()));
        }
    }
    let names = (1..=dims).map(|i| format!("x{i}")).collect();
    Dataset::new(Matrix::from_vec(n, dims, data)?, labels, names)
}
