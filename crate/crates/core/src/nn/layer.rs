//! Dense layer: `y = dropout(activation(x·W + b))`.
//!
//! Weights are stored `fan_in × fan_out` so a batch of row vectors multiplies
//! directly. Dropout is inverted: surviving units are scaled by `1/(1-rate)` at
//! train time, and eval mode is the identity.

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    LogSigmoid,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::LogSigmoid => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            3 => Some(Activation::LogSigmoid),
            _ => None,
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::None => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => sigmoid(z),
            Activation::LogSigmoid => log_sigmoid(z),
        }
    }

    /// `d activation / d z`, given the pre-activation `z`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::None => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            // d/dz log σ(z) = 1 - σ(z) = σ(-z)
            Activation::LogSigmoid => sigmoid(-z),
        }
    }
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log σ(z) = -softplus(-z)`.
#[inline]
pub fn log_sigmoid<T: Scalar>(z: T) -> T {
    -softplus(-z)
}

/// `ln(1 + e^z)`.
#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn activate<T: Scalar>(act: Activation, z: &[T]) -> Vec<T> {
    match act {
        Activation::None => z.to_vec(),
        Activation::Relu => z.iter().map(|&v| v.max(T::zero())).collect(),
        Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
        Activation::LogSigmoid => z.iter().map(|&v| log_sigmoid(v)).collect(),
    }
}

fn derivative<T: Scalar>(act: Activation, z: &[T]) -> Vec<T> {
    match act {
        Activation::Relu => z
            .iter()
            .map(|&v| if v > T::zero() { T::one() } else { T::zero() })
            .collect(),
        _ => z.iter().map(|&v| act.derivative(v)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f64> {
    weights: Matrix<T>,
    bias: Vec<T>,
    activation: Activation,
    dropout_rate: f64,
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f64> {
    input: Matrix<T>,
    pre_activation: Matrix<T>,
    /// Dropout multipliers (0 or `1/(1-rate)`), present only for train-mode calls
    /// on layers with a non-zero rate.
    mask: Option<Matrix<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn input(&self) -> &Matrix<T> {
        &self.input
    }

    pub fn pre_activation(&self) -> &Matrix<T> {
        &self.pre_activation
    }

    pub fn mask(&self) -> Option<&Matrix<T>> {
        self.mask.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrads<T = f64> {
    pub input: Matrix<T>,
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Validation(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(
        weights: Matrix<T>,
        bias: Vec<T>,
        activation: Activation,
        dropout_rate: f64,
    ) -> Result<Self> {
        check_rate(dropout_rate)?;
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Validation("layer dims must be >= 1".into()));
        }
        if bias.len() != weights.cols() {
            return Err(Error::dim("DenseLayer::new", weights.cols(), bias.len()));
        }
        weights.ensure_finite("layer weights")?;
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            dropout_rate,
        })
    }

    /// Fan-in scaled uniform initialisation: `W ~ U(-1/√fan_in, 1/√fan_in)`,
    /// zero bias.
    pub fn init(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        dropout_rate: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::Validation(format!(
                "layer dims must be >= 1, got {fan_in}x{fan_out}"
            )));
        }
        check_rate(dropout_rate)?;
        let bound = (1.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::lit((2.0 * rng.uniform() - 1.0) * bound))
            .collect();
        Ok(Self {
            weights: Matrix::from_vec(fan_in, fan_out, data)?,
            bias: vec![T::zero(); fan_out],
            activation,
            dropout_rate,
        })
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    /// Mutable views of `(weights, bias)`, in that order.
    pub fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weights.as_mut_slice(), &mut self.bias)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn pre_activation(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        if input.cols() != self.fan_in() {
            return Err(Error::dim(
                "dense_forward",
                format!("{} input columns", self.fan_in()),
                format!("{} columns", input.cols()),
            ));
        }
        input.ensure_finite("dense_forward input")?;
        let mut z = input.matmul(&self.weights)?;
        for r in 0..z.rows() {
            for (v, &b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        Ok(z)
    }

    /// Eval-mode forward without a cache. Pure: draws no randomness.
    pub fn infer(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        let pre = self.pre_activation(input)?;
        let out = Matrix::from_vec(pre.rows(), pre.cols(), activate(self.activation, pre.as_slice()))?;
        out.ensure_finite("dense_forward output")?;
        Ok(out)
    }

    /// Forward pass. Train mode samples a fresh dropout mask from `rng`; eval
    /// mode consumes no draws.
    pub fn forward(
        &self,
        input: &Matrix<T>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        let mask = match mode {
            Mode::Train => self.train_mask(input.rows(), rng)?,
            Mode::Eval => None,
        };
        self.forward_with_mask(input, mask)
    }

    /// Fresh inverted-dropout mask for `rows` inputs; `None` when the rate is 0.
    pub fn train_mask(&self, rows: usize, rng: &mut Rng) -> Result<Option<Matrix<T>>> {
        if self.dropout_rate == 0.0 {
            return Ok(None);
        }
        let keep = T::lit(1.0 / (1.0 - self.dropout_rate));
        // a unit is dropped when a 32-bit draw falls below rate * 2^32
        let threshold = (self.dropout_rate * 4_294_967_296.0) as u64;
        let values = [T::zero(), keep];
        let data = (0..rows * self.fan_out())
            .map(|_| values[(u64::from(rng.next_u32()) >= threshold) as usize])
            .collect();
        Ok(Some(Matrix::from_vec(rows, self.fan_out(), data)?))
    }

    /// Forward pass with an explicit dropout mask (`None` = no dropout).
    pub fn forward_with_mask(
        &self,
        input: &Matrix<T>,
        mask: Option<Matrix<T>>,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.forward_owned(input.clone(), mask)
    }

    pub(crate) fn forward_owned(
        &self,
        input: Matrix<T>,
        mask: Option<Matrix<T>>,
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        let pre = self.pre_activation(&input)?;
        if let Some(m) = &mask {
            if m.shape() != pre.shape() {
                return Err(Error::dim(
                    "dense_forward mask",
                    format!("{:?}", pre.shape()),
                    format!("{:?}", m.shape()),
                ));
            }
        }
        let mut out = activate(self.activation, pre.as_slice());
        if let Some(m) = &mask {
            for (o, &k) in out.iter_mut().zip(m.as_slice()) {
                *o = *o * k;
            }
        }
        let out = Matrix::from_vec(pre.rows(), pre.cols(), out)?;
        out.ensure_finite("dense_forward output")?;
        Ok((
            out,
            ForwardCache {
                input,
                pre_activation: pre,
                mask,
            },
        ))
    }

    /// Backward pass from the gradient of the layer output.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &Matrix<T>) -> Result<LayerGrads<T>> {
        self.backward_inner(cache, grad_output, false, true)
    }

    /// Backward pass from the gradient w.r.t. the pre-activation `z`, bypassing
    /// the activation and dropout. Used by the logit-space BCE head.
    pub fn backward_pre_activation(
        &self,
        cache: &ForwardCache<T>,
        grad_pre: &Matrix<T>,
    ) -> Result<LayerGrads<T>> {
        self.backward_inner(cache, grad_pre, true, true)
    }

    /// With `need_input` unset the returned `input` gradient is an empty 0x0
    /// matrix; first layers of a network never need it.
    pub(crate) fn backward_inner(
        &self,
        cache: &ForwardCache<T>,
        grad: &Matrix<T>,
        is_pre_activation: bool,
        need_input: bool,
    ) -> Result<LayerGrads<T>> {
        if grad.shape() != cache.pre_activation.shape() {
            return Err(Error::dim(
                "dense_backward",
                format!("{:?}", cache.pre_activation.shape()),
                format!("{:?}", grad.shape()),
            ));
        }
        if cache.input.cols() != self.fan_in() {
            return Err(Error::dim("dense_backward", self.fan_in(), cache.input.cols()));
        }
        grad.ensure_finite("dense_backward gradient")?;
        let grad_pre = if is_pre_activation {
            grad.clone()
        } else {
            let mut data = derivative(self.activation, cache.pre_activation.as_slice());
            for (d, &g) in data.iter_mut().zip(grad.as_slice()) {
                *d = *d * g;
            }
            if let Some(m) = &cache.mask {
                for (d, &k) in data.iter_mut().zip(m.as_slice()) {
                    *d = *d * k;
                }
            }
            Matrix::from_vec(grad.rows(), grad.cols(), data)?
        };
        let weights = cache.input.t_matmul(&grad_pre)?;
        let bias = grad_pre.column_sums();
        let input = if need_input {
            grad_pre.matmul_t(&self.weights)?
        } else {
            Matrix::zeros(0, 0)
        };
        Ok(LayerGrads {
            input,
            weights,
            bias,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Matrix<f64> {
        Matrix::from_rows(&[v]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer::new(Matrix::identity(3), vec![0.0; 3], Activation::None, 0.0).unwrap();
        let out = layer.infer(&row(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn relu_clips_negative_pre_activations() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Relu, 0.0).unwrap();
        let out = layer.infer(&row(&[-1.0, 2.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn sigmoid_hand_value() {
        let w = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.5], Activation::Sigmoid, 0.0).unwrap();
        let out = layer.infer(&row(&[1.0, 1.0])).unwrap();
        let expected = 1.0 / (1.0 + (-2.5f64).exp());
        assert!((out.get(0, 0) - expected).abs() < 1e-15);
        assert!((out.get(0, 0) - 0.924142).abs() < 1e-6);
    }

    #[test]
    fn identity_jacobian_and_relu_zero_gradient() {
        let mut rng = Rng::new(0);
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::None, 0.0).unwrap();
        let (_, cache) = layer.forward(&row(&[3.0, -4.0]), Mode::Eval, &mut rng).unwrap();
        let g = row(&[0.25, -1.5]);
        assert_eq!(layer.backward(&cache, &g).unwrap().input, g);

        let relu = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Relu, 0.0).unwrap();
        let (_, cache) = relu.forward(&row(&[-1.0, 2.0]), Mode::Eval, &mut rng).unwrap();
        let grads = relu.backward(&cache, &row(&[1.0, 1.0])).unwrap();
        assert_eq!(grads.input.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn eval_mode_draws_no_randomness() {
        let mut rng = Rng::new(5);
        let layer = DenseLayer::<f64>::init(4, 8, Activation::Relu, 0.5, &mut rng).unwrap();
        let x = Matrix::filled(3, 4, 0.5);
        let mut a = Rng::new(9);
        let b = Rng::new(9);
        layer.forward(&x, Mode::Eval, &mut a).unwrap();
        assert_eq!(a.clone().uniform(), b.clone().uniform());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = Rng::new(1);
        let layer = DenseLayer::<f64>::init(3, 2, Activation::None, 0.0, &mut rng).unwrap();
        assert!(matches!(layer.infer(&Matrix::zeros(1, 2)), Err(Error::Dimension { .. })));
        assert!(matches!(layer.infer(&row(&[1.0, f64::INFINITY, 0.0])), Err(Error::NonFinite(_))));
        assert!(DenseLayer::<f64>::init(0, 2, Activation::None, 0.0, &mut rng).is_err());
        assert!(DenseLayer::<f64>::init(2, 2, Activation::None, 1.0, &mut rng).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = DenseLayer::<f64>::init(100, 20, Activation::None, 0.0, &mut Rng::new(11)).unwrap();
        let b = DenseLayer::<f64>::init(100, 20, Activation::None, 0.0, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
        assert!(a.weights().as_slice().iter().all(|w| w.abs() <= 0.1));
        assert!(a.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_sample_mean_within_three_sigma() {
        // U(-b, b) has variance b²/3.
        let layer = DenseLayer::<f64>::init(100, 100, Activation::None, 0.0, &mut Rng::new(2)).unwrap();
        let w = layer.weights().as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sigma = (0.01f64 / 3.0).sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} vs 3σ {}", 3.0 * sigma);
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let layer = DenseLayer::new(Matrix::identity(4), vec![0.0; 4], Activation::None, 0.5).unwrap();
        let x = Matrix::filled(1, 4, 1.0);
        let mut rng = Rng::new(17);
        let trials = 20_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let (out, _) = layer.forward(&x, Mode::Train, &mut rng).unwrap();
            total += out.as_slice().iter().sum::<f64>();
        }
        // each unit is 0 or 2 with p = 0.5: per-unit std 1, 4 units per trial
        let mean = total / (trials as f64 * 4.0);
        let se = 1.0 / ((trials * 4) as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn stable_log_sigmoid_tails() {
        assert_eq!(log_sigmoid(800.0f64), 0.0);
        assert!((log_sigmoid(-800.0f64) + 800.0).abs() < 1e-12);
        assert!((log_sigmoid(0.0f64) - 0.5f64.ln()).abs() < 1e-15);
        assert!(Activation::LogSigmoid.derivative(-800.0f64) == 1.0);
    }
}
