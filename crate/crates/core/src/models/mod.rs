//! The three network architectures and their forward passes.
//!
//! | kind                  | encoder                                   | decoder / head                            |
//! |-----------------------|-------------------------------------------|-------------------------------------------|
//! | `BasicAe`             | `D→H` ReLU, `H→L`                         | `L→H` ReLU, `H→D` Sigmoid                 |
//! | `OursAe`              | `D→D` ReLU, `D→H` ReLU, `H→D`             | `D→H` ReLU, `H→D` ReLU, `D→D` Sigmoid     |
//! | `ExpansionClassifier` | –                                         | `in→E` ReLU + dropout, `E→1` LogSigmoid   |
//!
//! with `H = max(1, ⌊D/2⌋)` and, by default, `L = max(1, ⌈D/4⌉)`.

mod checkpoint;

pub use checkpoint::{decode_model, encode_model, load_model, save_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Matrix};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Dropout rate of the expansion layer.
pub const EXPANSION_DROPOUT: f64 = 0.5;
/// Width of the expansion layer that the experiments default to.
pub const DEFAULT_EXPANSION_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    BasicAe,
    OursAe,
    ExpansionClassifier,
}

impl ModelKind {
    pub fn code(self) -> u8 {
        match self {
            ModelKind::BasicAe => 0,
            ModelKind::OursAe => 1,
            ModelKind::ExpansionClassifier => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelKind::BasicAe),
            1 => Some(ModelKind::OursAe),
            2 => Some(ModelKind::ExpansionClassifier),
            _ => None,
        }
    }

    pub fn is_autoencoder(self) -> bool {
        !matches!(self, ModelKind::ExpansionClassifier)
    }
}

/// Declarative description of a network; the layer stack is derived from it.
///
/// For the classifier, `input_dim` is the width of the representation it
/// consumes and `latent_dim` mirrors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub expansion_dim: usize,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerDims {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl LayerDims {
    fn new(fan_in: usize, fan_out: usize, activation: Activation) -> Self {
        Self {
            fan_in,
            fan_out,
            activation,
            dropout_rate: 0.0,
        }
    }
}

/// Layer dims grouped by role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerPlan {
    pub encoder: Vec<LayerDims>,
    pub decoder: Vec<LayerDims>,
    pub head: Vec<LayerDims>,
}

impl LayerPlan {
    pub fn all(&self) -> impl Iterator<Item = &LayerDims> {
        self.encoder.iter().chain(&self.decoder).chain(&self.head)
    }
}

/// Hidden width shared by both autoencoders.
pub fn hidden_width(input_dim: usize) -> usize {
    (input_dim / 2).max(1)
}

/// Default bottleneck of the basic autoencoder.
pub fn basic_latent_width(input_dim: usize) -> usize {
    input_dim.div_ceil(4).max(1)
}

impl ModelSpec {
    pub fn ours_ae(input_dim: usize) -> Self {
        Self {
            kind: ModelKind::OursAe,
            input_dim,
            latent_dim: input_dim,
            expansion_dim: 0,
            dropout_rate: 0.0,
        }
    }

    pub fn basic_ae(input_dim: usize) -> Self {
        Self::basic_ae_with_latent(input_dim, basic_latent_width(input_dim))
    }

    pub fn basic_ae_with_latent(input_dim: usize, latent_dim: usize) -> Self {
        Self {
            kind: ModelKind::BasicAe,
            input_dim,
            latent_dim,
            expansion_dim: 0,
            dropout_rate: 0.0,
        }
    }

    pub fn expansion_classifier(latent_in: usize, expansion_dim: usize) -> Self {
        Self {
            kind: ModelKind::ExpansionClassifier,
            input_dim: latent_in,
            latent_dim: latent_in,
            expansion_dim,
            dropout_rate: EXPANSION_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} not in [0, 1)", self.dropout_rate));
        }
        match self.kind {
            ModelKind::OursAe | ModelKind::BasicAe if self.input_dim < 2 => {
                fail(format!("autoencoder input dim must be >= 2, got {}", self.input_dim))
            }
            ModelKind::OursAe if self.latent_dim != self.input_dim => fail(format!(
                "width-preserving autoencoder latent dim must equal input dim {}, got {}",
                self.input_dim, self.latent_dim
            )),
            ModelKind::BasicAe if self.latent_dim == 0 => fail("latent dim must be >= 1".into()),
            ModelKind::ExpansionClassifier if self.input_dim == 0 || self.expansion_dim == 0 => {
                fail(format!(
                    "classifier dims must be >= 1, got input {} expansion {}",
                    self.input_dim, self.expansion_dim
                ))
            }
            _ => Ok(()),
        }
    }

    /// Width of the representation an autoencoder hands to a classifier.
    pub fn latent_width(&self) -> usize {
        match self.kind {
            ModelKind::OursAe => self.input_dim,
            ModelKind::BasicAe => self.latent_dim,
            ModelKind::ExpansionClassifier => self.input_dim,
        }
    }

    pub fn layer_plan(&self) -> Result<LayerPlan> {
        use Activation::{LogSigmoid, None as Linear, Relu, Sigmoid};
        self.validate()?;
        let d = self.input_dim;
        let h = hidden_width(d);
        let plan = match self.kind {
            ModelKind::OursAe => LayerPlan {
                encoder: vec![
                    LayerDims::new(d, d, Relu),
                    LayerDims::new(d, h, Relu),
                    LayerDims::new(h, d, Linear),
                ],
                decoder: vec![
                    LayerDims::new(d, h, Relu),
                    LayerDims::new(h, d, Relu),
                    LayerDims::new(d, d, Sigmoid),
                ],
                head: vec![],
            },
            ModelKind::BasicAe => {
                let l = self.latent_dim;
                LayerPlan {
                    encoder: vec![LayerDims::new(d, h, Relu), LayerDims::new(h, l, Linear)],
                    decoder: vec![LayerDims::new(l, h, Relu), LayerDims::new(h, d, Sigmoid)],
                    head: vec![],
                }
            }
            ModelKind::ExpansionClassifier => {
                let mut expand = LayerDims::new(d, self.expansion_dim, Relu);
                expand.dropout_rate = self.dropout_rate;
                LayerPlan {
                    encoder: vec![],
                    decoder: vec![],
                    head: vec![expand, LayerDims::new(self.expansion_dim, 1, LogSigmoid)],
                }
            }
        };
        Ok(plan)
    }
}

/// Classifier output for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores<T = f64> {
    pub log_prob: Vec<T>,
    pub logit: Vec<T>,
}

impl<T: Scalar> Scores<T> {
    pub fn probability(&self) -> Vec<T> {
        self.log_prob.iter().map(|lp| lp.exp()).collect()
    }
}

/// Instantiated network.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f64> {
    spec: ModelSpec,
    encoder: Vec<DenseLayer<T>>,
    decoder: Vec<DenseLayer<T>>,
    head: Vec<DenseLayer<T>>,
}

fn run_stack<T: Scalar>(layers: &[DenseLayer<T>], x: &Matrix<T>) -> Result<Matrix<T>> {
    let mut cur = x.clone();
    for layer in layers {
        cur = layer.infer(&cur)?;
    }
    Ok(cur)
}

impl<T: Scalar> Model<T> {
    pub fn build(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        let plan = spec.layer_plan()?;
        let mut init = |dims: &[LayerDims]| -> Result<Vec<DenseLayer<T>>> {
            dims.iter()
                .map(|l| DenseLayer::init(l.fan_in, l.fan_out, l.activation, l.dropout_rate, rng))
                .collect()
        };
        let encoder = init(&plan.encoder)?;
        let decoder = init(&plan.decoder)?;
        let head = init(&plan.head)?;
        Ok(Self {
            spec,
            encoder,
            decoder,
            head,
        })
    }

    /// Assembles a model from explicit layers, checking them against the spec's plan.
    pub fn from_layers(
        spec: ModelSpec,
        encoder: Vec<DenseLayer<T>>,
        decoder: Vec<DenseLayer<T>>,
        head: Vec<DenseLayer<T>>,
    ) -> Result<Self> {
        let plan = spec.layer_plan()?;
        let check = |role: &str, want: &[LayerDims], got: &[DenseLayer<T>]| -> Result<()> {
            if want.len() != got.len() {
                return Err(Error::Validation(format!(
                    "{role}: expected {} layers, got {}",
                    want.len(),
                    got.len()
                )));
            }
            for (i, (w, g)) in want.iter().zip(got).enumerate() {
                if w.fan_in != g.fan_in()
                    || w.fan_out != g.fan_out()
                    || w.activation != g.activation()
                    || w.dropout_rate != g.dropout_rate()
                {
                    return Err(Error::Validation(format!(
                        "{role} layer {i}: expected {}x{} {:?} dropout {}, got {}x{} {:?} dropout {}",
                        w.fan_in,
                        w.fan_out,
                        w.activation,
                        w.dropout_rate,
                        g.fan_in(),
                        g.fan_out(),
                        g.activation(),
                        g.dropout_rate()
                    )));
                }
            }
            Ok(())
        };
        check("encoder", &plan.encoder, &encoder)?;
        check("decoder", &plan.decoder, &decoder)?;
        check("head", &plan.head, &head)?;
        Ok(Self {
            spec,
            encoder,
            decoder,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &[DenseLayer<T>] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer<T>] {
        &self.decoder
    }

    pub fn head(&self) -> &[DenseLayer<T>] {
        &self.head
    }

    /// All layers in forward order (encoder, decoder, head).
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer<T>> {
        self.encoder.iter().chain(&self.decoder).chain(&self.head)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer<T>> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(self.head.iter_mut())
    }

    /// Every parameter tensor in forward order: weights then bias for each layer.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in self.layers_mut() {
            let (w, b) = layer.params_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers()
            .flat_map(|l| [l.weights().len(), l.bias().len()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(DenseLayer::param_count).sum()
    }

    /// SHA-256 over the little-endian `f64` image of every parameter, hex encoded.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for layer in self.layers() {
            for &v in layer.weights().as_slice().iter().chain(layer.bias()) {
                hasher.update(v.to_f64_lossless().to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn require_autoencoder(&self, x: &Matrix<T>) -> Result<()> {
        if !self.spec.kind.is_autoencoder() {
            return Err(Error::Kind("expected an autoencoder, got the expansion classifier".into()));
        }
        if x.cols() != self.spec.input_dim {
            return Err(Error::dim(
                "encode",
                format!("{} feature columns", self.spec.input_dim),
                format!("{} columns", x.cols()),
            ));
        }
        Ok(())
    }

    /// Encoder-only eval-mode forward.
    pub fn encode(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.require_autoencoder(x)?;
        run_stack(&self.encoder, x)
    }

    /// Encoder then decoder, eval mode.
    pub fn reconstruct(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.require_autoencoder(x)?;
        let latent = run_stack(&self.encoder, x)?;
        run_stack(&self.decoder, &latent)
    }

    /// Eval-mode classifier forward. The logit is the pre-activation of the
    /// final unit; `log_prob = log σ(logit)`.
    pub fn classify(&self, latent: &Matrix<T>) -> Result<Scores<T>> {
        if self.spec.kind != ModelKind::ExpansionClassifier {
            return Err(Error::Kind("expected the expansion classifier, got an autoencoder".into()));
        }
        if latent.cols() != self.spec.input_dim {
            return Err(Error::dim(
                "classify",
                format!("{} latent columns", self.spec.input_dim),
                format!("{} columns", latent.cols()),
            ));
        }
        let (last, hidden) = self.head.split_last().expect("classifier has a head");
        let h = run_stack(hidden, latent)?;
        let logits = h.matmul(last.weights())?;
        let bias = last.bias()[0];
        let logit: Vec<T> = logits.as_slice().iter().map(|&z| z + bias).collect();
        if logit.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("classifier logit".into()));
        }
        let log_prob = logit.iter().map(|&z| Activation::LogSigmoid.apply(z)).collect();
        Ok(Scores { log_prob, logit })
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let conv = |layers: &[DenseLayer<T>]| -> Vec<DenseLayer<U>> {
            layers
                .iter()
                .map(|l| {
                    DenseLayer::new(
                        l.weights().cast(),
                        l.bias().iter().map(|b| U::lit(b.to_f64_lossless())).collect(),
                        l.activation(),
                        l.dropout_rate(),
                    )
                    .expect("cast preserves layer shape")
                })
                .collect()
        };
        Model {
            spec: self.spec,
            encoder: conv(&self.encoder),
            decoder: conv(&self.decoder),
            head: conv(&self.head),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(layers: &[LayerDims]) -> Vec<usize> {
        let mut dims = vec![layers[0].fan_in];
        dims.extend(layers.iter().map(|l| l.fan_out));
        dims
    }

    #[test]
    fn ours_ae_credit_card_width() {
        let plan = ModelSpec::ours_ae(30).layer_plan().unwrap();
        assert_eq!(chain(&plan.encoder), vec![30, 30, 15, 30]);
        assert_eq!(chain(&plan.decoder), vec![30, 15, 30, 30]);
        assert_eq!(plan.decoder.last().unwrap().activation, Activation::Sigmoid);
        assert_eq!(plan.encoder[2].activation, Activation::None);
    }

    #[test]
    fn ours_ae_minimal_width() {
        let plan = ModelSpec::ours_ae(2).layer_plan().unwrap();
        assert_eq!(chain(&plan.encoder), vec![2, 2, 1, 2]);
    }

    #[test]
    fn basic_ae_compresses() {
        let spec = ModelSpec::basic_ae(30);
        assert_eq!(spec.latent_width(), 8);
        let plan = spec.layer_plan().unwrap();
        assert_eq!(chain(&plan.encoder), vec![30, 15, 8]);
        assert_eq!(chain(&plan.decoder), vec![8, 15, 30]);
    }

    #[test]
    fn expansion_head_dims() {
        let plan = ModelSpec::expansion_classifier(30, 1024).layer_plan().unwrap();
        assert_eq!(chain(&plan.head), vec![30, 1024, 1]);
        assert_eq!(plan.head[0].dropout_rate, 0.5);
        assert_eq!(plan.head[1].activation, Activation::LogSigmoid);
    }

    #[test]
    fn invalid_specs() {
        assert!(ModelSpec::ours_ae(1).validate().is_err());
        let mut s = ModelSpec::ours_ae(10);
        s.latent_dim = 5;
        assert!(s.validate().is_err());
        assert!(ModelSpec::expansion_classifier(4, 0).validate().is_err());
        assert!(ModelSpec::basic_ae_with_latent(4, 0).validate().is_err());
    }

    #[test]
    fn encode_and_classify_kind_checks() {
        let mut rng = Rng::new(0);
        let ae = Model::<f64>::build(ModelSpec::ours_ae(4), &mut rng).unwrap();
        let clf = Model::<f64>::build(ModelSpec::expansion_classifier(4, 8), &mut rng).unwrap();
        let x = Matrix::filled(2, 4, 0.5);
        assert!(matches!(clf.encode(&x), Err(Error::Kind(_))));
        assert!(matches!(ae.classify(&x), Err(Error::Kind(_))));
        assert!(matches!(clf.classify(&Matrix::zeros(1, 3)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn empty_batch_encodes_to_empty_latent() {
        let ae = Model::<f64>::build(ModelSpec::ours_ae(6), &mut Rng::new(1)).unwrap();
        let latent = ae.encode(&Matrix::zeros(0, 6)).unwrap();
        assert_eq!(latent.shape(), (0, 6));
    }

    #[test]
    fn reconstruction_in_unit_interval() {
        let ae = Model::<f64>::build(ModelSpec::basic_ae(8), &mut Rng::new(2)).unwrap();
        let mut rng = Rng::new(3);
        let x = Matrix::from_vec(16, 8, (0..128).map(|_| rng.uniform()).collect()).unwrap();
        let xh = ae.reconstruct(&x).unwrap();
        assert_eq!(xh.shape(), x.shape());
        assert!(xh.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_logit_gives_log_half() {
        let mut clf = Model::<f64>::build(ModelSpec::expansion_classifier(3, 10), &mut Rng::new(4)).unwrap();
        for p in clf.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let s = clf.classify(&Matrix::filled(1, 3, 0.3)).unwrap();
        assert_eq!(s.logit[0], 0.0);
        assert!((s.log_prob[0] - 0.5f64.ln()).abs() < 1e-15);
    }
}
