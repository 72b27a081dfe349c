//! Binary model checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! magic          4 bytes  "LVXM"
//! version        u32      1
//! kind           u8       0 = BasicAe, 1 = OursAe, 2 = ExpansionClassifier
//! input_dim      u32
//! latent_dim     u32
//! expansion_dim  u32
//! dropout_rate   f64
//! layer_count    u32
//! per layer, encoder then decoder then head:
//!   fan_in       u32
//!   fan_out      u32
//!   activation   u8       0 = None, 1 = ReLU, 2 = Sigmoid, 3 = LogSigmoid
//!   dropout_rate f64
//!   weights      fan_in × fan_out f64, row-major
//!   bias         fan_out f64
//! ```
//!
//! Parameters are always stored as `f64`; `f32` models widen exactly on save.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelSpec};
use crate::nn::{Activation, DenseLayer, Matrix};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LVXM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_model<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::with_capacity(64 + model.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(spec.kind.code());
    for dim in [spec.input_dim, spec.latent_dim, spec.expansion_dim] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&spec.dropout_rate.to_le_bytes());
    out.extend_from_slice(&(model.layers().count() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
        out.push(layer.activation().code());
        out.extend_from_slice(&layer.dropout_rate().to_le_bytes());
        for &v in layer.weights().as_slice().iter().chain(layer.bias()) {
            out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!(
                "truncated checkpoint: need {n} bytes for {what} at offset {}, {} available",
                self.pos,
                self.buf.len() - self.pos
            ))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"LVXM\"")));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let kind_code = r.u8("kind")?;
    let kind = ModelKind::from_code(kind_code)
        .ok_or_else(|| Error::Format(format!("unknown model kind {kind_code}")))?;
    let spec = ModelSpec {
        kind,
        input_dim: r.u32("input_dim")? as usize,
        latent_dim: r.u32("latent_dim")? as usize,
        expansion_dim: r.u32("expansion_dim")? as usize,
        dropout_rate: r.f64("dropout_rate")?,
    };
    let plan = spec
        .layer_plan()
        .map_err(|e| Error::Format(format!("invalid model spec: {e}")))?;
    let count = r.u32("layer_count")? as usize;
    let expected = plan.all().count();
    if count != expected {
        return Err(Error::Format(format!("layer count {count}, spec implies {expected}")));
    }

    let mut layers = Vec::with_capacity(count);
    for (i, dims) in plan.all().enumerate() {
        let fan_in = r.u32("fan_in")? as usize;
        let fan_out = r.u32("fan_out")? as usize;
        let act_code = r.u8("activation")?;
        let activation = Activation::from_code(act_code)
            .ok_or_else(|| Error::Format(format!("layer {i}: unknown activation {act_code}")))?;
        let dropout = r.f64("dropout")?;
        if (fan_in, fan_out, activation) != (dims.fan_in, dims.fan_out, dims.activation)
            || dropout.to_bits() != dims.dropout_rate.to_bits()
        {
            return Err(Error::Format(format!(
                "layer {i}: header {fan_in}x{fan_out} {activation:?} dropout {dropout} does not match spec"
            )));
        }
        let raw = r.take(fan_in * fan_out * 8, "weights")?;
        let weights: Vec<T> = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let raw = r.take(fan_out * 8, "bias")?;
        let bias: Vec<T> = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let layer = DenseLayer::new(Matrix::from_vec(fan_in, fan_out, weights)?, bias, activation, dropout)
            .map_err(|e| Error::Format(format!("layer {i}: {e}")))?;
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last layer",
            bytes.len() - r.pos
        )));
    }

    let head = layers.split_off(plan.encoder.len() + plan.decoder.len());
    let decoder = layers.split_off(plan.encoder.len());
    Model::from_layers(spec, layers, decoder, head)
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn models() -> Vec<Model<f64>> {
        let mut rng = Rng::new(21);
        vec![
            Model::build(ModelSpec::ours_ae(5), &mut rng).unwrap(),
            Model::build(ModelSpec::basic_ae(9), &mut rng).unwrap(),
            Model::build(ModelSpec::expansion_classifier(3, 16), &mut rng).unwrap(),
        ]
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for m in models() {
            let bytes = encode_model(&m);
            let back: Model<f64> = decode_model(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back), bytes);
        }
    }

    #[test]
    fn f32_models_round_trip() {
        let m: Model<f32> = Model::build(ModelSpec::ours_ae(4), &mut Rng::new(1)).unwrap();
        let back: Model<f32> = decode_model(&encode_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn header_layout() {
        let m = &models()[2];
        let bytes = encode_model(m);
        assert_eq!(&bytes[0..4], b"LVXM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(bytes[8], 2);
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(bytes[21..29].try_into().unwrap()), 0.5);
        assert_eq!(u32::from_le_bytes(bytes[29..33].try_into().unwrap()), 2);
        // 33 header bytes + 2 layers × 17 header bytes + (3·16 + 16 + 16 + 1) f64
        assert_eq!(bytes.len(), 33 + 2 * 17 + (48 + 16 + 16 + 1) * 8);
    }

    #[test]
    fn corruption_is_rejected() {
        let bytes = encode_model(&models()[0]);
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(decode_model::<f64>(truncated), Err(Error::Format(_))));

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_model::<f64>(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        let err = decode_model::<f64>(&bad_version).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");

        let mut trailing = bytes;
        trailing.push(0);
        assert!(matches!(decode_model::<f64>(&trailing), Err(Error::Format(_))));
    }
}
