//! Desk-scale model production: a plain gradient-descent MLP trainer with
//! post-training quantization, binarization, and magnitude pruning, plus a
//! greedy bit-flip trainer for LUT networks.
//!
//! Every trainer is a pure function of (dataset, config, seed); repeated
//! runs produce bit-identical networks.

mod lut;
mod mlp;

pub use lut::{train_lut, LutTrainConfig, LutTrainReport};
pub use mlp::{train_mlp, LatentLayer, LatentMlp};

pub use crate::dataset::{load_delimited, make_synthetic, Dataset, SyntheticKind};

use thiserror::Error;

use crate::formats::{FloatFormat, FormatError};
use crate::netsim::{Activation, NetError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("bad training configuration: {message}")]
    BadConfig { message: String },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: u32, loss: f64 },
}

pub(crate) fn bad_config(message: impl Into<String>) -> TrainError {
    TrainError::BadConfig { message: message.into() }
}

/// Storage format the trained weights are materialized into.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetFormat {
    Float(FloatFormat),
    /// Layer-wise affine quantization: integer weights, integer zero point,
    /// float scale.
    AffineInt {
        weight_bits: u8,
        zero_bits: u8,
        scale_fmt: FloatFormat,
    },
    Binary,
}

impl TargetFormat {
    pub fn aq_int8() -> Self {
        TargetFormat::AffineInt { weight_bits: 8, zero_bits: 8, scale_fmt: FloatFormat::fp16() }
    }

    /// Friendly names: fp32, fp16, fp8 (optionally with `-ext`), bnn,
    /// aq-int<N>, or a full float tag `float:E:M:bias:<ieee|ext>`.
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "fp32" => return Some(TargetFormat::Float(FloatFormat::fp32())),
            "fp16" => return Some(TargetFormat::Float(FloatFormat::fp16())),
            "fp8" => return Some(TargetFormat::Float(FloatFormat::fp8())),
            "fp32-ext" => {
                return Some(TargetFormat::Float(FloatFormat::extended(8, 23).unwrap()))
            }
            "fp16-ext" => {
                return Some(TargetFormat::Float(FloatFormat::extended(5, 10).unwrap()))
            }
            "fp8-ext" => return Some(TargetFormat::Float(FloatFormat::extended(4, 3).unwrap())),
            "bnn" => return Some(TargetFormat::Binary),
            "aq-int8" => return Some(TargetFormat::aq_int8()),
            _ => {}
        }
        if let Some(bits) = text.strip_prefix("aq-int") {
            let weight_bits: u8 = bits.parse().ok()?;
            if (1..=16).contains(&weight_bits) {
                return Some(TargetFormat::AffineInt {
                    weight_bits,
                    zero_bits: 8,
                    scale_fmt: FloatFormat::fp16(),
                });
            }
            return None;
        }
        if let Some(rest) = text.strip_prefix("float:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if let [e, m, bias, mode] = parts.as_slice() {
                let mode = match *mode {
                    "ieee" => crate::formats::SpecialsMode::IeeeLike,
                    "ext" => crate::formats::SpecialsMode::Extended,
                    _ => return None,
                };
                return FloatFormat::new(
                    e.parse().ok()?,
                    m.parse().ok()?,
                    bias.parse().ok()?,
                    mode,
                )
                .ok()
                .map(TargetFormat::Float);
            }
        }
        None
    }

    pub fn label(&self) -> String {
        match self {
            TargetFormat::Float(f) => format!("fp{}", f.width()),
            TargetFormat::AffineInt { weight_bits, .. } => format!("aq-int{weight_bits}"),
            TargetFormat::Binary => "bnn".into(),
        }
    }
}

/// MLP training configuration. `depth` counts hidden layers; a readout layer
/// with identity activation is always appended. Sign activations train
/// through a tanh surrogate and are swapped back in the stored network.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub epochs: u32,
    pub learning_rate: f64,
    pub seed: u64,
    pub target: TargetFormat,
    pub sparsity: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            width: 32,
            depth: 2,
            activation: Activation::Relu,
            epochs: 600,
            learning_rate: 0.3,
            seed: 0,
            target: TargetFormat::Float(FloatFormat::fp32()),
            sparsity: 0.0,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<(), TrainError> {
        if self.width == 0 {
            return Err(bad_config("width must be at least 1"));
        }
        if self.depth == 0 {
            return Err(bad_config("depth must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(bad_config("sparsity must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad_config("learning rate must be positive"));
        }
        Ok(())
    }
}
