//! Bit-exact encode/decode for every stored-parameter representation the
//! simulator corrupts: two's complement integers, sign/exponent/mantissa
//! floats (with selectable boundary-pattern semantics), single-bit binary
//! weights, affine-quantized layers, and LUT truth tables.
//!
//! Everything here is a pure function over immutable values.

mod float;
mod int;
mod word;

pub use float::{pow2, FloatFormat, FloatValue, SpecialsMode};
pub use int::{decode_binary, IntFormat};
pub use word::BitWord;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("word width {width} outside 1..=64")]
    InvalidWidth { width: u8 },
    #[error("bits {bits:#x} do not fit in width {width}")]
    BitsExceedWidth { bits: u64, width: u8 },
    #[error("integer width {bits} outside 1..=32")]
    InvalidIntWidth { bits: u8 },
    #[error("value {value} not representable; interval is [{min}, {max}]")]
    IntOutOfRange { value: i64, min: i64, max: i64 },
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: u8, got: u8 },
    #[error("float format E={exponent_bits} M={mantissa_bits} bias={bias} out of supported range")]
    InvalidFloatFormat { exponent_bits: u8, mantissa_bits: u8, bias: i32 },
    #[error("cannot encode non-finite value {value}")]
    NonFiniteEncode { value: f64 },
    #[error("LUT fan-in {k} outside 1..=6")]
    InvalidFanIn { k: u8 },
    #[error("LUT table width {got} does not equal 2^{k}")]
    LutWidthMismatch { k: u8, got: u8 },
    #[error("address {address} out of range for fan-in {k}")]
    AddressOutOfRange { address: usize, k: u8 },
    #[error("decoded scale {value} is not finite and strictly positive")]
    InvalidScale { value: f64 },
    #[error("bad hex payload: {text}")]
    BadHex { text: String },
}

/// Tag describing how a single stored word decodes to a real value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericFormat {
    Int(IntFormat),
    Float(FloatFormat),
    /// One bit per weight, decoding 0 -> -1 and 1 -> +1.
    Binary,
}

impl NumericFormat {
    pub fn width(&self) -> u8 {
        match self {
            NumericFormat::Int(f) => f.bits(),
            NumericFormat::Float(f) => f.width(),
            NumericFormat::Binary => 1,
        }
    }

    pub fn decode(&self, word: &BitWord) -> Result<FloatValue, FormatError> {
        match self {
            NumericFormat::Int(f) => Ok(FloatValue::Finite(f.decode(word)? as f64)),
            NumericFormat::Float(f) => f.decode(word),
            NumericFormat::Binary => {
                if word.width() != 1 {
                    return Err(FormatError::WidthMismatch { expected: 1, got: word.width() });
                }
                Ok(FloatValue::Finite(decode_binary(word.bit(0))))
            }
        }
    }
}

/// Truth table of a K-input LUT neuron, stored as one 2^K-bit word.
/// Fan-in is capped at 6 so the table fits a single `BitWord`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LutTable {
    fan_in: u8,
    entries: BitWord,
}

impl LutTable {
    pub const MAX_FAN_IN: u8 = 6;

    pub fn new(fan_in: u8, entries: BitWord) -> Result<Self, FormatError> {
        if fan_in == 0 || fan_in > Self::MAX_FAN_IN {
            return Err(FormatError::InvalidFanIn { k: fan_in });
        }
        let expected = 1u8 << fan_in;
        if entries.width() != expected {
            return Err(FormatError::LutWidthMismatch { k: fan_in, got: entries.width() });
        }
        Ok(Self { fan_in, entries })
    }

    pub fn zeros(fan_in: u8) -> Result<Self, FormatError> {
        let entries = BitWord::zero(1 << fan_in)?;
        Self::new(fan_in, entries)
    }

    pub fn fan_in(&self) -> u8 {
        self.fan_in
    }

    /// Number of stored entries, 2^K.
    pub fn len(&self) -> usize {
        1 << self.fan_in
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &BitWord {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut BitWord {
        &mut self.entries
    }

    pub fn get(&self, address: usize) -> Result<bool, FormatError> {
        if address >= self.len() {
            return Err(FormatError::AddressOutOfRange { address, k: self.fan_in });
        }
        Ok(self.entries.bit(address as u8))
    }

    pub fn set(&mut self, address: usize, value: bool) -> Result<(), FormatError> {
        if address >= self.len() {
            return Err(FormatError::AddressOutOfRange { address, k: self.fan_in });
        }
        self.entries.set_bit(address as u8, value);
        Ok(())
    }

    /// Bitwise complement of every entry.
    pub fn complemented(&self) -> Self {
        Self { fan_in: self.fan_in, entries: self.entries.complement() }
    }
}

/// Layer-shared affine quantization parameters: a float scale word, an
/// integer zero-point word, and the integer format of the stored weights.
/// Reconstruction is w_hat = S * (q - Z).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineQuantLayerParams {
    scale_word: BitWord,
    scale_fmt: FloatFormat,
    zero_word: BitWord,
    zero_fmt: IntFormat,
    weight_fmt: IntFormat,
}

impl AffineQuantLayerParams {
    pub fn new(
        scale_word: BitWord,
        scale_fmt: FloatFormat,
        zero_word: BitWord,
        zero_fmt: IntFormat,
        weight_fmt: IntFormat,
    ) -> Result<Self, FormatError> {
        if scale_word.width() != scale_fmt.width() {
            return Err(FormatError::WidthMismatch {
                expected: scale_fmt.width(),
                got: scale_word.width(),
            });
        }
        if zero_word.width() != zero_fmt.bits() {
            return Err(FormatError::WidthMismatch {
                expected: zero_fmt.bits(),
                got: zero_word.width(),
            });
        }
        let scale = scale_fmt.decode(&scale_word)?.to_f64();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(FormatError::InvalidScale { value: scale });
        }
        Ok(Self { scale_word, scale_fmt, zero_word, zero_fmt, weight_fmt })
    }

    pub fn scale_word(&self) -> &BitWord {
        &self.scale_word
    }

    pub fn scale_fmt(&self) -> &FloatFormat {
        &self.scale_fmt
    }

    pub fn zero_word(&self) -> &BitWord {
        &self.zero_word
    }

    pub fn zero_fmt(&self) -> &IntFormat {
        &self.zero_fmt
    }

    pub fn weight_fmt(&self) -> &IntFormat {
        &self.weight_fmt
    }

    /// Copy with replaced parameter words, skipping the clean-state scale
    /// validation: corrupted scale words may decode to anything.
    pub(crate) fn replace_words(&self, scale_word: BitWord, zero_word: BitWord) -> Self {
        debug_assert_eq!(scale_word.width(), self.scale_fmt.width());
        debug_assert_eq!(zero_word.width(), self.zero_fmt.bits());
        Self { scale_word, zero_word, ..self.clone() }
    }

    /// Decoded clean scale. Validated finite and positive at construction.
    pub fn scale(&self) -> f64 {
        self.scale_fmt.decode(&self.scale_word).expect("validated").to_f64()
    }

    /// Decoded clean zero point.
    pub fn zero_point(&self) -> i64 {
        self.zero_fmt.decode(&self.zero_word).expect("validated")
    }

    pub fn dequantize(&self, q: i64) -> f64 {
        self.scale() * (q - self.zero_point()) as f64
    }
}
