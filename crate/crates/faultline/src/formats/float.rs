use super::{BitWord, FormatError};

/// How the exponent field's boundary patterns decode.
///
/// `IeeeLike` follows the standard conventions: an all-ones exponent encodes
/// infinities and NaNs, a zero exponent encodes subnormals (implicit leading
/// zero, exponent 1 - bias).
///
/// `Extended` decodes every pattern in pure normal form, implicit leading one
/// and exponent e - bias for all e, so each of the 2^(1+E+M) patterns is a
/// finite real. This is the semantics under which the per-field moment
/// products (sign x mantissa x exponent) hold exactly, since those products
/// range over every exponent pattern as a finite power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialsMode {
    IeeeLike,
    Extended,
}

/// Decoded float outcome. Specials only arise in `IeeeLike` mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FloatValue {
    Finite(f64),
    PosInf,
    NegInf,
    Nan,
}

impl FloatValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, FloatValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            FloatValue::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            FloatValue::Finite(v) => *v,
            FloatValue::PosInf => f64::INFINITY,
            FloatValue::NegInf => f64::NEG_INFINITY,
            FloatValue::Nan => f64::NAN,
        }
    }
}

/// Sign/exponent/mantissa format: one sign bit, E exponent bits with an
/// explicit bias, M mantissa bits. Stored layout is mantissa in the low bits,
/// then exponent, then sign, so mantissa fraction bit f_k (k = 1 most
/// significant) sits at index M - k and exponent bit b_j at index M + j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatFormat {
    exponent_bits: u8,
    mantissa_bits: u8,
    bias: i32,
    specials: SpecialsMode,
}

pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

impl FloatFormat {
    pub const MAX_EXPONENT_BITS: u8 = 8;
    pub const MAX_MANTISSA_BITS: u8 = 52;
    pub const MAX_BIAS_MAGNITUDE: i32 = 300;

    pub fn new(
        exponent_bits: u8,
        mantissa_bits: u8,
        bias: i32,
        specials: SpecialsMode,
    ) -> Result<Self, FormatError> {
        if exponent_bits == 0
            || exponent_bits > Self::MAX_EXPONENT_BITS
            || mantissa_bits > Self::MAX_MANTISSA_BITS
            || bias.abs() > Self::MAX_BIAS_MAGNITUDE
        {
            return Err(FormatError::InvalidFloatFormat {
                exponent_bits,
                mantissa_bits,
                bias,
            });
        }
        Ok(Self { exponent_bits, mantissa_bits, bias, specials })
    }

    /// Standard bias 2^(E-1) - 1 with IEEE-like specials.
    pub fn ieee(exponent_bits: u8, mantissa_bits: u8) -> Result<Self, FormatError> {
        let bias = (1i32 << (exponent_bits - 1)) - 1;
        Self::new(exponent_bits, mantissa_bits, bias, SpecialsMode::IeeeLike)
    }

    /// Standard bias with every-pattern-finite decoding.
    pub fn extended(exponent_bits: u8, mantissa_bits: u8) -> Result<Self, FormatError> {
        let bias = (1i32 << (exponent_bits - 1)) - 1;
        Self::new(exponent_bits, mantissa_bits, bias, SpecialsMode::Extended)
    }

    pub fn fp32() -> Self {
        Self::ieee(8, 23).unwrap()
    }

    pub fn fp16() -> Self {
        Self::ieee(5, 10).unwrap()
    }

    pub fn fp8() -> Self {
        Self::ieee(4, 3).unwrap()
    }

    pub fn exponent_bits(&self) -> u8 {
        self.exponent_bits
    }

    pub fn mantissa_bits(&self) -> u8 {
        self.mantissa_bits
    }

    pub fn bias(&self) -> i32 {
        self.bias
    }

    pub fn specials(&self) -> SpecialsMode {
        self.specials
    }

    pub fn with_specials(&self, specials: SpecialsMode) -> Self {
        Self { specials, ..*self }
    }

    pub fn width(&self) -> u8 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    fn exponent_field_all_ones(&self) -> u64 {
        (1u64 << self.exponent_bits) - 1
    }

    /// Largest exponent field that decodes to a finite value.
    fn max_finite_exponent_field(&self) -> u64 {
        match self.specials {
            SpecialsMode::IeeeLike => self.exponent_field_all_ones() - 1,
            SpecialsMode::Extended => self.exponent_field_all_ones(),
        }
    }

    pub fn max_finite(&self) -> f64 {
        let e = self.max_finite_exponent_field() as i32;
        (2.0 - pow2(-i32::from(self.mantissa_bits))) * pow2(e - self.bias)
    }

    /// Smallest strictly positive representable magnitude.
    pub fn smallest_positive(&self) -> f64 {
        match self.specials {
            // Smallest subnormal: f = 1 at exponent 1 - bias.
            SpecialsMode::IeeeLike => {
                pow2(-i32::from(self.mantissa_bits)) * pow2(1 - self.bias)
            }
            // All-zero exponent and mantissa still carry the implicit one.
            SpecialsMode::Extended => pow2(-self.bias),
        }
    }

    fn split(&self, word: &BitWord) -> (bool, u64, u64) {
        let m = self.mantissa_bits;
        let e = self.exponent_bits;
        let bits = word.bits();
        let mantissa = bits & ((1u64 << m) - 1);
        let exponent = (bits >> m) & ((1u64 << e) - 1);
        let sign = (bits >> (m + e)) & 1 == 1;
        (sign, exponent, mantissa)
    }

    fn assemble(&self, sign: bool, exponent: u64, mantissa: u64) -> BitWord {
        let m = self.mantissa_bits;
        let e = self.exponent_bits;
        let bits = mantissa | (exponent << m) | ((sign as u64) << (m + e));
        BitWord::new(bits, self.width()).expect("fields fit format width")
    }

    pub fn decode(&self, word: &BitWord) -> Result<FloatValue, FormatError> {
        if word.width() != self.width() {
            return Err(FormatError::WidthMismatch {
                expected: self.width(),
                got: word.width(),
            });
        }
        let (sign, exponent, mantissa) = self.split(word);
        let sgn = if sign { -1.0 } else { 1.0 };
        let frac = mantissa as f64 * pow2(-i32::from(self.mantissa_bits));
        match self.specials {
            SpecialsMode::Extended => {
                Ok(FloatValue::Finite(sgn * (1.0 + frac) * pow2(exponent as i32 - self.bias)))
            }
            SpecialsMode::IeeeLike => {
                if exponent == self.exponent_field_all_ones() {
                    if mantissa == 0 {
                        Ok(if sign { FloatValue::NegInf } else { FloatValue::PosInf })
                    } else {
                        Ok(FloatValue::Nan)
                    }
                } else if exponent == 0 {
                    Ok(FloatValue::Finite(sgn * frac * pow2(1 - self.bias)))
                } else {
                    Ok(FloatValue::Finite(sgn * (1.0 + frac) * pow2(exponent as i32 - self.bias)))
                }
            }
        }
    }

    /// Round-to-nearest-even encoding of a finite value. Magnitudes beyond
    /// the largest finite saturate to it instead of producing a special, so
    /// a clean encoded network never stores Inf/NaN patterns.
    pub fn encode(&self, value: f64) -> Result<BitWord, FormatError> {
        if !value.is_finite() {
            return Err(FormatError::NonFiniteEncode { value });
        }
        let sign = value.is_sign_negative();
        let mag = value.abs();
        let m = i32::from(self.mantissa_bits);
        let one = 1u64 << self.mantissa_bits;
        let e_max_field = self.max_finite_exponent_field();
        let e_max_unb = e_max_field as i32 - self.bias;

        if mag == 0.0 {
            // IEEE-like: exact zero. Extended: all-zero fields are already
            // the closest representable magnitude to zero.
            return Ok(self.assemble(sign, 0, 0));
        }
        if mag >= self.max_finite() {
            return Ok(self.assemble(sign, e_max_field, one - 1));
        }

        let min_norm_unb = match self.specials {
            SpecialsMode::IeeeLike => 1 - self.bias,
            SpecialsMode::Extended => -self.bias,
        };

        if mag < pow2(min_norm_unb) {
            match self.specials {
                SpecialsMode::IeeeLike => {
                    // Subnormal grid with spacing 2^(1 - bias - M). Scaling by
                    // a power of two is exact, so ties are decided correctly.
                    let scaled = mag * pow2(self.bias - 1 + m);
                    let f = scaled.round_ties_even() as u64;
                    return Ok(if f == one {
                        self.assemble(sign, 1, 0)
                    } else {
                        self.assemble(sign, 0, f)
                    });
                }
                SpecialsMode::Extended => {
                    // Nothing representable below 2^(-bias).
                    return Ok(self.assemble(sign, 0, 0));
                }
            }
        }

        // Normal range: mag = m' * 2^t with m' in [1, 2).
        let mut t = floor_log2(mag);
        let mantissa = mag * pow2(-t);
        debug_assert!((1.0..2.0).contains(&mantissa));
        let mut f = ((mantissa - 1.0) * pow2(m)).round_ties_even() as u64;
        if f == one {
            f = 0;
            t += 1;
            if t > e_max_unb {
                return Ok(self.assemble(sign, e_max_field, one - 1));
            }
        }
        Ok(self.assemble(sign, (t + self.bias) as u64, f))
    }
}

/// floor(log2(x)) for finite positive x, exact via bit inspection.
fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    if raw_exp != 0 {
        raw_exp - 1023
    } else {
        // Subnormal f64 input: normalize up and recurse once.
        floor_log2(x * pow2(200)) - 200
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(fmt: &FloatFormat, sign: u64, exp: u64, frac: u64) -> BitWord {
        let m = fmt.mantissa_bits();
        let e = fmt.exponent_bits();
        BitWord::new(frac | (exp << m) | (sign << (m + e)), fmt.width()).unwrap()
    }

    #[test]
    fn unit_decodes_to_one() {
        for fmt in [FloatFormat::fp32(), FloatFormat::fp16(), FloatFormat::fp8()] {
            let w = word(&fmt, 0, fmt.bias() as u64, 0);
            assert_eq!(fmt.decode(&w).unwrap(), FloatValue::Finite(1.0));
        }
    }

    #[test]
    fn spec_small_format_decode() {
        // E=2, M=1, bias=1; s=0, e=01, f=1 -> 1.5
        let fmt = FloatFormat::new(2, 1, 1, SpecialsMode::Extended).unwrap();
        let w = word(&fmt, 0, 1, 1);
        assert_eq!(fmt.decode(&w).unwrap(), FloatValue::Finite(1.5));
        // Cross-check every pattern of this format against the formula.
        for bits in 0..16u64 {
            let w = BitWord::new(bits, 4).unwrap();
            let (s, e, f) = (bits >> 3 & 1, bits >> 1 & 3, bits & 1);
            let expect = if s == 1 { -1.0 } else { 1.0 }
                * (1.0 + f as f64 * 0.5)
                * pow2(e as i32 - 1);
            assert_eq!(fmt.decode(&w).unwrap(), FloatValue::Finite(expect));
        }
    }

    #[test]
    fn ieee_specials() {
        let fmt = FloatFormat::fp8();
        let all_ones = (1u64 << fmt.exponent_bits()) - 1;
        assert_eq!(fmt.decode(&word(&fmt, 0, all_ones, 0)).unwrap(), FloatValue::PosInf);
        assert_eq!(fmt.decode(&word(&fmt, 1, all_ones, 0)).unwrap(), FloatValue::NegInf);
        assert_eq!(fmt.decode(&word(&fmt, 0, all_ones, 1)).unwrap(), FloatValue::Nan);
    }

    #[test]
    fn ieee_subnormals() {
        let fmt = FloatFormat::fp8(); // bias 7
        // e=0, f=1 -> (1/8) * 2^(1-7)
        let v = fmt.decode(&word(&fmt, 0, 0, 1)).unwrap().finite().unwrap();
        assert_eq!(v, 0.125 * pow2(-6));
        // e=0, f=0 -> exact zero
        assert_eq!(fmt.decode(&word(&fmt, 0, 0, 0)).unwrap(), FloatValue::Finite(0.0));
    }

    #[test]
    fn extended_mode_all_patterns_finite() {
        let fmt = FloatFormat::extended(3, 2).unwrap();
        for bits in 0..(1u64 << fmt.width()) {
            let w = BitWord::new(bits, fmt.width()).unwrap();
            assert!(fmt.decode(&w).unwrap().is_finite());
        }
    }

    #[test]
    fn encode_round_trips_exact_values() {
        for fmt in [
            FloatFormat::fp32(),
            FloatFormat::fp16(),
            FloatFormat::fp8(),
            FloatFormat::extended(3, 2).unwrap(),
        ] {
            for v in [1.0, -1.0, 1.5, 0.75, -2.5] {
                let w = fmt.encode(v).unwrap();
                assert_eq!(fmt.decode(&w).unwrap(), FloatValue::Finite(v), "{fmt:?} {v}");
            }
        }
    }

    #[test]
    fn encode_zero_is_all_zero_word() {
        for fmt in [FloatFormat::fp32(), FloatFormat::extended(2, 2).unwrap()] {
            assert_eq!(fmt.encode(0.0).unwrap().bits(), 0);
        }
    }

    #[test]
    fn encode_saturates_instead_of_inf() {
        let fmt = FloatFormat::fp8();
        let w = fmt.encode(1e30).unwrap();
        let v = fmt.decode(&w).unwrap().finite().unwrap();
        assert_eq!(v, fmt.max_finite());
        let w = fmt.encode(-1e30).unwrap();
        assert_eq!(fmt.decode(&w).unwrap().finite().unwrap(), -fmt.max_finite());
    }

    #[test]
    fn encode_rejects_non_finite() {
        let fmt = FloatFormat::fp8();
        assert!(fmt.encode(f64::NAN).is_err());
        assert!(fmt.encode(f64::INFINITY).is_err());
    }

    /// Exhaustive nearest-value search over every pattern of a small format;
    /// the encoder must agree, with ties resolved to the even mantissa.
    #[test]
    fn encode_matches_exhaustive_nearest_search() {
        for fmt in [
            FloatFormat::ieee(2, 2).unwrap(),
            FloatFormat::extended(2, 2).unwrap(),
            FloatFormat::ieee(3, 2).unwrap(),
            FloatFormat::extended(3, 1).unwrap(),
        ] {
            // Collect (value, word) for all finite patterns.
            let mut table: Vec<(f64, BitWord)> = Vec::new();
            for bits in 0..(1u64 << fmt.width()) {
                let w = BitWord::new(bits, fmt.width()).unwrap();
                if let FloatValue::Finite(v) = fmt.decode(&w).unwrap() {
                    table.push((v, w));
                }
            }
            // Probe representable points, midpoints, and off-grid values.
            let mut probes: Vec<f64> = table.iter().map(|&(v, _)| v).collect();
            let mut sorted: Vec<f64> = probes.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            for pair in sorted.windows(2) {
                probes.push((pair[0] + pair[1]) / 2.0);
                probes.push(pair[0] + (pair[1] - pair[0]) * 0.3);
            }
            for &x in &probes {
                let got = fmt.encode(x).unwrap();
                let got_v = fmt.decode(&got).unwrap().to_f64();
                let best = table
                    .iter()
                    .map(|&(v, _)| (v - x).abs())
                    .fold(f64::INFINITY, f64::min);
                let dist = (got_v - x).abs();
                assert!(
                    dist <= best,
                    "{fmt:?}: encode({x}) -> {got_v}, nearest dist {best}"
                );
                if dist == best {
                    // If tied with another representable, mantissa must be even.
                    let tied: Vec<&(f64, BitWord)> = table
                        .iter()
                        .filter(|&&(v, _)| (v - x).abs() == best && v != got_v)
                        .collect();
                    if !tied.is_empty() {
                        assert_eq!(got.bits() & 1, 0, "{fmt:?}: tie at {x} not broken to even");
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_exhaustive_extended_small() {
        // decode then encode is the identity on every pattern for small
        // extended formats (each pattern is a distinct representable).
        for (e, m) in [(2u8, 2u8), (3, 2), (4, 3), (4, 4)] {
            let fmt = FloatFormat::extended(e, m).unwrap();
            for bits in 0..(1u64 << fmt.width()) {
                let w = BitWord::new(bits, fmt.width()).unwrap();
                let v = fmt.decode(&w).unwrap().finite().unwrap();
                let back = fmt.encode(v).unwrap();
                assert_eq!(back, w, "{fmt:?} pattern {bits:b} value {v}");
            }
        }
    }
}
