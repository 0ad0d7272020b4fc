use super::{BitWord, FormatError};

/// B-bit two's complement. Bit k has place value 2^k except the top bit,
/// which carries -2^(B-1); the place values therefore sum to -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntFormat {
    bits: u8,
}

impl IntFormat {
    pub const MAX_BITS: u8 = 32;

    pub fn new(bits: u8) -> Result<Self, FormatError> {
        if bits == 0 || bits > Self::MAX_BITS {
            return Err(FormatError::InvalidIntWidth { bits });
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn min_value(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max_value(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Signed place value of each bit position, index 0 first.
    pub fn place_values(&self) -> Vec<i64> {
        (0..self.bits)
            .map(|k| {
                if k == self.bits - 1 {
                    -(1i64 << k)
                } else {
                    1i64 << k
                }
            })
            .collect()
    }

    pub fn encode(&self, value: i64) -> Result<BitWord, FormatError> {
        if value < self.min_value() || value > self.max_value() {
            return Err(FormatError::IntOutOfRange {
                value,
                min: self.min_value(),
                max: self.max_value(),
            });
        }
        let mask = if self.bits == 64 { u64::MAX } else { (1u64 << self.bits) - 1 };
        BitWord::new((value as u64) & mask, self.bits)
    }

    pub fn decode(&self, word: &BitWord) -> Result<i64, FormatError> {
        if word.width() != self.bits {
            return Err(FormatError::WidthMismatch {
                expected: self.bits,
                got: word.width(),
            });
        }
        let mut value = 0i64;
        for (k, v) in self.place_values().into_iter().enumerate() {
            if word.bit(k as u8) {
                value += v;
            }
        }
        Ok(value)
    }
}

/// 1-bit weight decode: 0 maps to -1 and 1 maps to +1, i.e. 2b - 1.
pub fn decode_binary(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn place_values_match_identities() {
        // sum V_k = -1, sum V_k^2 = (4^B - 1) / 3
        for b in 1..=16u8 {
            let fmt = IntFormat::new(b).unwrap();
            let vals = fmt.place_values();
            assert_eq!(vals.len(), usize::from(b));
            let sum: i64 = vals.iter().sum();
            assert_eq!(sum, -1, "B={b}");
            let sumsq: i128 = vals.iter().map(|&v| i128::from(v) * i128::from(v)).sum();
            assert_eq!(sumsq, (4i128.pow(u32::from(b)) - 1) / 3, "B={b}");
        }
    }

    #[test]
    fn spec_place_value_examples() {
        assert_eq!(IntFormat::new(2).unwrap().place_values(), vec![1, -2]);
        assert_eq!(IntFormat::new(1).unwrap().place_values(), vec![-1]);
        assert_eq!(IntFormat::new(3).unwrap().place_values(), vec![1, 2, -4]);
    }

    #[test]
    fn encode_examples() {
        let b3 = IntFormat::new(3).unwrap();
        assert_eq!(b3.encode(-1).unwrap().to_bit_string(), "111");
        let b2 = IntFormat::new(2).unwrap();
        assert_eq!(b2.encode(0).unwrap().to_bit_string(), "00");
        assert_eq!(b2.encode(-2).unwrap().to_bit_string(), "10");
    }

    #[test]
    fn decode_examples() {
        let b3 = IntFormat::new(3).unwrap();
        assert_eq!(b3.decode(&BitWord::from_bit_string("111").unwrap()).unwrap(), -1);
        let b2 = IntFormat::new(2).unwrap();
        assert_eq!(b2.decode(&BitWord::from_bit_string("01").unwrap()).unwrap(), 1);
        assert_eq!(b2.decode(&BitWord::from_bit_string("10").unwrap()).unwrap(), -2);
    }

    #[test]
    fn decode_two_bit_exhaustive() {
        // All four 2-bit patterns, against the place-value sum by hand.
        let fmt = IntFormat::new(2).unwrap();
        let expect = [0i64, 1, -2, -1];
        for bits in 0..4u64 {
            let w = BitWord::new(bits, 2).unwrap();
            assert_eq!(fmt.decode(&w).unwrap(), expect[bits as usize]);
        }
    }

    #[test]
    fn round_trip_exhaustive_small_widths() {
        for b in 1..=8u8 {
            let fmt = IntFormat::new(b).unwrap();
            for value in fmt.min_value()..=fmt.max_value() {
                let word = fmt.encode(value).unwrap();
                assert_eq!(fmt.decode(&word).unwrap(), value);
            }
        }
    }

    #[test]
    fn out_of_range_reports_interval() {
        let fmt = IntFormat::new(2).unwrap();
        let err = fmt.encode(2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("-2") && msg.contains("1"), "{msg}");
    }

    #[test]
    fn binary_decode_identity() {
        assert_eq!(decode_binary(false), -1.0);
        assert_eq!(decode_binary(true), 1.0);
        for b in [false, true] {
            let v = if b { 1.0 } else { 0.0 };
            assert_eq!(decode_binary(b), 2.0 * v - 1.0);
            assert_eq!(decode_binary(!b), -decode_binary(b));
        }
    }
}
