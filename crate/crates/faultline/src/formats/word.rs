use super::FormatError;

/// Raw parameter bits plus an explicit width. Bit index 0 is the least
/// significant bit; widths run from 1 to 64 so mask arithmetic stays exact
/// in a single `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitWord {
    bits: u64,
    width: u8,
}

impl BitWord {
    pub const MAX_WIDTH: u8 = 64;

    pub fn new(bits: u64, width: u8) -> Result<Self, FormatError> {
        if width == 0 || width > Self::MAX_WIDTH {
            return Err(FormatError::InvalidWidth { width });
        }
        if width < 64 && bits >> width != 0 {
            return Err(FormatError::BitsExceedWidth { bits, width });
        }
        Ok(Self { bits, width })
    }

    pub fn zero(width: u8) -> Result<Self, FormatError> {
        Self::new(0, width)
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Mask with ones in every position of this word's width.
    fn width_mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn bit(&self, index: u8) -> bool {
        debug_assert!(index < self.width);
        (self.bits >> index) & 1 == 1
    }

    pub fn set_bit(&mut self, index: u8, value: bool) {
        debug_assert!(index < self.width);
        if value {
            self.bits |= 1 << index;
        } else {
            self.bits &= !(1 << index);
        }
    }

    pub fn flip_bit(&mut self, index: u8) {
        debug_assert!(index < self.width);
        self.bits ^= 1 << index;
    }

    pub fn popcount(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: !self.bits & self.width_mask(),
            width: self.width,
        }
    }

    /// Bitwise XOR with an equal-width word.
    pub fn xor(&self, other: &Self) -> Result<Self, FormatError> {
        if self.width != other.width {
            return Err(FormatError::WidthMismatch {
                expected: self.width,
                got: other.width,
            });
        }
        Ok(Self {
            bits: self.bits ^ other.bits,
            width: self.width,
        })
    }

    /// Lowercase hex, zero-padded to the width's hex digit count.
    pub fn to_hex(&self) -> String {
        let digits = (usize::from(self.width) + 3) / 4;
        format!("{:0width$x}", self.bits, width = digits)
    }

    pub fn from_hex(text: &str, width: u8) -> Result<Self, FormatError> {
        let bits = u64::from_str_radix(text, 16)
            .map_err(|_| FormatError::BadHex { text: text.to_string() })?;
        Self::new(bits, width)
    }

    /// Bit string with the most significant bit first, e.g. `111` for -1 in
    /// 3-bit two's complement.
    pub fn to_bit_string(&self) -> String {
        (0..self.width)
            .rev()
            .map(|k| if self.bit(k) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bit_string(text: &str) -> Result<Self, FormatError> {
        let width = text.len();
        if width == 0 || width > usize::from(Self::MAX_WIDTH) {
            return Err(FormatError::InvalidWidth { width: width as u8 });
        }
        let mut bits = 0u64;
        for ch in text.chars() {
            bits <<= 1;
            match ch {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(FormatError::BadHex { text: text.to_string() }),
            }
        }
        Self::new(bits, width as u8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_bounds_enforced() {
        assert!(BitWord::new(0, 0).is_err());
        assert!(BitWord::new(0, 65).is_err());
        assert!(BitWord::new(0b100, 2).is_err());
        assert!(BitWord::new(u64::MAX, 64).is_ok());
    }

    #[test]
    fn complement_is_involution() {
        let w = BitWord::new(0b0110, 4).unwrap();
        assert_eq!(w.complement().complement(), w);
        assert_eq!(w.complement().bits(), 0b1001);
    }

    #[test]
    fn hex_round_trip_pads_to_width() {
        let w = BitWord::new(0x3, 12).unwrap();
        assert_eq!(w.to_hex(), "003");
        assert_eq!(BitWord::from_hex("003", 12).unwrap(), w);
    }

    #[test]
    fn bit_string_msb_first() {
        let w = BitWord::from_bit_string("110").unwrap();
        assert_eq!(w.bits(), 0b110);
        assert_eq!(w.to_bit_string(), "110");
    }
}
