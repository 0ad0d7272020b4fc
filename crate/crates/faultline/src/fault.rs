//! Bernoulli bit-flip fault model: mask sampling on counter-keyed RNG
//! streams, mask application, and exact corrupted-value distributions with
//! their moments, computed by enumerating every flip pattern.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formats::{BitWord, FloatValue, FormatError, NumericFormat};

/// Enumeration is 2^width; beyond this the exactness budget is gone.
pub const MAX_ENUMERATION_WIDTH: u8 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaultError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("flip probability {p} outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("width {width} exceeds enumeration capacity {max}", max = MAX_ENUMERATION_WIDTH)]
    EnumerationTooWide { width: u8 },
    #[error("distribution has no finite atoms")]
    AllSpecial,
}

/// Which stored-bit populations are subject to corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionScope {
    /// Weight payloads only: dense weight words and LUT truth tables.
    /// Shared quantization parameters are protected.
    WeightsOnly,
    /// Weight payloads plus per-layer scale and zero-point words.
    WeightsAndQuantParams,
    /// LUT truth tables only.
    LutTables,
}

impl CorruptionScope {
    pub fn label(&self) -> &'static str {
        match self {
            CorruptionScope::WeightsOnly => "weights_only",
            CorruptionScope::WeightsAndQuantParams => "weights_and_quant_params",
            CorruptionScope::LutTables => "lut_tables",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "weights_only" => Some(CorruptionScope::WeightsOnly),
            "weights_and_quant_params" => Some(CorruptionScope::WeightsAndQuantParams),
            "lut_tables" => Some(CorruptionScope::LutTables),
            _ => None,
        }
    }
}

/// Bit error rate, base seed, and flippable-bit scope for one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub ber: f64,
    pub seed: u64,
    pub scope: CorruptionScope,
}

impl CorruptionSpec {
    pub fn new(ber: f64, seed: u64, scope: CorruptionScope) -> Result<Self, FaultError> {
        if !(0.0..=1.0).contains(&ber) {
            return Err(FaultError::InvalidProbability { p: ber });
        }
        Ok(Self { ber, seed, scope })
    }
}

/// Counter-keyed random stream: the ChaCha key is built from
/// (seed, parameter index, trial index), so any worker can regenerate the
/// stream for any parameter without coordination. Identical keys produce
/// identical masks regardless of scheduling.
pub struct FlipStream {
    rng: ChaCha8Rng,
}

impl FlipStream {
    pub fn new(seed: u64, param_index: u64, trial: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&param_index.to_le_bytes());
        key[16..24].copy_from_slice(&trial.to_le_bytes());
        key[24..32].copy_from_slice(b"faultln\0");
        Self { rng: ChaCha8Rng::from_seed(key) }
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        // p = 1 must always flip and p = 0 never: random() is in [0, 1).
        self.rng.random::<f64>() < p
    }
}

/// Independent Bernoulli(p) flip decision per bit position.
pub fn sample_flip_mask(nbits: u8, p: f64, stream: &mut FlipStream) -> Result<BitWord, FaultError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FaultError::InvalidProbability { p });
    }
    let mut mask = BitWord::zero(nbits)?;
    for k in 0..nbits {
        if stream.bernoulli(p) {
            mask.set_bit(k, true);
        }
    }
    Ok(mask)
}

/// XOR the mask into the word. Applying the same mask twice restores the
/// original.
pub fn apply_mask(word: &BitWord, mask: &BitWord) -> Result<BitWord, FaultError> {
    Ok(word.xor(mask)?)
}

/// Discrete law of a corrupted decoded value. Atom order is the flip-mask
/// enumeration order (mask bits ascending), which callers rely on for
/// reproducible summation.
#[derive(Debug, Clone)]
pub struct ValueDistribution {
    atoms: Vec<(FloatValue, f64)>,
}

/// What to do with non-finite atoms when taking moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialPolicy {
    /// Drop special atoms without renormalizing: moments are taken over the
    /// finite-outcome sub-probability measure. This keeps moments monotone
    /// in p and is the default.
    DropMass,
    /// Drop special atoms and renormalize the remaining mass to 1.
    Renormalize,
}

impl ValueDistribution {
    pub fn atoms(&self) -> &[(FloatValue, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, p)| p).sum()
    }

    pub fn finite_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|(v, _)| v.is_finite())
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn special_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|(v, _)| !v.is_finite())
            .map(|&(_, p)| p)
            .sum()
    }

    /// Mean and raw second moment of the finite atoms under the given
    /// special-value policy.
    pub fn moments(&self, policy: SpecialPolicy) -> Result<(f64, f64), FaultError> {
        let mut mass = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        for &(v, p) in &self.atoms {
            if let FloatValue::Finite(x) = v {
                mass += p;
                mean += p * x;
                second += p * x * x;
            }
        }
        if mass == 0.0 {
            return Err(FaultError::AllSpecial);
        }
        match policy {
            SpecialPolicy::DropMass => Ok((mean, second)),
            SpecialPolicy::Renormalize => Ok((mean / mass, second / mass)),
        }
    }

    /// Variance of the finite atoms, computed in two passes so near-zero
    /// variances are not lost to cancellation.
    pub fn variance(&self, policy: SpecialPolicy) -> Result<f64, FaultError> {
        let (mean, _) = self.moments(policy)?;
        let mut mass = 0.0;
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            if let FloatValue::Finite(x) = v {
                mass += p;
                acc += p * (x - mean) * (x - mean);
            }
        }
        match policy {
            SpecialPolicy::DropMass => Ok(acc),
            SpecialPolicy::Renormalize => Ok(acc / mass),
        }
    }
}

/// Probability of a specific flip pattern: p^k (1-p)^(n-k) with the 0^0 = 1
/// convention so p = 0 and p = 1 stay exact.
pub fn mask_probability(p: f64, flipped: u32, width: u32) -> f64 {
    debug_assert!(flipped <= width);
    p.powi(flipped as i32) * (1.0 - p).powi((width - flipped) as i32)
}

/// Exact distribution of the decoded value after independent bit flips, one
/// atom per flip pattern. In ieee-like float mode, special-valued atoms are
/// retained (and flagged by their `FloatValue` variant).
pub fn corrupted_distribution(
    word: &BitWord,
    fmt: &NumericFormat,
    p: f64,
) -> Result<ValueDistribution, FaultError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FaultError::InvalidProbability { p });
    }
    let width = word.width();
    if width > MAX_ENUMERATION_WIDTH {
        return Err(FaultError::EnumerationTooWide { width });
    }
    if fmt.width() != width {
        return Err(FaultError::Format(FormatError::WidthMismatch {
            expected: fmt.width(),
            got: width,
        }));
    }
    let n = 1u64 << width;
    let mut atoms = Vec::with_capacity(n as usize);
    for mask_bits in 0..n {
        let mask = BitWord::new(mask_bits, width)?;
        let corrupted = word.xor(&mask)?;
        let value = fmt.decode(&corrupted)?;
        let prob = mask_probability(p, mask.popcount(), u32::from(width));
        atoms.push((value, prob));
    }
    Ok(ValueDistribution { atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::IntFormat;

    fn int_fmt(bits: u8) -> NumericFormat {
        NumericFormat::Int(IntFormat::new(bits).unwrap())
    }

    #[test]
    fn mask_extremes() {
        let mut s = FlipStream::new(1, 2, 3);
        assert_eq!(sample_flip_mask(16, 0.0, &mut s).unwrap().popcount(), 0);
        assert_eq!(sample_flip_mask(16, 1.0, &mut s).unwrap().popcount(), 16);
    }

    #[test]
    fn mask_popcount_tracks_binomial_mean() {
        // 10^5 samples of 16-bit masks at p = 0.5; mean popcount within a
        // 3-sigma binomial bound of 8.
        let trials = 100_000u64;
        let mut total = 0u64;
        for t in 0..trials {
            let mut s = FlipStream::new(7, 0, t);
            total += u64::from(sample_flip_mask(16, 0.5, &mut s).unwrap().popcount());
        }
        let mean = total as f64 / trials as f64;
        let sigma = (16.0 * 0.25 / trials as f64).sqrt();
        assert!((mean - 8.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn mask_reproducible_across_streams() {
        let a = sample_flip_mask(32, 0.3, &mut FlipStream::new(9, 4, 2)).unwrap();
        let b = sample_flip_mask(32, 0.3, &mut FlipStream::new(9, 4, 2)).unwrap();
        assert_eq!(a, b);
        let c = sample_flip_mask(32, 0.3, &mut FlipStream::new(9, 4, 3)).unwrap();
        let d = sample_flip_mask(32, 0.3, &mut FlipStream::new(9, 5, 2)).unwrap();
        assert!(a != c || a != d, "distinct streams should differ");
    }

    #[test]
    fn apply_mask_is_involution() {
        let w = BitWord::new(0b01, 2).unwrap();
        let all = BitWord::new(0b11, 2).unwrap();
        assert_eq!(apply_mask(&w, &all).unwrap().bits(), 0b10);
        let none = BitWord::zero(2).unwrap();
        assert_eq!(apply_mask(&w, &none).unwrap(), w);
        let m = BitWord::new(0b10, 2).unwrap();
        assert_eq!(apply_mask(&apply_mask(&w, &m).unwrap(), &m).unwrap(), w);
        assert!(apply_mask(&w, &BitWord::zero(3).unwrap()).is_err());
    }

    #[test]
    fn distribution_enumerates_two_bit_word() {
        // B=2 word 00 at p=0.1: {0: 0.81, 1: 0.09, -2: 0.09, -1: 0.01}.
        let word = BitWord::zero(2).unwrap();
        let dist = corrupted_distribution(&word, &int_fmt(2), 0.1).unwrap();
        let mut by_value: Vec<(f64, f64)> = dist
            .atoms()
            .iter()
            .map(|&(v, p)| (v.finite().unwrap(), p))
            .collect();
        by_value.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let expect = [(-2.0, 0.09), (-1.0, 0.01), (0.0, 0.81), (1.0, 0.09)];
        for ((v, p), (ev, ep)) in by_value.iter().zip(expect.iter()) {
            assert_eq!(v, ev);
            assert!((p - ep).abs() < 1e-15, "{v}: {p} vs {ep}");
        }
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_extremes_are_point_masses() {
        let fmt = int_fmt(3);
        let word = IntFormat::new(3).unwrap().encode(2).unwrap();
        let clean = corrupted_distribution(&word, &fmt, 0.0).unwrap();
        let (mean, second) = clean.moments(SpecialPolicy::DropMass).unwrap();
        assert_eq!(mean, 2.0);
        assert_eq!(second, 4.0);
        let flipped = corrupted_distribution(&word, &fmt, 1.0).unwrap();
        // Full complement of 010 is 101 = -3.
        let (mean, _) = flipped.moments(SpecialPolicy::DropMass).unwrap();
        assert_eq!(mean, -3.0);
    }

    #[test]
    fn moments_match_spec_examples() {
        let word = BitWord::zero(2).unwrap();
        let dist = corrupted_distribution(&word, &int_fmt(2), 0.1).unwrap();
        let (mean, second) = dist.moments(SpecialPolicy::DropMass).unwrap();
        assert!((mean - (-0.1)).abs() < 1e-12);
        assert!((second - 0.46).abs() < 1e-12);
        // Var = p(1-p)(4^B-1)/3 = 0.45
        let var = dist.variance(SpecialPolicy::DropMass).unwrap();
        assert!((var - 0.45).abs() < 1e-12);

        // BNN word at p=0.5 from +1: atoms {+1: 0.5, -1: 0.5}.
        let bit = BitWord::new(1, 1).unwrap();
        let dist = corrupted_distribution(&bit, &NumericFormat::Binary, 0.5).unwrap();
        let (mean, second) = dist.moments(SpecialPolicy::DropMass).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(second, 1.0);
    }

    #[test]
    fn int_moment_identities_hold_exhaustively() {
        // Mean error p(-1-2w) and variance p(1-p)(4^B-1)/3 for every word.
        for b in 1..=8u8 {
            let ifmt = IntFormat::new(b).unwrap();
            let fmt = int_fmt(b);
            let sumsq = ((4f64).powi(i32::from(b)) - 1.0) / 3.0;
            for value in [ifmt.min_value(), -1, 0, 1.min(ifmt.max_value()), ifmt.max_value()] {
                if value < ifmt.min_value() || value > ifmt.max_value() {
                    continue;
                }
                let word = ifmt.encode(value).unwrap();
                for p in [0.0, 0.01, 0.1, 0.5, 0.9, 1.0] {
                    let dist = corrupted_distribution(&word, &fmt, p).unwrap();
                    let (mean, _) = dist.moments(SpecialPolicy::DropMass).unwrap();
                    let var = dist.variance(SpecialPolicy::DropMass).unwrap();
                    let expect_mean = value as f64 + p * (-1.0 - 2.0 * value as f64);
                    let expect_var = p * (1.0 - p) * sumsq;
                    let scale = sumsq.max(1.0);
                    assert!(
                        (mean - expect_mean).abs() <= 1e-12 * scale,
                        "B={b} w={value} p={p}: mean {mean} vs {expect_mean}"
                    );
                    assert!(
                        (var - expect_var).abs() <= 1e-12 * scale,
                        "B={b} w={value} p={p}: var {var} vs {expect_var}"
                    );
                }
            }
        }
    }

    #[test]
    fn binary_moment_identities() {
        // Var = 4p(1-p), mean error = -2pw.
        for bit in [false, true] {
            let w = if bit { 1.0 } else { -1.0 };
            let word = BitWord::new(u64::from(bit), 1).unwrap();
            for p in [0.0, 0.2, 0.5, 1.0] {
                let dist = corrupted_distribution(&word, &NumericFormat::Binary, p).unwrap();
                let (mean, _) = dist.moments(SpecialPolicy::DropMass).unwrap();
                let var = dist.variance(SpecialPolicy::DropMass).unwrap();
                assert!((mean - w - (-2.0 * p * w)).abs() < 1e-15);
                assert!((var - 4.0 * p * (1.0 - p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_cap_is_enforced() {
        let word = BitWord::zero(21).unwrap();
        let fmt = NumericFormat::Int(IntFormat::new(21).unwrap());
        match corrupted_distribution(&word, &fmt, 0.1) {
            Err(FaultError::EnumerationTooWide { width: 21 }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn special_policy_drop_vs_renormalize() {
        use crate::formats::FloatFormat;
        // fp8-like word whose corruption reaches Inf/NaN patterns.
        let fmt = FloatFormat::fp8();
        let word = fmt.encode(1.0).unwrap();
        let dist =
            corrupted_distribution(&word, &NumericFormat::Float(fmt), 0.2).unwrap();
        assert!(dist.special_mass() > 0.0);
        let (m_drop, s_drop) = dist.moments(SpecialPolicy::DropMass).unwrap();
        let (m_renorm, s_renorm) = dist.moments(SpecialPolicy::Renormalize).unwrap();
        let mass = dist.finite_mass();
        assert!((m_drop / mass - m_renorm).abs() < 1e-12);
        assert!((s_drop / mass - s_renorm).abs() < 1e-12);
    }
}
