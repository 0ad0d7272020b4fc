//! Anti-symmetry measurement and full-corruption recovery analysis for LUT
//! networks.
//!
//! At BER 1 every table bit flips and every non-input address bit inverts,
//! so a LUT's corrupted output is the negation of its table at the
//! complemented address. The output survives exactly when the table stores
//! opposite values at complementary addresses; `alpha` measures how much
//! address mass does.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::fault::{CorruptionScope, CorruptionSpec};
use crate::formats::{BitWord, FormatError, LutTable};
use crate::netsim::{self, EvalReport, LutNetwork, NetError, Network};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("address distribution over {got} entries does not match fan-in {k}")]
    DistributionShape { k: u8, got: usize },
    #[error("address probabilities sum to {sum}, expected 1")]
    DistributionMass { sum: f64 },
    #[error("per-pair recovery convention needs even depth, got {depth}")]
    OddDepthPerPair { depth: u32 },
}

/// Probability mass over the 2^K addresses of one LUT.
#[derive(Debug, Clone)]
pub struct AddressDistribution {
    fan_in: u8,
    probs: Vec<f64>,
}

impl AddressDistribution {
    pub fn new(fan_in: u8, probs: Vec<f64>) -> Result<Self, RecoveryError> {
        if probs.len() != 1 << fan_in {
            return Err(RecoveryError::DistributionShape { k: fan_in, got: probs.len() });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0) {
            return Err(RecoveryError::DistributionMass { sum });
        }
        Ok(Self { fan_in, probs })
    }

    pub fn uniform(fan_in: u8) -> Self {
        let n = 1usize << fan_in;
        Self { fan_in, probs: vec![1.0 / n as f64; n] }
    }

    /// Seeded random distribution, for randomized identity checks.
    pub fn random(fan_in: u8, seed: u64) -> Self {
        let n = 1usize << fan_in;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Self { fan_in, probs: raw.into_iter().map(|p| p / total).collect() }
    }

    /// Empirical distribution from observed address counts.
    pub fn from_counts(fan_in: u8, counts: &[u64]) -> Result<Self, RecoveryError> {
        if counts.len() != 1 << fan_in {
            return Err(RecoveryError::DistributionShape { k: fan_in, got: counts.len() });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Ok(Self::uniform(fan_in));
        }
        Ok(Self {
            fan_in,
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn check_table(&self, lut: &LutTable) -> Result<(), RecoveryError> {
        if lut.fan_in() != self.fan_in {
            return Err(RecoveryError::DistributionShape {
                k: lut.fan_in(),
                got: self.probs.len(),
            });
        }
        Ok(())
    }
}

fn complement_address(address: usize, fan_in: u8) -> usize {
    address ^ ((1 << fan_in) - 1)
}

/// Anti-symmetry of a table under an address distribution: the probability
/// mass of addresses x where the table stores opposite values at x and its
/// bitwise complement.
pub fn alpha(lut: &LutTable, dist: &AddressDistribution) -> Result<f64, RecoveryError> {
    dist.check_table(lut)?;
    let mut mass = 0.0;
    for (address, &p) in dist.probs.iter().enumerate() {
        let mirrored = complement_address(address, lut.fan_in());
        if lut.get(address)? != lut.get(mirrored)? {
            mass += p;
        }
    }
    Ok(mass)
}

/// Exact probability that a fully corrupted LUT neuron reproduces its clean
/// output: the address is complemented and the stored contents complemented,
/// so y' = not T[complement(x)]. Computed from that corrupted semantics
/// directly; it must equal `alpha` identically.
pub fn recovery_probability_single(
    lut: &LutTable,
    dist: &AddressDistribution,
) -> Result<f64, RecoveryError> {
    dist.check_table(lut)?;
    let corrupted = lut.complemented();
    let mut mass = 0.0;
    for (address, &p) in dist.probs.iter().enumerate() {
        let corrupted_out = corrupted.get(complement_address(address, lut.fan_in()))?;
        if corrupted_out == lut.get(address)? {
            mass += p;
        }
    }
    Ok(mass)
}

/// Table with T[complement(x)] = not T[x] at every address: one free bit per
/// complementary pair, randomized by the seed.
pub fn construct_antisymmetric(fan_in: u8, seed: u64) -> Result<LutTable, RecoveryError> {
    let len = 1usize << fan_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = BitWord::zero(len as u8)?;
    for address in 0..len / 2 {
        let bit: bool = rng.random();
        entries.set_bit(address as u8, bit);
        entries.set_bit(complement_address(address, fan_in) as u8, !bit);
    }
    LutTable::new(fan_in, entries).map_err(Into::into)
}

/// How the per-LUT recovery probability is extrapolated across depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthConvention {
    /// alpha^L: one recovery factor per layer.
    PerLayer,
    /// alpha^(L/2): one factor per cancellation pair; even depths only.
    PerPair,
}

/// Independence-approximation recovery estimate across depth; monotone
/// decreasing in L for alpha < 1.
pub fn predicted_recovery(
    alpha_summary: f64,
    depth: u32,
    convention: DepthConvention,
) -> Result<f64, RecoveryError> {
    match convention {
        DepthConvention::PerLayer => Ok(alpha_summary.powi(depth as i32)),
        DepthConvention::PerPair => {
            if depth % 2 != 0 {
                return Err(RecoveryError::OddDepthPerPair { depth });
            }
            Ok(alpha_summary.powi((depth / 2) as i32))
        }
    }
}

/// Per-LUT anti-symmetry over a network, with the distribution induced by
/// the dataset through the clean network (the trace of observed addresses).
#[derive(Debug, Clone)]
pub struct AntiSymmetryReport {
    pub per_lut_alpha: Vec<f64>,
    pub mean_alpha: f64,
    pub min_alpha: f64,
    pub depth: u32,
    pub predicted_recovery_per_layer: f64,
    pub predicted_recovery_per_pair: Option<f64>,
}

pub fn network_alpha(net: &LutNetwork, data: &Dataset) -> Result<AntiSymmetryReport, RecoveryError> {
    let depth = net.layers.len() as u32;
    // Count observed addresses per LUT over the dataset.
    let mut counts: Vec<Vec<Vec<u64>>> = net
        .layers
        .iter()
        .map(|layer| layer.luts.iter().map(|l| vec![0u64; l.len()]).collect())
        .collect();
    for row in &data.features {
        let trace = net.forward_trace(row)?;
        for (layer_counts, addrs) in counts.iter_mut().zip(&trace.addresses) {
            for (lut_counts, &a) in layer_counts.iter_mut().zip(addrs) {
                lut_counts[a] += 1;
            }
        }
    }
    let mut per_lut_alpha = Vec::new();
    for (layer, layer_counts) in net.layers.iter().zip(&counts) {
        for (lut, lut_counts) in layer.luts.iter().zip(layer_counts) {
            let dist = AddressDistribution::from_counts(lut.fan_in(), lut_counts)?;
            per_lut_alpha.push(alpha(lut, &dist)?);
        }
    }
    let mean_alpha = per_lut_alpha.iter().sum::<f64>() / per_lut_alpha.len() as f64;
    let min_alpha = per_lut_alpha.iter().copied().fold(1.0, f64::min);
    let predicted_recovery_per_layer =
        predicted_recovery(mean_alpha, depth, DepthConvention::PerLayer)?;
    let predicted_recovery_per_pair = (depth % 2 == 0)
        .then(|| predicted_recovery(mean_alpha, depth, DepthConvention::PerPair))
        .transpose()?;
    Ok(AntiSymmetryReport {
        per_lut_alpha,
        mean_alpha,
        min_alpha,
        depth,
        predicted_recovery_per_layer,
        predicted_recovery_per_pair,
    })
}

/// One cell of a depth-parity sweep.
#[derive(Debug, Clone)]
pub struct ParityCell {
    pub depth: u32,
    pub ber: f64,
    pub report: EvalReport,
}

/// Evaluate each depth's network across the BER grid (which should include
/// 1.0: full corruption is deterministic, so recovery readings there are
/// exact rather than statistical).
pub fn parity_sweep(
    networks: &[(u32, LutNetwork)],
    p_grid: &[f64],
    data: &Dataset,
    seed: u64,
    trials: u32,
) -> Result<Vec<ParityCell>, RecoveryError> {
    let mut cells = Vec::with_capacity(networks.len() * p_grid.len());
    for (depth, net) in networks {
        let wrapped = Network::Lut(net.clone());
        for &ber in p_grid {
            let spec = CorruptionSpec::new(ber, seed, CorruptionScope::LutTables)
                .map_err(NetError::Fault)?;
            // One deterministic trial suffices at the endpoints.
            let effective_trials = if ber == 0.0 || ber == 1.0 { 1 } else { trials };
            let report = netsim::evaluate(&wrapped, data, &spec, effective_trials)?;
            cells.push(ParityCell { depth: *depth, ber, report });
        }
    }
    Ok(cells)
}
