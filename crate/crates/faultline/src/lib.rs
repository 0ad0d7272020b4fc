//! faultline: a desk-scale laboratory for studying how random bit flips in
//! stored network parameters corrupt inference.
//!
//! The crate provides:
//! - bit-exact codecs for integer, float, binary, affine-quantized, and LUT
//!   parameter representations ([`formats`]);
//! - a Bernoulli flip-mask fault model with exact corrupted-value
//!   distributions by enumeration ([`fault`]);
//! - closed-form expected-error formulas per format plus activation, width,
//!   sparsity, and depth scaling predictors ([`analytic`]);
//! - forward inference and corruption for small MLPs and LUT networks
//!   ([`netsim`]), with trainers for both ([`trainer`]);
//! - anti-symmetry and even-depth recovery analysis for LUT networks
//!   ([`recovery`]);
//! - a deterministic sweep/ablation engine with CSV output ([`harness`]),
//!   and enumeration oracles cross-checking every closed form ([`oracle`]).
//!
//! With the default `parallel` feature, Monte Carlo trials and sweep cells
//! run on rayon; per-trial counter-keyed RNG streams make every result
//! bit-identical to the sequential fallback.

pub mod analytic;
pub mod dataset;
pub mod fault;
pub mod formats;
pub mod harness;
pub mod netsim;
pub mod oracle;
pub mod recovery;
pub mod trainer;
