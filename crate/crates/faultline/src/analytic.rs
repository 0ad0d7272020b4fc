//! Closed-form expected squared error of neuron outputs under independent
//! parameter bit flips, per stored format, plus activation propagation and
//! width/sparsity/depth scaling predictors.
//!
//! Every formula here has an exhaustive-enumeration counterpart in
//! [`crate::oracle`]; the two must agree to tight tolerance, and the oracle
//! suite checks that they do.

use thiserror::Error;

use crate::fault::{corrupted_distribution, FaultError, SpecialPolicy};
use crate::formats::{
    pow2, BitWord, FloatFormat, FormatError, IntFormat, NumericFormat, SpecialsMode,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("inputs ({inputs}) and weights ({weights}) disagree in length")]
    LengthMismatch { inputs: usize, weights: usize },
    #[error("weight {value} is not a binary weight in {{-1, +1}}")]
    NonBinaryWeight { value: f64 },
    #[error("float moment products require extended specials mode; use the enumeration path for ieee-like formats")]
    IeeeModeUnsupported,
    #[error("temperature {tau} must be nonnegative")]
    InvalidTemperature { tau: f64 },
    #[error("weight decoded to a non-finite value")]
    NonFiniteWeight,
}

/// One neuron's inputs together with its stored weight words and their
/// decoded clean values.
#[derive(Debug, Clone)]
pub struct NeuronInstance {
    pub inputs: Vec<f64>,
    pub weight_words: Vec<BitWord>,
    pub clean_weights: Vec<f64>,
}

impl NeuronInstance {
    pub fn from_words(
        inputs: Vec<f64>,
        weight_words: Vec<BitWord>,
        fmt: &NumericFormat,
    ) -> Result<Self, AnalyticError> {
        if inputs.len() != weight_words.len() {
            return Err(AnalyticError::LengthMismatch {
                inputs: inputs.len(),
                weights: weight_words.len(),
            });
        }
        let clean_weights = weight_words
            .iter()
            .map(|w| {
                fmt.decode(w)?
                    .finite()
                    .ok_or(AnalyticError::NonFiniteWeight)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { inputs, weight_words, clean_weights })
    }

    pub fn fan_in(&self) -> usize {
        self.inputs.len()
    }

    /// Clean pre-activation sum of w_i x_i.
    pub fn clean_output(&self) -> f64 {
        self.inputs
            .iter()
            .zip(&self.clean_weights)
            .map(|(x, w)| x * w)
            .sum()
    }
}

/// Expected squared error split into its variance and squared-bias parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBreakdown {
    pub variance_term: f64,
    pub bias_term: f64,
    pub total: f64,
}

impl MseBreakdown {
    pub fn new(variance_term: f64, bias_term: f64) -> Self {
        Self { variance_term, bias_term, total: variance_term + bias_term }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.variance_term * factor, self.bias_term * factor)
    }
}

/// Discrete law of the pre-activation perturbation.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    atoms: Vec<(f64, f64)>,
}

impl NoiseDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Self {
        debug_assert!(
            (atoms.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12,
            "noise atom probabilities must sum to 1"
        );
        Self { atoms }
    }

    /// Point mass at a single perturbation value.
    pub fn constant(value: f64) -> Self {
        Self { atoms: vec![(value, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().map(|&(v, _)| v.abs()).fold(0.0, f64::max)
    }
}

/// Variance of a single corrupted B-bit two's complement weight:
/// p(1-p) (4^B - 1) / 3, independent of the stored value.
pub fn int_weight_variance(fmt: &IntFormat, p: f64) -> f64 {
    p * (1.0 - p) * (4f64.powi(i32::from(fmt.bits())) - 1.0) / 3.0
}

/// Mean error of a single corrupted two's complement weight: p(-1 - 2w).
pub fn int_weight_mean_error(w: f64, p: f64) -> f64 {
    p * (-1.0 - 2.0 * w)
}

/// Expected squared output error for a neuron with B-bit two's complement
/// weights: variance p(1-p)((4^B-1)/3)||x||^2 plus bias p^2 (sum x_i(1+2w_i))^2.
pub fn int_neuron_mse(
    neuron: &NeuronInstance,
    fmt: &IntFormat,
    p: f64,
) -> Result<MseBreakdown, AnalyticError> {
    check_probability(p)?;
    let var_w = int_weight_variance(fmt, p);
    let norm_sq: f64 = neuron.inputs.iter().map(|x| x * x).sum();
    // The bias enters squared, so the mean error p(-1-2w) and the stated
    // (1+2w) coefficient give the same value.
    let bias_sum: f64 = neuron
        .inputs
        .iter()
        .zip(&neuron.clean_weights)
        .map(|(x, w)| x * int_weight_mean_error(*w, p))
        .sum();
    Ok(MseBreakdown::new(var_w * norm_sq, bias_sum * bias_sum))
}

/// Per-field moments of one corrupted float weight in extended mode:
/// Gamma = E[w'] and Omega = E[w'^2], each a product of sign, mantissa, and
/// exponent factors.
pub fn float_weight_moments(
    word: &BitWord,
    fmt: &FloatFormat,
    p: f64,
) -> Result<(f64, f64), AnalyticError> {
    check_probability(p)?;
    if fmt.specials() != SpecialsMode::Extended {
        return Err(AnalyticError::IeeeModeUnsupported);
    }
    if word.width() != fmt.width() {
        return Err(FormatError::WidthMismatch { expected: fmt.width(), got: word.width() }.into());
    }
    let m_bits = fmt.mantissa_bits();
    let e_bits = fmt.exponent_bits();

    // Sign: E[S'] = (1-2p)(-1)^s, E[S'^2] = 1.
    let sign_bit = word.bit(m_bits + e_bits);
    let sign_mean = (1.0 - 2.0 * p) * if sign_bit { -1.0 } else { 1.0 };

    // Mantissa: bounded fixed-point behavior.
    let mut man_clean = 1.0;
    let mut man_shift = 0.0;
    let mut man_sq_sum = 0.0;
    for k in 1..=m_bits {
        let f_k = word.bit(m_bits - k);
        let weight = pow2(-i32::from(k));
        if f_k {
            man_clean += weight;
        }
        man_shift += (1.0 - 2.0 * f64::from(u8::from(f_k))) * weight;
        man_sq_sum += weight * weight;
    }
    let man_mean = man_clean + p * man_shift;
    let man_second = man_mean * man_mean + p * (1.0 - p) * man_sq_sum;

    // Exponent: product over bits of (1-p) + p * 2^((1-2b_j) 2^j).
    let mut exp_field = 0i32;
    let mut exp_mean_product = 1.0;
    let mut exp_second_product = 1.0;
    for j in 0..e_bits {
        let b_j = word.bit(m_bits + j);
        let step = 1i32 << j;
        if b_j {
            exp_field += step;
        }
        let delta = if b_j { -step } else { step };
        exp_mean_product *= (1.0 - p) + p * pow2(delta);
        exp_second_product *= (1.0 - p) + p * pow2(2 * delta);
    }
    let exp_mean = pow2(exp_field - fmt.bias()) * exp_mean_product;
    let exp_second = pow2(2 * (exp_field - fmt.bias())) * exp_second_product;

    Ok((sign_mean * man_mean * exp_mean, man_second * exp_second))
}

/// Expected squared output error for a float-weight neuron:
/// sum x_i^2 (Omega_i - Gamma_i^2) + (sum x_i (Gamma_i - w_i))^2.
pub fn float_neuron_mse(
    neuron: &NeuronInstance,
    fmt: &FloatFormat,
    p: f64,
) -> Result<MseBreakdown, AnalyticError> {
    let mut variance = 0.0;
    let mut bias_sum = 0.0;
    for ((x, word), w) in neuron
        .inputs
        .iter()
        .zip(&neuron.weight_words)
        .zip(&neuron.clean_weights)
    {
        let (gamma, omega) = float_weight_moments(word, fmt, p)?;
        variance += x * x * (omega - gamma * gamma);
        bias_sum += x * (gamma - w);
    }
    Ok(MseBreakdown::new(variance, bias_sum * bias_sum))
}

/// Worst case of E[Exp'^2] over stored exponent patterns and a grid of flip
/// probabilities. For standard-bias formats this peaks at 2^(2^E), the
/// doubly-exponential ceiling of exponent corruption.
pub fn exponent_second_moment_bound(fmt: &FloatFormat) -> f64 {
    let e_bits = fmt.exponent_bits();
    let mut worst: f64 = 0.0;
    for pattern in 0..(1u64 << e_bits) {
        for step in 0..=100 {
            let p = step as f64 / 100.0;
            let mut product = 1.0;
            for j in 0..e_bits {
                let b_j = (pattern >> j) & 1 == 1;
                let delta = if b_j { -(1i32 << j) } else { 1i32 << j };
                product *= (1.0 - p) + p * pow2(2 * delta);
            }
            let value = pow2(2 * (pattern as i32 - fmt.bias())) * product;
            worst = worst.max(value);
        }
    }
    worst
}

/// Protected-parameter affine quantization: the scale and zero point are
/// fault-free, so the error is exactly S^2 times the integer-weight MSE.
pub fn aq_protected_mse(
    neuron: &NeuronInstance,
    params: &crate::formats::AffineQuantLayerParams,
    p: f64,
) -> Result<MseBreakdown, AnalyticError> {
    let scale = params.scale();
    let inner = int_neuron_mse(neuron, params.weight_fmt(), p)?;
    Ok(inner.scaled(scale * scale))
}

/// Variance of the corrupted accumulation H' = sum x_i (w_i' - Z'):
/// sum x_i^2 Var(w_i') + (sum x_i)^2 Var(Z'), with Var(Z') taken from exact
/// enumeration of the zero-point word.
pub fn aq_corrupted_accumulation_variance(
    neuron: &NeuronInstance,
    params: &crate::formats::AffineQuantLayerParams,
    p: f64,
) -> Result<f64, AnalyticError> {
    check_probability(p)?;
    let var_w = int_weight_variance(params.weight_fmt(), p);
    let norm_sq: f64 = neuron.inputs.iter().map(|x| x * x).sum();
    let input_sum: f64 = neuron.inputs.iter().sum();
    let zero_dist = corrupted_distribution(
        params.zero_word(),
        &NumericFormat::Int(*params.zero_fmt()),
        p,
    )?;
    let var_z = zero_dist.variance(SpecialPolicy::DropMass)?;
    Ok(norm_sq * var_w + input_sum * input_sum * var_z)
}

/// Fully corrupted affine quantization: weights, zero point, and scale may
/// all be hit. With S', Z', w' mutually independent, E[y'] = E[S'] E[H'] and
/// E[y'^2] = E[S'^2] E[H'^2]; the variance is assembled as
/// E[S'^2] Var(H') + E[H']^2 Var(S') so it is exactly zero at p = 0 instead
/// of a cancellation residue.
pub fn aq_corrupted_full_mse(
    neuron: &NeuronInstance,
    params: &crate::formats::AffineQuantLayerParams,
    p: f64,
) -> Result<MseBreakdown, AnalyticError> {
    check_probability(p)?;

    // Accumulation moments from the integer theory plus zero-point
    // enumeration. The mean is summed per input term, mirroring the clean
    // accumulation's evaluation order.
    let zero_dist = corrupted_distribution(
        params.zero_word(),
        &NumericFormat::Int(*params.zero_fmt()),
        p,
    )?;
    let (zero_mean, _) = zero_dist.moments(SpecialPolicy::DropMass)?;
    let mean_h: f64 = neuron
        .inputs
        .iter()
        .zip(&neuron.clean_weights)
        .map(|(x, w)| x * (w + int_weight_mean_error(*w, p) - zero_mean))
        .sum();
    let var_h = aq_corrupted_accumulation_variance(neuron, params, p)?;

    // Scale moments from exact enumeration of the scale word in its float
    // format (specials, if the format admits them, are dropped).
    let scale_dist = corrupted_distribution(
        params.scale_word(),
        &NumericFormat::Float(*params.scale_fmt()),
        p,
    )?;
    let (scale_mean, scale_second) = scale_dist.moments(SpecialPolicy::DropMass)?;
    let scale_var = scale_dist.variance(SpecialPolicy::DropMass)?;

    let clean_h: f64 = neuron
        .inputs
        .iter()
        .zip(&neuron.clean_weights)
        .map(|(x, w)| x * (w - params.zero_point() as f64))
        .sum();
    let clean_y = params.scale() * clean_h;

    let variance = scale_second * var_h + mean_h * mean_h * scale_var;
    let bias = scale_mean * mean_h - clean_y;
    Ok(MseBreakdown::new(variance, bias * bias))
}

/// Expected squared output error for binary weights:
/// 4p(1-p)||x||^2 + 4p^2 (sum x_i w_i)^2.
pub fn bnn_neuron_mse(neuron: &NeuronInstance, p: f64) -> Result<MseBreakdown, AnalyticError> {
    check_probability(p)?;
    for &w in &neuron.clean_weights {
        if w != 1.0 && w != -1.0 {
            return Err(AnalyticError::NonBinaryWeight { value: w });
        }
    }
    let norm_sq: f64 = neuron.inputs.iter().map(|x| x * x).sum();
    let dot: f64 = neuron
        .inputs
        .iter()
        .zip(&neuron.clean_weights)
        .map(|(x, w)| x * w)
        .sum();
    Ok(MseBreakdown::new(
        4.0 * p * (1.0 - p) * norm_sq,
        4.0 * p * p * dot * dot,
    ))
}

/// Expected squared error after ReLU given clean pre-activation y and the
/// discrete perturbation law. For y > 0 the noise passes through above -y
/// and clamps to -y below; for y <= 0 the definition
/// max(0, y + xi)^2 applies directly.
pub fn relu_propagated_mse(y_clean: f64, noise: &NoiseDistribution) -> f64 {
    if y_clean > 0.0 {
        noise
            .atoms()
            .iter()
            .map(|&(xi, p)| {
                if xi > -y_clean {
                    p * xi * xi
                } else {
                    p * y_clean * y_clean
                }
            })
            .sum()
    } else {
        noise
            .atoms()
            .iter()
            .map(|&(xi, p)| {
                let da = (y_clean + xi).max(0.0);
                p * da * da
            })
            .sum()
    }
}

/// Temperature sigmoid 1 / (1 + exp(-x / tau)). At tau = 0 this is the step
/// function, taken as the indicator of x > 0 (exactly zero lands on the
/// inactive side).
pub fn sigmoid_tau(x: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        if x > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 / (1.0 + (-x / tau).exp())
    }
}

/// Expected squared error after a temperature sigmoid. At tau = 0 this
/// equals the probability that the perturbation flips the active side.
pub fn sigmoid_propagated_mse(
    y_clean: f64,
    tau: f64,
    noise: &NoiseDistribution,
) -> Result<f64, AnalyticError> {
    if tau < 0.0 || tau.is_nan() {
        return Err(AnalyticError::InvalidTemperature { tau });
    }
    let base = sigmoid_tau(y_clean, tau);
    Ok(noise
        .atoms()
        .iter()
        .map(|&(xi, p)| {
            let da = sigmoid_tau(y_clean + xi, tau) - base;
            p * da * da
        })
        .sum())
}

/// Width/sparsity scaling predictor with unit proportionality constants:
/// variance grows linearly in the active fan-in, bias quadratically. Meant
/// for ordering and ratio checks, not absolute values.
pub fn width_sparsity_predictor(
    k_active: usize,
    var_dw: f64,
    mean_dw: f64,
    sigma_x: f64,
    mu_x: f64,
) -> MseBreakdown {
    let k = k_active as f64;
    MseBreakdown::new(
        k * var_dw * sigma_x * sigma_x,
        k * k * mean_dw * mean_dw * mu_x * mu_x,
    )
}

/// End-to-end MSE after L layers of uniform gain lambda and per-layer
/// intrinsic noise nu: nu (1 - lambda^(2L)) / (1 - lambda^2), with the
/// critical-gain limit nu * L at lambda = 1. Equals the L-step recursion
/// e^2 <- lambda^2 e^2 + nu started at zero.
pub fn depth_mse(lambda_gain: f64, nu: f64, depth: u32) -> f64 {
    let lambda_sq = lambda_gain * lambda_gain;
    if lambda_sq == 1.0 {
        nu * f64::from(depth)
    } else {
        nu * (1.0 - lambda_sq.powi(depth as i32)) / (1.0 - lambda_sq)
    }
}

fn check_probability(p: f64) -> Result<(), AnalyticError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FaultError::InvalidProbability { p }.into());
    }
    Ok(())
}
