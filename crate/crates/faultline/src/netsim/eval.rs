//! Monte Carlo evaluation of a network under corruption: per-trial accuracy,
//! output MSE against clean logits, and special-value tallies.
//!
//! Trials are embarrassingly parallel; every trial derives its masks from
//! the (seed, parameter index, trial) stream, and per-trial results are
//! collected in trial order before aggregation, so the numbers are identical
//! whether the pool has one worker or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::fault::CorruptionSpec;

use super::{corrupt_network, forward_decoded, NetError, Network};

/// Statistics of a single corruption trial over the full evaluation set.
#[derive(Debug, Clone, Copy)]
pub struct TrialStat {
    pub accuracy: f64,
    /// Mean over finite-logit examples of the summed squared logit error
    /// against the clean network. `None` when no example stayed finite.
    pub output_mse: Option<f64>,
    /// Number of inferences that produced a NaN or infinite logit.
    pub special_count: u64,
}

/// Aggregated evaluation across trials.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Mean over all finite-logit inferences of the summed squared logit
    /// error; NaN when every inference went special.
    pub mean_output_mse: f64,
    pub trials: u32,
    /// Fraction of (trial, example) inferences with a non-finite logit.
    pub special_value_rate: f64,
}

/// Winning class: lowest index among the maxima. `None` when any logit is
/// non-finite; such inferences count as misclassifications.
pub fn predict(logits: &[f64]) -> Option<usize> {
    if logits.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    Some(best)
}

/// Clean logits for every example, computed once per evaluation.
pub fn clean_logits(net: &Network, data: &Dataset) -> Result<Vec<Vec<f64>>, NetError> {
    forward_all(net, data)
}

fn forward_all(net: &Network, data: &Dataset) -> Result<Vec<Vec<f64>>, NetError> {
    match net {
        Network::Mlp(mlp) => {
            let decoded: Vec<Vec<Vec<f64>>> = mlp
                .layers
                .iter()
                .map(super::DenseLayer::decoded_matrix)
                .collect();
            data.features
                .iter()
                .map(|x| {
                    if x.len() != mlp.features {
                        return Err(super::dim_err(format!(
                            "input has {} features, network expects {}",
                            x.len(),
                            mlp.features
                        )));
                    }
                    Ok(forward_decoded(mlp, &decoded, x))
                })
                .collect()
        }
        Network::Lut(lut) => data.features.iter().map(|x| lut.forward(x)).collect(),
    }
}

fn run_one_trial(
    net: &Network,
    data: &Dataset,
    clean: &[Vec<f64>],
    spec: &CorruptionSpec,
    trial: u64,
) -> Result<TrialStat, NetError> {
    let corrupted = corrupt_network(net, spec, trial)?;
    let logits = forward_all(&corrupted, data)?;
    let mut correct = 0usize;
    let mut specials = 0u64;
    let mut mse_sum = 0.0;
    let mut finite_examples = 0usize;
    for ((logit_row, clean_row), &label) in logits.iter().zip(clean).zip(&data.labels) {
        match predict(logit_row) {
            Some(class) => {
                if class == label {
                    correct += 1;
                }
                let d2: f64 = logit_row
                    .iter()
                    .zip(clean_row)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                mse_sum += d2;
                finite_examples += 1;
            }
            None => specials += 1,
        }
    }
    Ok(TrialStat {
        accuracy: correct as f64 / data.len() as f64,
        output_mse: (finite_examples > 0).then(|| mse_sum / finite_examples as f64),
        special_count: specials,
    })
}

/// Sequential trial loop; always available.
pub fn run_trials_seq(
    net: &Network,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: u32,
) -> Result<Vec<TrialStat>, NetError> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let clean = clean_logits(net, data)?;
    (0..u64::from(trials))
        .map(|t| run_one_trial(net, data, &clean, spec, t))
        .collect()
}

/// Trial loop on the rayon pool. Results are keyed by trial index, so the
/// output is identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn run_trials(
    net: &Network,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: u32,
) -> Result<Vec<TrialStat>, NetError> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let clean = clean_logits(net, data)?;
    (0..u64::from(trials))
        .into_par_iter()
        .map(|t| run_one_trial(net, data, &clean, spec, t))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_trials(
    net: &Network,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: u32,
) -> Result<Vec<TrialStat>, NetError> {
    run_trials_seq(net, data, spec, trials)
}

fn aggregate(stats: &[TrialStat], examples: usize) -> EvalReport {
    let trials = stats.len() as u32;
    let n = stats.len() as f64;
    let mean_accuracy = stats.iter().map(|s| s.accuracy).sum::<f64>() / n;
    // Population standard deviation. Identical per-trial accuracies (p = 0)
    // must report exactly zero, so short-circuit the degenerate case.
    let all_equal = stats.windows(2).all(|w| w[0].accuracy == w[1].accuracy);
    let std_accuracy = if all_equal {
        0.0
    } else {
        (stats
            .iter()
            .map(|s| (s.accuracy - mean_accuracy) * (s.accuracy - mean_accuracy))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let mut mse_sum = 0.0;
    let mut mse_trials = 0u32;
    let mut specials = 0u64;
    for s in stats {
        if let Some(mse) = s.output_mse {
            mse_sum += mse;
            mse_trials += 1;
        }
        specials += s.special_count;
    }
    EvalReport {
        mean_accuracy,
        std_accuracy,
        mean_output_mse: if mse_trials > 0 {
            mse_sum / f64::from(mse_trials)
        } else {
            f64::NAN
        },
        trials,
        special_value_rate: specials as f64 / (n * examples as f64),
    }
}

/// Corrupt-and-evaluate over `trials` independent trials: one mask set per
/// parameter per trial, held constant across the evaluation set.
pub fn evaluate(
    net: &Network,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: u32,
) -> Result<EvalReport, NetError> {
    let stats = run_trials(net, data, spec, trials)?;
    Ok(aggregate(&stats, data.len()))
}

/// Sequential-only variant of [`evaluate`].
pub fn evaluate_seq(
    net: &Network,
    data: &Dataset,
    spec: &CorruptionSpec,
    trials: u32,
) -> Result<EvalReport, NetError> {
    let stats = run_trials_seq(net, data, spec, trials)?;
    Ok(aggregate(&stats, data.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, SyntheticKind};
    use crate::fault::CorruptionScope;
    use crate::formats::{FloatFormat, NumericFormat};
    use crate::netsim::{Activation, DenseLayer, MlpNetwork};

    fn tiny_net() -> Network {
        let fmt = FloatFormat::fp32();
        let rows = vec![
            vec![1.0f64, 0.5, 0.0],
            vec![-1.0, -0.5, 0.0],
        ];
        let words = rows
            .iter()
            .map(|r| r.iter().map(|&w| fmt.encode(w).unwrap()).collect())
            .collect();
        let layer = DenseLayer::new(
            words,
            NumericFormat::Float(fmt),
            None,
            Activation::Identity,
            None,
        )
        .unwrap();
        Network::Mlp(MlpNetwork::new(2, vec![layer], true, 2).unwrap())
    }

    #[test]
    fn predict_breaks_ties_to_lowest_index() {
        assert_eq!(predict(&[0.0, 0.0]), Some(0));
        assert_eq!(predict(&[1.0, 2.0, 2.0]), Some(1));
        assert_eq!(predict(&[f64::NAN, 1.0]), None);
        assert_eq!(predict(&[f64::INFINITY, 1.0]), None);
    }

    #[test]
    fn clean_evaluation_has_zero_std() {
        let net = tiny_net();
        let data = make_synthetic(SyntheticKind::Blobs, 25, 2, 3);
        let spec = CorruptionSpec::new(0.0, 1, CorruptionScope::WeightsOnly).unwrap();
        let report = evaluate(&net, &data, &spec, 20).unwrap();
        assert_eq!(report.std_accuracy, 0.0);
        assert_eq!(report.special_value_rate, 0.0);
        assert_eq!(report.mean_output_mse, 0.0);
        assert_eq!(report.trials, 20);
    }

    #[test]
    fn corrupted_network_is_reused_across_examples() {
        // Same corrupted network + same input = same output: no activation
        // faults, corruption acts only on stored bits.
        let net = tiny_net();
        let spec = CorruptionSpec::new(0.3, 5, CorruptionScope::WeightsOnly).unwrap();
        let corrupted = corrupt_network(&net, &spec, 2).unwrap();
        let a = corrupted.forward(&[0.3, -0.8]).unwrap();
        let b = corrupted.forward(&[0.3, -0.8]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let net = tiny_net();
        let data = make_synthetic(SyntheticKind::Blobs, 20, 2, 3);
        let spec = CorruptionSpec::new(0.2, 11, CorruptionScope::WeightsOnly).unwrap();
        let par = run_trials(&net, &data, &spec, 16).unwrap();
        let seq = run_trials_seq(&net, &data, &spec, 16).unwrap();
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.accuracy, b.accuracy);
            assert_eq!(a.output_mse, b.output_mse);
            assert_eq!(a.special_count, b.special_count);
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let net = tiny_net();
        let data = Dataset {
            name: "empty".into(),
            features: vec![],
            labels: vec![],
            classes: 2,
        };
        let spec = CorruptionSpec::new(0.0, 1, CorruptionScope::WeightsOnly).unwrap();
        assert!(matches!(
            evaluate(&net, &data, &spec, 1),
            Err(NetError::EmptyDataset)
        ));
    }
}
