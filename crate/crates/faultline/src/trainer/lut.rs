//! Greedy bit-flip trainer for LUT networks: for each pass, try flipping
//! every table entry and keep the flip when it strictly reduces the training
//! loss. Loss is the misclassification count with the summed prediction
//! margin as tie-break, so flips that leave accuracy unchanged but widen
//! margins are still accepted.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::formats::{BitWord, LutTable};
use crate::netsim::{Binarizer, LutLayer, LutNetwork};

use super::{bad_config, TrainError};

#[derive(Debug, Clone)]
pub struct LutTrainConfig {
    /// (number of LUTs, fan-in) per layer; the terminal count must divide
    /// evenly into the class bins.
    pub layers: Vec<(usize, u8)>,
    pub thresholds_per_feature: usize,
    pub passes: u32,
    pub seed: u64,
}

impl Default for LutTrainConfig {
    fn default() -> Self {
        Self { layers: vec![(48, 4), (48, 4)], thresholds_per_feature: 4, passes: 4, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct LutTrainReport {
    pub initial_loss: (usize, i64),
    pub final_loss: (usize, i64),
    pub accepted_flips: u32,
    pub passes_run: u32,
    /// Loss after each accepted flip: (misclassified, negated margin sum).
    pub loss_trace: Vec<(usize, i64)>,
}

/// Loss ordering: fewer misclassifications first, then larger total margin.
fn loss_of(net: &LutNetwork, bits: &[Vec<bool>], labels: &[usize]) -> (usize, i64) {
    let mut miscount = 0usize;
    let mut margin_sum = 0i64;
    for (input_bits, &label) in bits.iter().zip(labels) {
        let mut current = input_bits.clone();
        for layer in &net.layers {
            current = forward_layer(layer, &current);
        }
        let mut logits = vec![0i64; net.classes];
        for (bit, &class) in current.iter().zip(&net.head) {
            if *bit {
                logits[usize::from(class)] += 1;
            }
        }
        let own = logits[label];
        let best_other = logits
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label)
            .map(|(_, &v)| v)
            .max()
            .unwrap_or(0);
        let margin = own - best_other;
        // predict() ties resolve to the lowest class index.
        let predicted_label = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap();
        if predicted_label != label {
            miscount += 1;
        }
        margin_sum += margin;
    }
    (miscount, -margin_sum)
}

fn forward_layer(layer: &LutLayer, input: &[bool]) -> Vec<bool> {
    layer
        .luts
        .iter()
        .zip(&layer.connections)
        .map(|(lut, conn)| {
            let mut address = 0usize;
            for (bit_pos, &src) in conn.iter().enumerate() {
                if input[src as usize] {
                    address |= 1 << bit_pos;
                }
            }
            lut.get(address).expect("address in range")
        })
        .collect()
}

fn random_connections(rng: &mut ChaCha8Rng, width: usize, fan_in: u8) -> Vec<u32> {
    let k = usize::from(fan_in);
    if width >= k {
        // Distinct inputs via a partial shuffle.
        let mut indices: Vec<u32> = (0..width as u32).collect();
        indices.shuffle(rng);
        indices.truncate(k);
        indices
    } else {
        (0..k).map(|_| rng.random_range(0..width as u32)).collect()
    }
}

/// Train a LUT network by greedy coordinate descent over table bits.
/// Connectivity is sampled once from the seed and never changes; training
/// terminates after `passes` passes or a pass with no accepted flips.
pub fn train_lut(
    data: &Dataset,
    config: &LutTrainConfig,
) -> Result<(LutNetwork, LutTrainReport), TrainError> {
    if data.is_empty() {
        return Err(bad_config("dataset is empty"));
    }
    if config.layers.is_empty() {
        return Err(bad_config("need at least one LUT layer"));
    }
    if config.thresholds_per_feature == 0 {
        return Err(bad_config("need at least one threshold per feature"));
    }
    let (terminal_luts, _) = *config.layers.last().unwrap();
    if terminal_luts % data.classes != 0 {
        return Err(bad_config(format!(
            "terminal layer has {terminal_luts} LUTs, not divisible into {} class bins",
            data.classes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let binarizer = Binarizer::fit(&data.feature_ranges(), config.thresholds_per_feature);
    let mut width = binarizer.bit_count();
    let mut layers = Vec::with_capacity(config.layers.len());
    for &(luts, fan_in) in &config.layers {
        if luts == 0 {
            return Err(bad_config("layer with zero LUTs"));
        }
        let tables: Vec<LutTable> = (0..luts)
            .map(|_| {
                let len = 1u8 << fan_in;
                let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
                let bits = rng.random::<u64>() & mask;
                LutTable::new(fan_in, BitWord::new(bits, len).expect("fits"))
                    .map_err(TrainError::Format)
            })
            .collect::<Result<_, _>>()?;
        let connections = (0..luts)
            .map(|_| random_connections(&mut rng, width, fan_in))
            .collect();
        layers.push(LutLayer::new(tables, connections)?);
        width = luts;
    }
    let per_class = terminal_luts / data.classes;
    let head: Vec<u16> = (0..terminal_luts).map(|i| (i / per_class) as u16).collect();
    let mut net = LutNetwork::new(binarizer, layers, head, data.classes)?;

    // Precompute the binarized inputs once; only tables change during
    // training.
    let input_bits: Vec<Vec<bool>> = data
        .features
        .iter()
        .map(|x| net.binarizer.encode(x))
        .collect::<Result<_, _>>()?;

    let initial_loss = loss_of(&net, &input_bits, &data.labels);
    let mut current = initial_loss;
    let mut accepted = 0u32;
    let mut passes_run = 0u32;
    let mut trace = Vec::new();
    for _ in 0..config.passes {
        passes_run += 1;
        let mut accepted_this_pass = 0u32;
        for layer_idx in 0..net.layers.len() {
            for lut_idx in 0..net.layers[layer_idx].luts.len() {
                let entries = net.layers[layer_idx].luts[lut_idx].len();
                for entry in 0..entries {
                    let lut = &mut net.layers[layer_idx].luts[lut_idx];
                    let bit = lut.get(entry).expect("in range");
                    lut.set(entry, !bit).expect("in range");
                    let candidate = loss_of(&net, &input_bits, &data.labels);
                    if candidate < current {
                        current = candidate;
                        accepted += 1;
                        accepted_this_pass += 1;
                        trace.push(candidate);
                    } else {
                        let lut = &mut net.layers[layer_idx].luts[lut_idx];
                        lut.set(entry, bit).expect("in range");
                    }
                }
            }
        }
        if accepted_this_pass == 0 {
            break;
        }
    }

    Ok((
        net,
        LutTrainReport {
            initial_loss,
            final_loss: current,
            accepted_flips: accepted,
            passes_run,
            loss_trace: trace,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::Network;

    fn xor_dataset() -> Dataset {
        let patterns = [(0.0, 0.0, 0usize), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)];
        let mut features = Vec::new();
        let mut labels = Vec::new();
        // Repeat the four patterns so margins accumulate.
        for _ in 0..4 {
            for &(a, b, label) in &patterns {
                features.push(vec![a, b]);
                labels.push(label);
            }
        }
        Dataset { name: "xor".into(), features, labels, classes: 2 }
    }

    #[test]
    fn single_k2_layer_learns_xor() {
        let data = xor_dataset();
        let config = LutTrainConfig {
            layers: vec![(2, 2)],
            thresholds_per_feature: 1,
            passes: 6,
            seed: 3,
        };
        let (net, report) = train_lut(&data, &config).unwrap();
        assert_eq!(report.final_loss.0, 0, "XOR should be fit exactly: {report:?}");
        let wrapped = Network::Lut(net);
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, &label)| {
                crate::netsim::predict(&wrapped.forward(x).unwrap()) == Some(label)
            })
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn zero_passes_returns_random_tables() {
        let data = xor_dataset();
        let config = LutTrainConfig {
            layers: vec![(2, 2)],
            thresholds_per_feature: 1,
            passes: 0,
            seed: 3,
        };
        let (_, report) = train_lut(&data, &config).unwrap();
        assert_eq!(report.passes_run, 0);
        assert_eq!(report.accepted_flips, 0);
        assert_eq!(report.initial_loss, report.final_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let data = crate::dataset::make_synthetic(crate::dataset::SyntheticKind::Blobs, 30, 2, 9);
        let config = LutTrainConfig {
            layers: vec![(8, 3), (8, 3)],
            thresholds_per_feature: 2,
            passes: 2,
            seed: 21,
        };
        let (a, ra) = train_lut(&data, &config).unwrap();
        let (b, rb) = train_lut(&data, &config).unwrap();
        assert_eq!(ra.final_loss, rb.final_loss);
        let text_a = crate::netsim::write_model(&Network::Lut(a));
        let text_b = crate::netsim::write_model(&Network::Lut(b));
        assert_eq!(text_a, text_b, "bit-identical network on repeat");
    }

    #[test]
    fn loss_trace_is_strictly_decreasing() {
        let data = crate::dataset::make_synthetic(crate::dataset::SyntheticKind::Blobs, 40, 2, 4);
        let config = LutTrainConfig {
            layers: vec![(12, 3)],
            thresholds_per_feature: 3,
            passes: 3,
            seed: 5,
        };
        let (_, report) = train_lut(&data, &config).unwrap();
        let mut last = report.initial_loss;
        for &step in &report.loss_trace {
            assert!(step < last, "greedy descent never accepts a non-improving flip");
            last = step;
        }
        assert!(report.final_loss <= report.initial_loss);
    }

    #[test]
    fn terminal_bin_mismatch_is_rejected() {
        let data = xor_dataset();
        let config = LutTrainConfig {
            layers: vec![(3, 2)],
            thresholds_per_feature: 1,
            passes: 1,
            seed: 0,
        };
        assert!(train_lut(&data, &config).is_err());
    }
}
