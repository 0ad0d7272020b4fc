//! Full-batch gradient-descent MLP trainer over f64 latent weights, with
//! materialization into float, affine-quantized, or binary stored networks.
//!
//! Biases are realized as an extra constant-one input column on every layer,
//! so they are ordinary corruptible weights downstream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::formats::{
    AffineQuantLayerParams, BitWord, FloatFormat, IntFormat, NumericFormat,
};
use crate::netsim::{Activation, DenseLayer, MlpNetwork};

use super::{bad_config, TargetFormat, TrainConfig, TrainError};

#[derive(Debug, Clone)]
pub struct LatentLayer {
    /// [output][input + 1] with the bias in the trailing column.
    pub weights: Vec<Vec<f64>>,
    pub activation: Activation,
    /// Sparsity mask; pruned entries stay zero and frozen.
    pub mask: Option<Vec<Vec<bool>>>,
}

impl LatentLayer {
    fn active(&self, row: usize, col: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[row][col])
    }
}

/// Trained full-precision network, the source for every materialized format.
#[derive(Debug, Clone)]
pub struct LatentMlp {
    pub features: usize,
    pub classes: usize,
    pub layers: Vec<LatentLayer>,
}

/// Sign has no usable gradient; train through tanh and restore sign in the
/// stored network.
fn surrogate(activation: Activation) -> Activation {
    match activation {
        Activation::Sign => Activation::Tanh,
        other => other,
    }
}

fn activation_derivative(activation: Activation, pre: f64, post: f64) -> f64 {
    match activation {
        Activation::Identity => 1.0,
        Activation::Relu => {
            if pre > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => 1.0 - post * post,
        Activation::Sigmoid { tau } => {
            if tau == 0.0 {
                0.0
            } else {
                post * (1.0 - post) / tau
            }
        }
        Activation::Sign => 0.0,
    }
}

impl LatentMlp {
    /// Logits under the stored (non-surrogate) activations.
    pub fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input, false).1
    }

    /// (per-layer post-activations, logits). With `train_mode`, sign layers
    /// run their tanh surrogate.
    fn forward(&self, input: &[f64], train_mode: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            current.push(1.0);
            let act = if train_mode { surrogate(layer.activation) } else { layer.activation };
            let out: Vec<f64> = layer
                .weights
                .iter()
                .map(|row| {
                    let pre: f64 = row.iter().zip(&current).map(|(w, x)| w * x).sum();
                    act.apply(pre)
                })
                .collect();
            acts.push(out.clone());
            current = out;
        }
        let logits = acts.last().cloned().unwrap_or_default();
        (acts, logits)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, &label)| {
                crate::netsim::predict(&self.logits(x)) == Some(label)
            })
            .count();
        correct as f64 / data.len() as f64
    }

    /// Mean softmax cross-entropy under training activations.
    pub fn train_loss(&self, data: &Dataset) -> f64 {
        let mut total = 0.0;
        for (x, &label) in data.features.iter().zip(&data.labels) {
            let (_, logits) = self.forward(x, true);
            let probs = softmax(&logits);
            // ln(0) = -inf: a fully saturated wrong prediction is exactly
            // the non-finite-loss divergence signal.
            total -= probs[label].ln();
        }
        total / data.len() as f64
    }

    /// One full-batch gradient step; returns the epoch's mean loss.
    fn gradient_step(&mut self, data: &Dataset, lr: f64) -> f64 {
        let layer_count = self.layers.len();
        let mut grads: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| vec![vec![0.0; l.weights[0].len()]; l.weights.len()])
            .collect();
        let mut loss = 0.0;
        let scale = 1.0 / data.len() as f64;
        for (x, &label) in data.features.iter().zip(&data.labels) {
            // Forward with cached pre- and post-activations.
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
            let mut pres: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
            let mut posts: Vec<Vec<f64>> = Vec::with_capacity(layer_count);
            let mut current = x.clone();
            for layer in &self.layers {
                current.push(1.0);
                let act = surrogate(layer.activation);
                let pre: Vec<f64> = layer
                    .weights
                    .iter()
                    .map(|row| row.iter().zip(&current).map(|(w, v)| w * v).sum())
                    .collect();
                let post: Vec<f64> = pre.iter().map(|&z| act.apply(z)).collect();
                inputs.push(current.clone());
                pres.push(pre);
                posts.push(post.clone());
                current = post;
            }
            let probs = softmax(&current);
            loss -= probs[label].ln() * scale;

            // Backward.
            let mut delta: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(c, &p)| (p - f64::from(u8::from(c == label))) * scale)
                .collect();
            for l in (0..layer_count).rev() {
                let act = surrogate(self.layers[l].activation);
                // The readout layer is identity; hidden deltas fold in the
                // activation derivative.
                if l == layer_count - 1 {
                    debug_assert!(matches!(act, Activation::Identity));
                } else {
                    for (d, (&pre, &post)) in
                        delta.iter_mut().zip(pres[l].iter().zip(&posts[l]))
                    {
                        *d *= activation_derivative(act, pre, post);
                    }
                }
                for (row, &d) in grads[l].iter_mut().zip(&delta) {
                    for (g, &v) in row.iter_mut().zip(&inputs[l]) {
                        *g += d * v;
                    }
                }
                if l > 0 {
                    let fan_out = self.layers[l - 1].weights.len();
                    let mut next_delta = vec![0.0; fan_out];
                    for (row, &d) in self.layers[l].weights.iter().zip(&delta) {
                        for (nd, &w) in next_delta.iter_mut().zip(row.iter().take(fan_out)) {
                            *nd += d * w;
                        }
                    }
                    delta = next_delta;
                }
            }
        }
        for (layer, grad) in self.layers.iter_mut().zip(&grads) {
            for (i, row) in layer.weights.iter_mut().enumerate() {
                for (j, w) in row.iter_mut().enumerate() {
                    let frozen = layer
                        .mask
                        .as_ref()
                        .map_or(false, |m| !m[i][j]);
                    if !frozen {
                        *w -= lr * grad[i][j];
                    }
                }
            }
        }
        loss
    }

    /// Continue training with the current weights (pruning masks respected).
    pub fn fine_tune(
        &mut self,
        data: &Dataset,
        epochs: u32,
        lr: f64,
    ) -> Result<(), TrainError> {
        for epoch in 0..epochs {
            let loss = self.gradient_step(data, lr);
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, loss });
            }
        }
        Ok(())
    }

    /// Mask the smallest-magnitude fraction of each layer's weights, ties
    /// broken by flat index. Masked weights are zeroed and frozen.
    pub fn prune_magnitude(&self, fraction: f64) -> Result<LatentMlp, TrainError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(bad_config("prune fraction must lie in [0, 1)"));
        }
        let mut out = self.clone();
        if fraction == 0.0 {
            return Ok(out);
        }
        for layer in &mut out.layers {
            let cols = layer.weights[0].len();
            let total = layer.weights.len() * cols;
            let prune_count = (fraction * total as f64).floor() as usize;
            let mut order: Vec<usize> = (0..total).collect();
            order.sort_by(|&a, &b| {
                let wa = layer.weights[a / cols][a % cols].abs();
                let wb = layer.weights[b / cols][b % cols].abs();
                wa.partial_cmp(&wb).unwrap().then(a.cmp(&b))
            });
            let mut mask = vec![vec![true; cols]; layer.weights.len()];
            for &flat in order.iter().take(prune_count) {
                mask[flat / cols][flat % cols] = false;
                layer.weights[flat / cols][flat % cols] = 0.0;
            }
            layer.mask = Some(mask);
        }
        Ok(out)
    }

    /// Encode every weight into the float format.
    pub fn to_float_network(&self, fmt: FloatFormat) -> Result<MlpNetwork, TrainError> {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let words = layer
                    .weights
                    .iter()
                    .map(|row| row.iter().map(|&w| fmt.encode(w)).collect())
                    .collect::<Result<Vec<Vec<BitWord>>, _>>()?;
                DenseLayer::new(
                    words,
                    NumericFormat::Float(fmt),
                    None,
                    layer.activation,
                    layer.mask.clone(),
                )
                .map_err(TrainError::Net)
            })
            .collect::<Result<Vec<_>, _>>()?;
        MlpNetwork::new(self.features, layers, true, self.classes).map_err(Into::into)
    }

    /// Per-layer asymmetric min/max affine quantization into two's
    /// complement words: S = (max - min) / (2^B - 1) encoded into the scale
    /// format, Z = qmin - round(min / S), q = clamp(round(w / S + Z)).
    /// Dequantized weights land within S/2 of the originals.
    pub fn quantize_affine(
        &self,
        weight_bits: u8,
        scale_fmt: FloatFormat,
        zero_bits: u8,
    ) -> Result<MlpNetwork, TrainError> {
        let weight_fmt = IntFormat::new(weight_bits)?;
        let zero_fmt = IntFormat::new(zero_bits)?;
        let layers = self
            .layers
            .iter()
            .map(|layer| self.quantize_layer(layer, weight_fmt, scale_fmt, zero_fmt))
            .collect::<Result<Vec<_>, _>>()?;
        MlpNetwork::new(self.features, layers, true, self.classes).map_err(Into::into)
    }

    fn quantize_layer(
        &self,
        layer: &LatentLayer,
        weight_fmt: IntFormat,
        scale_fmt: FloatFormat,
        zero_fmt: IntFormat,
    ) -> Result<DenseLayer, TrainError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, row) in layer.weights.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if layer.active(i, j) {
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
            }
        }
        let qmin = weight_fmt.min_value();
        let qmax = weight_fmt.max_value();
        let levels = (qmax - qmin) as f64;
        let scale_word = if !(hi > lo) {
            // Degenerate layer: all active weights equal. Use the smallest
            // positive representable scale and a zero offset.
            scale_fmt.encode(scale_fmt.smallest_positive())?
        } else {
            let word = scale_fmt.encode((hi - lo) / levels)?;
            // Tiny ranges can round to a zero scale in ieee-like formats;
            // bump to the smallest positive so dequantization stays defined.
            if scale_fmt.decode(&word)?.to_f64() > 0.0 {
                word
            } else {
                scale_fmt.encode(scale_fmt.smallest_positive())?
            }
        };
        // Quantize against the stored scale so the bits are self-consistent.
        let scale = scale_fmt.decode(&scale_word)?.to_f64();
        let zero = if hi > lo {
            (qmin as f64 - (lo / scale).round_ties_even())
                .clamp(zero_fmt.min_value() as f64, zero_fmt.max_value() as f64) as i64
        } else {
            0
        };
        let zero_word = zero_fmt.encode(zero)?;
        let params = AffineQuantLayerParams::new(
            scale_word, scale_fmt, zero_word, zero_fmt, weight_fmt,
        )?;
        let words = layer
            .weights
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&w| {
                        let q = (w / scale + zero as f64)
                            .round_ties_even()
                            .clamp(qmin as f64, qmax as f64) as i64;
                        weight_fmt.encode(q)
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<BitWord>>, _>>()?;
        DenseLayer::new(
            words,
            NumericFormat::Int(weight_fmt),
            Some(params),
            layer.activation,
            layer.mask.clone(),
        )
        .map_err(Into::into)
    }

    /// Sign of each latent weight into one-bit words; zero maps to +1.
    pub fn binarize(&self) -> Result<MlpNetwork, TrainError> {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let words = layer
                    .weights
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&w| BitWord::new(u64::from(w >= 0.0), 1))
                            .collect()
                    })
                    .collect::<Result<Vec<Vec<BitWord>>, _>>()?;
                DenseLayer::new(
                    words,
                    NumericFormat::Binary,
                    None,
                    layer.activation,
                    layer.mask.clone(),
                )
                .map_err(TrainError::Net)
            })
            .collect::<Result<Vec<_>, _>>()?;
        MlpNetwork::new(self.features, layers, true, self.classes).map_err(Into::into)
    }

    pub fn materialize(&self, target: &TargetFormat) -> Result<MlpNetwork, TrainError> {
        match target {
            TargetFormat::Float(fmt) => self.to_float_network(*fmt),
            TargetFormat::AffineInt { weight_bits, zero_bits, scale_fmt } => {
                self.quantize_affine(*weight_bits, *scale_fmt, *zero_bits)
            }
            TargetFormat::Binary => self.binarize(),
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Train a full-precision MLP with full-batch gradient descent.
pub fn train_mlp(data: &Dataset, config: &TrainConfig) -> Result<LatentMlp, TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(bad_config("dataset is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dims = Vec::with_capacity(config.depth + 1);
    let mut fan_in = data.feature_count();
    for _ in 0..config.depth {
        dims.push((config.width, fan_in + 1, config.activation));
        fan_in = config.width;
    }
    dims.push((data.classes, fan_in + 1, Activation::Identity));
    let layers = dims
        .into_iter()
        .map(|(out, inputs, activation)| {
            let bound = (6.0 / (inputs + out) as f64).sqrt();
            let weights = (0..out)
                .map(|_| (0..inputs).map(|_| rng.random_range(-bound..bound)).collect())
                .collect();
            LatentLayer { weights, activation, mask: None }
        })
        .collect();
    let mut net = LatentMlp { features: data.feature_count(), classes: data.classes, layers };
    for epoch in 0..config.epochs {
        let loss = net.gradient_step(data, config.learning_rate);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss });
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_synthetic, SyntheticKind};
    use crate::netsim::Network;

    fn blobs() -> Dataset {
        make_synthetic(SyntheticKind::Blobs, 60, 2, 42)
    }

    #[test]
    fn blobs_training_reaches_high_accuracy() {
        let data = blobs();
        let config = TrainConfig { width: 8, depth: 1, epochs: 200, ..TrainConfig::default() };
        let net = train_mlp(&data, &config).unwrap();
        assert!(net.accuracy(&data) >= 0.99, "accuracy {}", net.accuracy(&data));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = blobs();
        let config = TrainConfig { width: 6, depth: 2, epochs: 50, ..TrainConfig::default() };
        let a = train_mlp(&data, &config).unwrap();
        let b = train_mlp(&data, &config).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(la.weights, lb.weights);
        }
    }

    #[test]
    fn untrained_network_sits_near_chance() {
        let data = blobs();
        let mut total = 0.0;
        let seeds = 16;
        for seed in 0..seeds {
            let config = TrainConfig { width: 8, depth: 1, epochs: 0, seed, ..TrainConfig::default() };
            let net = train_mlp(&data, &config).unwrap();
            total += net.accuracy(&data);
        }
        let mean = total / f64::from(seeds as u32);
        assert!((mean - 0.5).abs() < 0.25, "mean accuracy over seeds {mean}");
    }

    #[test]
    fn divergence_is_reported() {
        // Rings are not linearly separable, so an absurd learning rate
        // cannot luck into a zero-loss solution; it saturates wrong
        // predictions instead and the loss goes non-finite.
        let data = make_synthetic(SyntheticKind::Rings, 40, 2, 3);
        let config = TrainConfig {
            width: 8,
            depth: 2,
            epochs: 200,
            learning_rate: 1e18,
            ..TrainConfig::default()
        };
        match train_mlp(&data, &config) {
            Err(TrainError::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rings_defeat_a_linear_model() {
        let data = make_synthetic(SyntheticKind::Rings, 80, 2, 7);
        let config = TrainConfig {
            width: 8,
            depth: 1,
            activation: Activation::Identity,
            epochs: 300,
            ..TrainConfig::default()
        };
        let net = train_mlp(&data, &config).unwrap();
        assert!(net.accuracy(&data) < 0.8, "a linear model cannot separate rings");
    }

    #[test]
    fn quantization_error_is_within_half_step() {
        let data = blobs();
        let config = TrainConfig { width: 8, depth: 1, epochs: 120, ..TrainConfig::default() };
        let latent = train_mlp(&data, &config).unwrap();
        let quantized = latent.quantize_affine(8, crate::formats::FloatFormat::fp16(), 8).unwrap();
        for (llayer, qlayer) in latent.layers.iter().zip(&quantized.layers) {
            let scale = qlayer.aq.as_ref().unwrap().scale();
            for (i, row) in llayer.weights.iter().enumerate() {
                for (j, &w) in row.iter().enumerate() {
                    let dequant = qlayer.decode_weight(i, j);
                    assert!(
                        (dequant - w).abs() <= scale / 2.0 + 1e-12,
                        "|{dequant} - {w}| > {scale}/2"
                    );
                }
            }
        }
    }

    #[test]
    fn quantization_preserves_most_predictions() {
        let data = blobs();
        let config = TrainConfig { width: 8, depth: 1, epochs: 200, ..TrainConfig::default() };
        let latent = train_mlp(&data, &config).unwrap();
        let quantized = Network::Mlp(
            latent.quantize_affine(8, crate::formats::FloatFormat::fp16(), 8).unwrap(),
        );
        let mut agree = 0usize;
        for x in &data.features {
            let a = crate::netsim::predict(&latent.logits(x));
            let b = crate::netsim::predict(&quantized.forward(x).unwrap());
            if a == b {
                agree += 1;
            }
        }
        assert!(agree as f64 / data.len() as f64 >= 0.95);
    }

    #[test]
    fn degenerate_layer_quantizes_with_fallback_scale() {
        let latent = LatentMlp {
            features: 2,
            classes: 2,
            layers: vec![LatentLayer {
                weights: vec![vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]],
                activation: Activation::Identity,
                mask: None,
            }],
        };
        let net = latent.quantize_affine(4, crate::formats::FloatFormat::fp8(), 4).unwrap();
        let aq = net.layers[0].aq.as_ref().unwrap();
        assert!(aq.scale() > 0.0);
        assert_eq!(aq.zero_point(), 0);
    }

    #[test]
    fn binarize_uses_sign_with_zero_positive() {
        let latent = LatentMlp {
            features: 1,
            classes: 2,
            layers: vec![LatentLayer {
                weights: vec![vec![0.3, 0.0], vec![-0.3, -0.0]],
                activation: Activation::Identity,
                mask: None,
            }],
        };
        let net = latent.binarize().unwrap();
        let layer = &net.layers[0];
        assert_eq!(layer.decode_weight(0, 0), 1.0);
        assert_eq!(layer.decode_weight(0, 1), 1.0, "sign(0) is +1");
        assert_eq!(layer.decode_weight(1, 0), -1.0);
        assert_eq!(layer.decode_weight(1, 1), 1.0, "-0.0 is a zero, so it maps to +1");
    }

    #[test]
    fn prune_counts_and_ties() {
        let latent = LatentMlp {
            features: 4,
            classes: 2,
            layers: vec![LatentLayer {
                weights: vec![
                    vec![0.1, 0.2, 0.3, 0.4, 0.5],
                    vec![0.1, 0.2, 0.3, 0.4, 0.5],
                ],
                activation: Activation::Identity,
                mask: None,
            }],
        };
        let pruned = latent.prune_magnitude(0.5).unwrap();
        let mask = pruned.layers[0].mask.as_ref().unwrap();
        let masked: usize = mask.iter().flatten().filter(|&&a| !a).count();
        assert_eq!(masked, 5, "exactly half of 10 weights");
        // Ties (equal magnitudes) resolve by flat index: row 0 pruned first.
        assert!(!mask[0][0] && !mask[0][1]);
        assert!(mask[1][3] && mask[1][4]);
        // Identity when fraction is zero.
        let same = latent.prune_magnitude(0.0).unwrap();
        assert!(same.layers[0].mask.is_none());
    }
}
