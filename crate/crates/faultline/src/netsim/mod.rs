//! Forward inference for small MLPs and LUT networks whose parameters live
//! as raw bits, plus corruption application, accuracy evaluation, and a
//! bit-exact text serialization.
//!
//! The clean network is immutable and shareable; each Monte Carlo trial
//! materializes a private corrupted copy, so concurrent trials never share
//! mutable state.

mod corrupt;
mod eval;
mod serialize;

pub use corrupt::{corrupt_lut, corrupt_mlp, corrupt_network, flippable_bits};
pub use eval::{
    clean_logits, evaluate, evaluate_seq, predict, run_trials, run_trials_seq, EvalReport,
    TrialStat,
};
pub use serialize::{load_model, parse_model, save_model, write_model};

use thiserror::Error;

use crate::formats::{
    AffineQuantLayerParams, BitWord, FloatValue, FormatError, LutTable, NumericFormat,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Fault(#[from] crate::fault::FaultError),
    #[error("dimension mismatch: {context}")]
    Dimension { context: String },
    #[error("connection index {index} out of range (previous layer width {width})")]
    BadConnection { index: u32, width: usize },
    #[error("head assigns class {class} but network has {classes} classes")]
    BadHead { class: u16, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("flip count {flips} exceeds table size {size}")]
    TooManyFlips { flips: u32, size: usize },
    #[error("model parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn dim_err(context: impl Into<String>) -> NetError {
    NetError::Dimension { context: context.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    /// x >= 0 maps to +1, x < 0 to -1; NaN propagates.
    Sign,
    /// Temperature sigmoid; tau = 0 is the step function.
    Sigmoid { tau: f64 },
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        if x.is_nan() {
            return x;
        }
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sign => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Activation::Sigmoid { tau } => crate::analytic::sigmoid_tau(x, *tau),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Relu => "relu".into(),
            Activation::Tanh => "tanh".into(),
            Activation::Sign => "sign".into(),
            Activation::Sigmoid { tau } => format!("sigmoid:{tau}"),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sign" => Some(Activation::Sign),
            _ => text
                .strip_prefix("sigmoid:")
                .and_then(|tau| tau.parse::<f64>().ok())
                .filter(|tau| *tau >= 0.0)
                .map(|tau| Activation::Sigmoid { tau }),
        }
    }
}

/// One dense layer: a weight-word matrix (rows are output neurons), the word
/// format, optional shared affine-quantization parameters, the activation,
/// and an optional sparsity mask. Masked-out weights contribute zero to the
/// forward pass and are excluded from the flippable-bit population.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Vec<Vec<BitWord>>,
    pub fmt: NumericFormat,
    pub aq: Option<AffineQuantLayerParams>,
    pub activation: Activation,
    pub mask: Option<Vec<Vec<bool>>>,
}

impl DenseLayer {
    pub fn new(
        weights: Vec<Vec<BitWord>>,
        fmt: NumericFormat,
        aq: Option<AffineQuantLayerParams>,
        activation: Activation,
        mask: Option<Vec<Vec<bool>>>,
    ) -> Result<Self, NetError> {
        let out = weights.len();
        if out == 0 {
            return Err(dim_err("layer has no output rows"));
        }
        let fan_in = weights[0].len();
        if fan_in == 0 {
            return Err(dim_err("layer has no inputs"));
        }
        for row in &weights {
            if row.len() != fan_in {
                return Err(dim_err("ragged weight matrix"));
            }
            for w in row {
                if w.width() != fmt.width() {
                    return Err(NetError::Format(FormatError::WidthMismatch {
                        expected: fmt.width(),
                        got: w.width(),
                    }));
                }
            }
        }
        if let Some(aq) = &aq {
            match fmt {
                NumericFormat::Int(int_fmt) if int_fmt == *aq.weight_fmt() => {}
                _ => return Err(dim_err("affine-quantized layer must store integer words in the shared weight format")),
            }
        }
        if let Some(mask) = &mask {
            if mask.len() != out || mask.iter().any(|r| r.len() != fan_in) {
                return Err(dim_err("mask shape differs from weight matrix"));
            }
        }
        Ok(Self { weights, fmt, aq, activation, mask })
    }

    pub fn output_size(&self) -> usize {
        self.weights.len()
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].len()
    }

    pub fn is_active(&self, row: usize, col: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[row][col])
    }

    pub fn active_weight_count(&self) -> u64 {
        match &self.mask {
            None => (self.output_size() * self.input_size()) as u64,
            Some(mask) => mask
                .iter()
                .map(|row| row.iter().filter(|&&a| a).count() as u64)
                .sum(),
        }
    }

    /// Decoded value of one weight: zero when masked out, S(q - Z) for
    /// affine-quantized layers, otherwise the format decode. Special float
    /// patterns decode to the corresponding f64 special.
    pub fn decode_weight(&self, row: usize, col: usize) -> f64 {
        if !self.is_active(row, col) {
            return 0.0;
        }
        let word = &self.weights[row][col];
        match &self.aq {
            Some(aq) => {
                let q = aq
                    .weight_fmt()
                    .decode(word)
                    .expect("validated width");
                let scale = aq.scale_fmt().decode(aq.scale_word()).expect("validated width");
                let zero = aq.zero_fmt().decode(aq.zero_word()).expect("validated width");
                scale.to_f64() * (q - zero) as f64
            }
            None => match self.fmt.decode(word).expect("validated width") {
                FloatValue::Finite(v) => v,
                special => special.to_f64(),
            },
        }
    }

    /// Dense f64 view of the layer's weights.
    pub fn decoded_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.output_size())
            .map(|i| (0..self.input_size()).map(|j| self.decode_weight(i, j)).collect())
            .collect()
    }
}

/// A layered perceptron over raw-bit weights. With `augment_bias`, every
/// layer's input vector gets a trailing constant 1.0, so biases are ordinary
/// corruptible weights in the last column.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    pub features: usize,
    pub layers: Vec<DenseLayer>,
    pub augment_bias: bool,
    pub classes: usize,
}

impl MlpNetwork {
    pub fn new(
        features: usize,
        layers: Vec<DenseLayer>,
        augment_bias: bool,
        classes: usize,
    ) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(dim_err("network has no layers"));
        }
        let bias = usize::from(augment_bias);
        let mut expected_in = features + bias;
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_size() != expected_in {
                return Err(dim_err(format!(
                    "layer {i} expects {} inputs but receives {expected_in}",
                    layer.input_size()
                )));
            }
            expected_in = layer.output_size() + bias;
        }
        let out = layers.last().unwrap().output_size();
        if out != classes {
            return Err(dim_err(format!(
                "final layer emits {out} logits for {classes} classes"
            )));
        }
        Ok(Self { features, layers, augment_bias, classes })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.features {
            return Err(dim_err(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.features
            )));
        }
        let decoded: Vec<Vec<Vec<f64>>> =
            self.layers.iter().map(DenseLayer::decoded_matrix).collect();
        Ok(forward_decoded(self, &decoded, input))
    }
}

/// Forward pass over a pre-decoded weight view; used by the evaluator so a
/// corrupted network is decoded once per trial, not once per example.
pub(crate) fn forward_decoded(
    net: &MlpNetwork,
    decoded: &[Vec<Vec<f64>>],
    input: &[f64],
) -> Vec<f64> {
    let mut activations: Vec<f64> = input.to_vec();
    for (layer, matrix) in net.layers.iter().zip(decoded) {
        if net.augment_bias {
            activations.push(1.0);
        }
        let mut next = Vec::with_capacity(matrix.len());
        for row in matrix {
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(&activations) {
                acc += w * x;
            }
            next.push(layer.activation.apply(acc));
        }
        activations = next;
    }
    activations
}

pub fn mlp_forward(net: &MlpNetwork, input: &[f64]) -> Result<Vec<f64>, NetError> {
    net.forward(input)
}

/// Per-feature thermometer binarizer: feature f emits one bit per threshold,
/// set when the value is at or above it.
#[derive(Debug, Clone, PartialEq)]
pub struct Binarizer {
    pub thresholds: Vec<Vec<f64>>,
}

impl Binarizer {
    /// Uniformly spaced thresholds strictly inside each feature's observed
    /// range.
    pub fn fit(ranges: &[(f64, f64)], thresholds_per_feature: usize) -> Self {
        let thresholds = ranges
            .iter()
            .map(|&(lo, hi)| {
                (0..thresholds_per_feature)
                    .map(|i| lo + (hi - lo) * (i as f64 + 1.0) / (thresholds_per_feature as f64 + 1.0))
                    .collect()
            })
            .collect();
        Self { thresholds }
    }

    pub fn feature_count(&self) -> usize {
        self.thresholds.len()
    }

    pub fn bit_count(&self) -> usize {
        self.thresholds.iter().map(Vec::len).sum()
    }

    pub fn encode(&self, input: &[f64]) -> Result<Vec<bool>, NetError> {
        if input.len() != self.feature_count() {
            return Err(dim_err(format!(
                "binarizer expects {} features, got {}",
                self.feature_count(),
                input.len()
            )));
        }
        let mut bits = Vec::with_capacity(self.bit_count());
        for (value, ts) in input.iter().zip(&self.thresholds) {
            for t in ts {
                bits.push(value >= t);
            }
        }
        Ok(bits)
    }
}

/// One LUT layer: tables plus, per LUT, the indices of its inputs in the
/// previous layer's output vector. Connection j supplies address bit j
/// (least significant first). Connectivity is fixed at construction.
#[derive(Debug, Clone)]
pub struct LutLayer {
    pub luts: Vec<LutTable>,
    pub connections: Vec<Vec<u32>>,
}

impl LutLayer {
    pub fn new(luts: Vec<LutTable>, connections: Vec<Vec<u32>>) -> Result<Self, NetError> {
        if luts.len() != connections.len() {
            return Err(dim_err("one connection list per LUT required"));
        }
        for (lut, conn) in luts.iter().zip(&connections) {
            if conn.len() != usize::from(lut.fan_in()) {
                return Err(dim_err(format!(
                    "LUT with fan-in {} has {} connections",
                    lut.fan_in(),
                    conn.len()
                )));
            }
        }
        Ok(Self { luts, connections })
    }

    pub fn output_size(&self) -> usize {
        self.luts.len()
    }

    fn validate_input_width(&self, width: usize) -> Result<(), NetError> {
        for conn in &self.connections {
            for &index in conn {
                if index as usize >= width {
                    return Err(NetError::BadConnection { index, width });
                }
            }
        }
        Ok(())
    }

    fn forward(&self, input: &[bool]) -> Vec<bool> {
        self.luts
            .iter()
            .zip(&self.connections)
            .map(|(lut, conn)| {
                let mut address = 0usize;
                for (bit_pos, &src) in conn.iter().enumerate() {
                    if input[src as usize] {
                        address |= 1 << bit_pos;
                    }
                }
                lut.get(address).expect("address within fan-in range")
            })
            .collect()
    }
}

/// A weightless network: thermometer binarizer, LUT layers, and a popcount
/// head. `head[i]` is the class whose logit counts terminal output i; the
/// head bins partition the terminal outputs.
#[derive(Debug, Clone)]
pub struct LutNetwork {
    pub binarizer: Binarizer,
    pub layers: Vec<LutLayer>,
    pub head: Vec<u16>,
    pub classes: usize,
}

impl LutNetwork {
    pub fn new(
        binarizer: Binarizer,
        layers: Vec<LutLayer>,
        head: Vec<u16>,
        classes: usize,
    ) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(dim_err("network has no LUT layers"));
        }
        let mut width = binarizer.bit_count();
        for layer in &layers {
            layer.validate_input_width(width)?;
            width = layer.output_size();
        }
        if head.len() != width {
            return Err(dim_err(format!(
                "head assigns {} outputs but terminal layer has {width}",
                head.len()
            )));
        }
        for &class in &head {
            if usize::from(class) >= classes {
                return Err(NetError::BadHead { class, classes });
            }
        }
        Ok(Self { binarizer, layers, head, classes })
    }

    /// Terminal LUT output bits for one input.
    pub fn terminal_bits(&self, input: &[f64]) -> Result<Vec<bool>, NetError> {
        let mut bits = self.binarizer.encode(input)?;
        for layer in &self.layers {
            bits = layer.forward(&bits);
        }
        Ok(bits)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        let (_, logits) = self.forward_bits(input)?;
        Ok(logits)
    }

    pub fn forward_bits(&self, input: &[f64]) -> Result<(Vec<bool>, Vec<f64>), NetError> {
        let bits = self.terminal_bits(input)?;
        let mut logits = vec![0.0; self.classes];
        for (bit, &class) in bits.iter().zip(&self.head) {
            if *bit {
                logits[usize::from(class)] += 1.0;
            }
        }
        Ok((bits, logits))
    }

    /// Full trace of every LUT's address and output per layer.
    pub fn forward_trace(&self, input: &[f64]) -> Result<LutTrace, NetError> {
        let mut bits = self.binarizer.encode(input)?;
        let mut addresses = Vec::with_capacity(self.layers.len());
        let mut layer_bits = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let addrs: Vec<usize> = layer
                .connections
                .iter()
                .map(|conn| {
                    let mut address = 0usize;
                    for (bit_pos, &src) in conn.iter().enumerate() {
                        if bits[src as usize] {
                            address |= 1 << bit_pos;
                        }
                    }
                    address
                })
                .collect();
            bits = layer
                .luts
                .iter()
                .zip(&addrs)
                .map(|(lut, &a)| lut.get(a).expect("address in range"))
                .collect();
            addresses.push(addrs);
            layer_bits.push(bits.clone());
        }
        Ok(LutTrace { addresses, bits: layer_bits })
    }
}

/// Addresses and output bits of every LUT, layer by layer.
#[derive(Debug, Clone)]
pub struct LutTrace {
    pub addresses: Vec<Vec<usize>>,
    pub bits: Vec<Vec<bool>>,
}

pub fn lut_forward(net: &LutNetwork, input: &[f64]) -> Result<Vec<f64>, NetError> {
    net.forward(input)
}

pub fn lut_forward_bits(net: &LutNetwork, input: &[f64]) -> Result<(Vec<bool>, Vec<f64>), NetError> {
    net.forward_bits(input)
}

/// Expected absolute output error of a single LUT with `flips` corrupted
/// entries under uniformly distributed addresses: flips / 2^K.
pub fn address_error_rate(lut: &LutTable, flips: u32) -> Result<f64, NetError> {
    let size = lut.len();
    if flips as usize > size {
        return Err(NetError::TooManyFlips { flips, size });
    }
    Ok(f64::from(flips) / size as f64)
}

#[derive(Debug, Clone)]
pub enum Network {
    Mlp(MlpNetwork),
    Lut(LutNetwork),
}

impl Network {
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        match self {
            Network::Mlp(net) => net.forward(input),
            Network::Lut(net) => net.forward(input),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Network::Mlp(net) => net.classes,
            Network::Lut(net) => net.classes,
        }
    }

    /// Short format tag for reports, e.g. `fp32`, `aq-int8`, `bnn`, `lut-k4`.
    pub fn format_label(&self) -> String {
        match self {
            Network::Mlp(net) => {
                let layer = &net.layers[0];
                if let Some(aq) = &layer.aq {
                    return format!("aq-int{}", aq.weight_fmt().bits());
                }
                match layer.fmt {
                    NumericFormat::Binary => "bnn".into(),
                    NumericFormat::Int(f) => format!("int{}", f.bits()),
                    NumericFormat::Float(f) => format!("fp{}", f.width()),
                }
            }
            Network::Lut(net) => {
                let k = net.layers[0].luts.first().map_or(0, |l| l.fan_in());
                format!("lut-k{k}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{FloatFormat, IntFormat};

    fn float_layer(weights: Vec<Vec<f64>>, activation: Activation) -> DenseLayer {
        let fmt = FloatFormat::fp32();
        let words = weights
            .iter()
            .map(|row| row.iter().map(|&w| fmt.encode(w).unwrap()).collect())
            .collect();
        DenseLayer::new(words, NumericFormat::Float(fmt), None, activation, None).unwrap()
    }

    #[test]
    fn identity_single_weight_passes_input_through() {
        let net = MlpNetwork::new(
            1,
            vec![float_layer(vec![vec![1.0]], Activation::Identity)],
            false,
            1,
        )
        .unwrap();
        assert_eq!(net.forward(&[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let net = MlpNetwork::new(
            2,
            vec![float_layer(vec![vec![0.0, 0.0], vec![0.0, 0.0]], Activation::Identity)],
            false,
            2,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_forward_matches_hand_computation() {
        // Hidden relu layer then identity readout, with bias columns.
        let hidden = float_layer(
            vec![vec![1.0, -1.0, 0.5], vec![2.0, 0.0, -1.0]],
            Activation::Relu,
        );
        let readout = float_layer(vec![vec![1.0, 1.0, 0.0], vec![-1.0, 2.0, 1.0]], Activation::Identity);
        let net = MlpNetwork::new(2, vec![hidden, readout], true, 2).unwrap();
        let x = [0.5, 2.0];
        // h1 = relu(0.5 - 2.0 + 0.5) = 0, h2 = relu(1.0 + 0 - 1.0) = 0 -> wait:
        // h2 = relu(2*0.5 + 0*2.0 - 1.0) = relu(0) = 0
        // logits = [h1 + h2 + 0, -h1 + 2 h2 + 1] = [0, 1]
        assert_eq!(net.forward(&x).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn masked_weights_decode_to_zero() {
        let fmt = IntFormat::new(4).unwrap();
        let words = vec![vec![fmt.encode(7).unwrap(), fmt.encode(-8).unwrap()]];
        let layer = DenseLayer::new(
            words,
            NumericFormat::Int(fmt),
            None,
            Activation::Identity,
            Some(vec![vec![false, true]]),
        )
        .unwrap();
        assert_eq!(layer.decode_weight(0, 0), 0.0);
        assert_eq!(layer.decode_weight(0, 1), -8.0);
        assert_eq!(layer.active_weight_count(), 1);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let layer = float_layer(vec![vec![1.0, 2.0]], Activation::Identity);
        assert!(MlpNetwork::new(2, vec![layer.clone()], true, 1).is_err());
        let net = MlpNetwork::new(2, vec![layer], false, 1).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn activation_special_handling() {
        assert!(Activation::Relu.apply(f64::NAN).is_nan());
        assert_eq!(Activation::Relu.apply(f64::NEG_INFINITY), 0.0);
        assert_eq!(Activation::Relu.apply(f64::INFINITY), f64::INFINITY);
        assert_eq!(Activation::Sign.apply(0.0), 1.0);
        assert_eq!(Activation::Sign.apply(-0.1), -1.0);
        assert!(Activation::Sign.apply(f64::NAN).is_nan());
        assert_eq!(Activation::Sigmoid { tau: 0.0 }.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid { tau: 0.0 }.apply(1e-12), 1.0);
    }

    fn xor_lut_net() -> LutNetwork {
        // Single K=2 LUT storing XOR over two raw binary features.
        let binarizer = Binarizer::fit(&[(0.0, 1.0), (0.0, 1.0)], 1);
        let entries = BitWord::from_bit_string("0110").unwrap(); // addr 1,2 set
        let lut = LutTable::new(2, entries).unwrap();
        let layer = LutLayer::new(vec![lut], vec![vec![0, 1]]).unwrap();
        LutNetwork::new(binarizer, vec![layer], vec![0], 1).unwrap()
    }

    #[test]
    fn lut_reads_truth_table() {
        let net = xor_lut_net();
        // (1, 0): address 0b01 = 1 -> XOR = 1
        let (bits, logits) = net.forward_bits(&[1.0, 0.0]).unwrap();
        assert_eq!(bits, vec![true]);
        assert_eq!(logits, vec![1.0]);
        let (bits, _) = net.forward_bits(&[1.0, 1.0]).unwrap();
        assert_eq!(bits, vec![false]);
    }

    #[test]
    fn all_zero_tables_give_zero_logits() {
        let binarizer = Binarizer::fit(&[(0.0, 1.0)], 2);
        let luts = vec![LutTable::zeros(2).unwrap(), LutTable::zeros(2).unwrap()];
        let layer = LutLayer::new(luts, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let net = LutNetwork::new(binarizer, vec![layer], vec![0, 1], 2).unwrap();
        let logits = net.forward(&[0.7]).unwrap();
        assert_eq!(logits, vec![0.0, 0.0]);
        // Tie resolves to class 0 downstream.
        assert_eq!(eval::predict(&logits), Some(0));
    }

    #[test]
    fn two_layer_lut_matches_hand_trace() {
        // Layer 1: two K=1 LUTs, identity and negation of the two input bits.
        // Layer 2: one K=2 AND over their outputs.
        let binarizer = Binarizer::fit(&[(0.0, 1.0), (0.0, 1.0)], 1);
        let identity = LutTable::new(1, BitWord::from_bit_string("10").unwrap()).unwrap();
        let negation = LutTable::new(1, BitWord::from_bit_string("01").unwrap()).unwrap();
        let l1 = LutLayer::new(vec![identity, negation], vec![vec![0], vec![1]]).unwrap();
        let and_table = LutTable::new(2, BitWord::from_bit_string("1000").unwrap()).unwrap();
        let l2 = LutLayer::new(vec![and_table], vec![vec![0, 1]]).unwrap();
        let net = LutNetwork::new(binarizer, vec![l1, l2], vec![0], 1).unwrap();
        // x = (1, 0): layer1 = (1, not 0 = 1); AND -> 1.
        assert_eq!(net.forward(&[1.0, 0.0]).unwrap(), vec![1.0]);
        // x = (1, 1): layer1 = (1, 0); AND -> 0.
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![0.0]);
        let trace = net.forward_trace(&[1.0, 0.0]).unwrap();
        assert_eq!(trace.addresses[0], vec![1, 0]);
        assert_eq!(trace.bits[0], vec![true, true]);
        assert_eq!(trace.addresses[1], vec![3]);
    }

    #[test]
    fn address_error_rate_values() {
        let t3 = LutTable::zeros(3).unwrap();
        assert_eq!(address_error_rate(&t3, 1).unwrap(), 1.0 / 8.0);
        assert_eq!(address_error_rate(&t3, 0).unwrap(), 0.0);
        let t2 = LutTable::zeros(2).unwrap();
        assert_eq!(address_error_rate(&t2, 4).unwrap(), 1.0);
        assert!(address_error_rate(&t2, 5).is_err());
    }

    #[test]
    fn bad_connection_rejected() {
        let binarizer = Binarizer::fit(&[(0.0, 1.0)], 1);
        let lut = LutTable::zeros(1).unwrap();
        let layer = LutLayer::new(vec![lut], vec![vec![3]]).unwrap();
        assert!(LutNetwork::new(binarizer, vec![layer], vec![0], 1).is_err());
    }
}
