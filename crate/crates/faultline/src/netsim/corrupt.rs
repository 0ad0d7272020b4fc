//! Parameter-bit corruption. Every stored word owns a parameter index in a
//! fixed traversal order (documented below), and its flip mask comes from the
//! counter-keyed stream (seed, parameter index, trial). Masks therefore never
//! depend on worker scheduling or on which scope is active.
//!
//! Traversal order: for MLPs, layer by layer, weight rows in order and
//! columns within a row, then the layer's scale word, then its zero-point
//! word. Masked-out (pruned) positions still consume their index but are
//! never flipped. For LUT networks, layer by layer, one index per table.

use crate::fault::{sample_flip_mask, CorruptionScope, CorruptionSpec, FlipStream};
use crate::formats::BitWord;

use super::{LutNetwork, MlpNetwork, NetError, Network};

fn flip_word(
    word: &BitWord,
    spec: &CorruptionSpec,
    param_index: u64,
    trial: u64,
) -> Result<BitWord, NetError> {
    let mut stream = FlipStream::new(spec.seed, param_index, trial);
    let mask = sample_flip_mask(word.width(), spec.ber, &mut stream)?;
    Ok(word.xor(&mask)?)
}

pub fn corrupt_mlp(
    net: &MlpNetwork,
    spec: &CorruptionSpec,
    trial: u64,
) -> Result<MlpNetwork, NetError> {
    let corrupt_weights = matches!(
        spec.scope,
        CorruptionScope::WeightsOnly | CorruptionScope::WeightsAndQuantParams
    );
    let corrupt_quant = matches!(spec.scope, CorruptionScope::WeightsAndQuantParams);
    let mut out = net.clone();
    let mut param_index = 0u64;
    for layer in &mut out.layers {
        for row in 0..layer.weights.len() {
            for col in 0..layer.weights[row].len() {
                let index = param_index;
                param_index += 1;
                if !corrupt_weights || !layer.is_active(row, col) || spec.ber == 0.0 {
                    continue;
                }
                layer.weights[row][col] =
                    flip_word(&layer.weights[row][col], spec, index, trial)?;
            }
        }
        if let Some(aq) = &layer.aq {
            let scale_index = param_index;
            let zero_index = param_index + 1;
            param_index += 2;
            if corrupt_quant && spec.ber > 0.0 {
                let scale_word = flip_word(aq.scale_word(), spec, scale_index, trial)?;
                let zero_word = flip_word(aq.zero_word(), spec, zero_index, trial)?;
                layer.aq = Some(aq.replace_words(scale_word, zero_word));
            }
        }
    }
    Ok(out)
}

pub fn corrupt_lut(
    net: &LutNetwork,
    spec: &CorruptionSpec,
    trial: u64,
) -> Result<LutNetwork, NetError> {
    let mut out = net.clone();
    if spec.ber == 0.0 {
        return Ok(out);
    }
    let mut param_index = 0u64;
    for layer in &mut out.layers {
        for lut in &mut layer.luts {
            let index = param_index;
            param_index += 1;
            let flipped = flip_word(lut.entries(), spec, index, trial)?;
            *lut = crate::formats::LutTable::new(lut.fan_in(), flipped)?;
        }
    }
    Ok(out)
}

/// Corrupted copy of a network; the clean network is untouched.
pub fn corrupt_network(
    net: &Network,
    spec: &CorruptionSpec,
    trial: u64,
) -> Result<Network, NetError> {
    match net {
        Network::Mlp(mlp) => Ok(Network::Mlp(corrupt_mlp(mlp, spec, trial)?)),
        Network::Lut(lut) => Ok(Network::Lut(corrupt_lut(lut, spec, trial)?)),
    }
}

/// Census of bits subject to corruption under the given scope. Masked-out
/// weights are connectivity, not payload, and never count.
pub fn flippable_bits(net: &Network, scope: CorruptionScope) -> u64 {
    match net {
        Network::Mlp(mlp) => {
            let weight_bits: u64 = mlp
                .layers
                .iter()
                .map(|layer| layer.active_weight_count() * u64::from(layer.fmt.width()))
                .sum();
            match scope {
                CorruptionScope::WeightsOnly => weight_bits,
                CorruptionScope::WeightsAndQuantParams => {
                    let quant_bits: u64 = mlp
                        .layers
                        .iter()
                        .filter_map(|layer| layer.aq.as_ref())
                        .map(|aq| {
                            u64::from(aq.scale_word().width()) + u64::from(aq.zero_word().width())
                        })
                        .sum();
                    weight_bits + quant_bits
                }
                CorruptionScope::LutTables => 0,
            }
        }
        Network::Lut(lut) => lut
            .layers
            .iter()
            .flat_map(|layer| layer.luts.iter())
            .map(|l| l.len() as u64)
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{
        AffineQuantLayerParams, FloatFormat, IntFormat, LutTable, NumericFormat,
    };
    use crate::netsim::{Activation, Binarizer, DenseLayer, LutLayer};

    fn small_mlp() -> MlpNetwork {
        let fmt = IntFormat::new(8).unwrap();
        let zero_fmt = IntFormat::new(8).unwrap();
        let scale_fmt = FloatFormat::fp8();
        let aq = AffineQuantLayerParams::new(
            scale_fmt.encode(0.5).unwrap(),
            scale_fmt,
            zero_fmt.encode(3).unwrap(),
            zero_fmt,
            fmt,
        )
        .unwrap();
        let words = vec![
            vec![fmt.encode(10).unwrap(), fmt.encode(-4).unwrap(), fmt.encode(0).unwrap()],
            vec![fmt.encode(2).unwrap(), fmt.encode(7).unwrap(), fmt.encode(1).unwrap()],
        ];
        let layer = DenseLayer::new(
            words,
            NumericFormat::Int(fmt),
            Some(aq),
            Activation::Identity,
            None,
        )
        .unwrap();
        MlpNetwork::new(2, vec![layer], true, 2).unwrap()
    }

    fn small_lut() -> LutNetwork {
        let binarizer = Binarizer::fit(&[(0.0, 1.0), (0.0, 1.0)], 2);
        let luts = vec![
            LutTable::new(2, crate::formats::BitWord::new(0b0110, 4).unwrap()).unwrap(),
            LutTable::new(2, crate::formats::BitWord::new(0b1001, 4).unwrap()).unwrap(),
        ];
        let layer = LutLayer::new(luts, vec![vec![0, 2], vec![1, 3]]).unwrap();
        LutNetwork::new(binarizer, vec![layer], vec![0, 1], 2).unwrap()
    }

    fn spec(ber: f64, scope: CorruptionScope) -> CorruptionSpec {
        CorruptionSpec::new(ber, 99, scope).unwrap()
    }

    #[test]
    fn zero_ber_is_identity() {
        let net = small_mlp();
        let corrupted = corrupt_mlp(&net, &spec(0.0, CorruptionScope::WeightsAndQuantParams), 0)
            .unwrap();
        for (a, b) in net.layers[0].weights.iter().zip(&corrupted.layers[0].weights) {
            assert_eq!(a, b);
        }
        assert_eq!(
            net.layers[0].aq.as_ref().unwrap().scale_word(),
            corrupted.layers[0].aq.as_ref().unwrap().scale_word()
        );
    }

    #[test]
    fn full_ber_complements_every_lut() {
        let net = small_lut();
        let corrupted = corrupt_lut(&net, &spec(1.0, CorruptionScope::LutTables), 5).unwrap();
        for (clean, bad) in net.layers[0].luts.iter().zip(&corrupted.layers[0].luts) {
            assert_eq!(bad.entries(), &clean.entries().complement());
        }
    }

    #[test]
    fn corruption_is_deterministic_per_trial() {
        let net = small_mlp();
        let s = spec(0.3, CorruptionScope::WeightsOnly);
        let a = corrupt_mlp(&net, &s, 7).unwrap();
        let b = corrupt_mlp(&net, &s, 7).unwrap();
        assert_eq!(a.layers[0].weights, b.layers[0].weights);
        let c = corrupt_mlp(&net, &s, 8).unwrap();
        assert_ne!(a.layers[0].weights, c.layers[0].weights);
    }

    #[test]
    fn scope_protects_quant_params() {
        let net = small_mlp();
        let s = spec(1.0, CorruptionScope::WeightsOnly);
        let corrupted = corrupt_mlp(&net, &s, 0).unwrap();
        let (a, b) = (
            net.layers[0].aq.as_ref().unwrap(),
            corrupted.layers[0].aq.as_ref().unwrap(),
        );
        assert_eq!(a.scale_word(), b.scale_word());
        assert_eq!(a.zero_word(), b.zero_word());
        // Weights all complemented at p = 1.
        for (clean, bad) in net.layers[0].weights[0].iter().zip(&corrupted.layers[0].weights[0]) {
            assert_eq!(bad, &clean.complement());
        }

        let s = spec(1.0, CorruptionScope::WeightsAndQuantParams);
        let corrupted = corrupt_mlp(&net, &s, 0).unwrap();
        let b = corrupted.layers[0].aq.as_ref().unwrap();
        assert_eq!(b.scale_word(), &a.scale_word().complement());
        assert_eq!(b.zero_word(), &a.zero_word().complement());
    }

    #[test]
    fn quant_scope_does_not_shift_weight_masks() {
        // The same weight must receive the same mask whether or not quant
        // params are in scope: indices are positional.
        let net = small_mlp();
        let a = corrupt_mlp(&net, &spec(0.4, CorruptionScope::WeightsOnly), 3).unwrap();
        let b = corrupt_mlp(&net, &spec(0.4, CorruptionScope::WeightsAndQuantParams), 3).unwrap();
        assert_eq!(a.layers[0].weights, b.layers[0].weights);
    }

    #[test]
    fn census_counts_by_scope() {
        let net = Network::Mlp(small_mlp());
        // 6 int8 weights = 48 bits; scale fp8 = 8 bits; zero int8 = 8 bits.
        assert_eq!(flippable_bits(&net, CorruptionScope::WeightsOnly), 48);
        assert_eq!(flippable_bits(&net, CorruptionScope::WeightsAndQuantParams), 64);
        let lut = Network::Lut(small_lut());
        assert_eq!(flippable_bits(&lut, CorruptionScope::LutTables), 8);
    }

    #[test]
    fn masked_weights_are_not_flipped() {
        let fmt = IntFormat::new(8).unwrap();
        let words = vec![vec![fmt.encode(10).unwrap(), fmt.encode(-4).unwrap()]];
        let layer = DenseLayer::new(
            words,
            NumericFormat::Int(fmt),
            None,
            Activation::Identity,
            Some(vec![vec![false, true]]),
        )
        .unwrap();
        let net = MlpNetwork::new(2, vec![layer], false, 1).unwrap();
        let corrupted = corrupt_mlp(&net, &spec(1.0, CorruptionScope::WeightsOnly), 0).unwrap();
        assert_eq!(corrupted.layers[0].weights[0][0], net.layers[0].weights[0][0]);
        assert_eq!(
            corrupted.layers[0].weights[0][1],
            net.layers[0].weights[0][1].complement()
        );
        assert_eq!(flippable_bits(&Network::Mlp(net), CorruptionScope::WeightsOnly), 8);
    }
}
