// scratch calibration harness: measures the statistical criteria landscape
use faultline::dataset::{make_synthetic, Dataset, SyntheticKind};
use faultline::fault::{CorruptionScope, CorruptionSpec};
use faultline::formats::FloatFormat;
use faultline::netsim::{self, Activation, Network};
use faultline::recovery;
use faultline::trainer::{self, LutTrainConfig, TargetFormat, TrainConfig};

fn clean_acc(net: &Network, data: &Dataset) -> f64 {
    let spec = CorruptionSpec::new(0.0, 1, CorruptionScope::WeightsAndQuantParams).unwrap();
    netsim::evaluate(net, data, &spec, 1).unwrap().mean_accuracy
}

fn sweep(net: &Network, data: &Dataset, grid: &[f64], trials: u32, scope: CorruptionScope) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&p| {
            let spec = CorruptionSpec::new(p, 0, scope).unwrap();
            let r = netsim::evaluate(net, data, &spec, trials).unwrap();
            (p, r.mean_accuracy)
        })
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("hierarchy");
    let blobs4 = make_synthetic(SyntheticKind::Blobs, 100, 4, 7);
    let rings2 = make_synthetic(SyntheticKind::Rings, 150, 2, 7);
    let grid = vec![0.0, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.2, 0.3, 0.5];
    let trials = 40;

    match mode {
        "hierarchy" => {
            // FP / AQ / BNN from one relu latent + a tanh latent for BNN
            let cfg_relu = TrainConfig { width: 32, depth: 2, epochs: 600, ..TrainConfig::default() };
            let latent = trainer::train_mlp(&blobs4, &cfg_relu).unwrap();
            let cfg_sign = TrainConfig { width: 32, depth: 3, activation: Activation::Sign, epochs: 600, ..TrainConfig::default() };
            let latent_sign = trainer::train_mlp(&blobs4, &cfg_sign).unwrap();
            let fp32 = Network::Mlp(latent.to_float_network(FloatFormat::fp32()).unwrap());
            let aq = Network::Mlp(latent.quantize_affine(8, FloatFormat::fp16(), 8).unwrap());
            let bnn = Network::Mlp(latent_sign.binarize().unwrap());
            let lut_cfg = LutTrainConfig { layers: vec![(48, 4), (48, 4)], thresholds_per_feature: 4, passes: 4, seed: 5 };
            let (lut, rep) = trainer::train_lut(&blobs4, &lut_cfg).unwrap();
            let lut = Network::Lut(lut);
            eprintln!("lut train: {:?}", rep.final_loss);
            for (name, net) in [("fp32", &fp32), ("aq8", &aq), ("bnn", &bnn), ("lut", &lut)] {
                let clean = clean_acc(net, &blobs4);
                let pts = sweep(net, &blobs4, &grid, trials, CorruptionScope::WeightsAndQuantParams);
                println!("--- {name} clean={clean:.3} census={}", netsim::flippable_bits(net, CorruptionScope::WeightsAndQuantParams));
                for (p, acc) in &pts {
                    println!("  p={p:<8} acc={acc:.3}");
                }
            }
        }
        "catastrophic" => {
            for (dname, data) in [("blobs4", &blobs4), ("rings2", &rings2)] {
                println!("== {dname}");
                let cfg_relu = TrainConfig { width: 32, depth: 2, epochs: 800, ..TrainConfig::default() };
                let latent = trainer::train_mlp(data, &cfg_relu).unwrap();
                let cfg_sign = TrainConfig { width: 32, depth: 3, activation: Activation::Sign, epochs: 800, ..TrainConfig::default() };
                let latent_sign = trainer::train_mlp(data, &cfg_sign).unwrap();
                let fp32 = Network::Mlp(latent.to_float_network(FloatFormat::fp32()).unwrap());
                let aq = Network::Mlp(latent.quantize_affine(8, FloatFormat::fp16(), 8).unwrap());
                let bnn = Network::Mlp(latent_sign.binarize().unwrap());
                let t = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4);
                let lut_cfg = LutTrainConfig { layers: vec![(48, 6), (48, 6)], thresholds_per_feature: t, passes: 4, seed: 5 };
                let (lutn, rep) = trainer::train_lut(data, &lut_cfg).unwrap();
                let lut = Network::Lut(lutn);
                eprintln!("lut train loss: {:?} -> {:?}", rep.initial_loss, rep.final_loss);
                for (name, net) in [("fp32", &fp32), ("aq8", &aq), ("bnn", &bnn), ("lut", &lut)] {
                    let clean = clean_acc(net, data);
                    let spec = CorruptionSpec::new(0.1, 0, CorruptionScope::WeightsAndQuantParams).unwrap();
                    let r = netsim::evaluate(net, data, &spec, 100).unwrap();
                    println!("{name:>5} clean={clean:.3} p0.1 acc={:.3} std={:.3} retention={:.2}", r.mean_accuracy, r.std_accuracy, r.mean_accuracy / clean);
                }
            }
        }
        "recovery" => {
            let blobs2 = make_synthetic(SyntheticKind::Blobs, 150, 2, 7);
            let t: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4);
            let k: u8 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(4);
            for depth in [2u32, 4, 6] {
                let lut_cfg = LutTrainConfig { layers: vec![(48, k); depth as usize], thresholds_per_feature: t, passes: 4, seed: 11 + u64::from(depth) };
                let (net, rep) = trainer::train_lut(&blobs2, &lut_cfg).unwrap();
                let alpha = recovery::network_alpha(&net, &blobs2).unwrap();
                let wrapped = Network::Lut(net);
                let clean = clean_acc(&wrapped, &blobs2);
                let spec = CorruptionSpec::new(1.0, 0, CorruptionScope::LutTables).unwrap();
                let p1 = netsim::evaluate(&wrapped, &blobs2, &spec, 1).unwrap().mean_accuracy;
                println!(
                    "L={depth} clean={clean:.3} p1={p1:.3} mean_alpha={:.3} min_alpha={:.3} loss {:?}->{:?}",
                    alpha.mean_alpha, alpha.min_alpha, rep.initial_loss, rep.final_loss
                );
            }
        }

        "baselines" => {
            for (dname, data) in [("blobs4", &blobs4), ("rings2", &rings2)] {
                println!("== {dname} floor={:.3}", 1.0 / data.classes as f64);
                for depth in [3usize, 4, 5] {
                    for width in [32usize, 64] {
                        let cfg_relu = TrainConfig { width, depth, epochs: 800, ..TrainConfig::default() };
                        let cfg_sign = TrainConfig { width, depth, activation: Activation::Sign, epochs: 800, ..TrainConfig::default() };
                        let (Ok(latent), Ok(latent_sign)) = (trainer::train_mlp(data, &cfg_relu), trainer::train_mlp(data, &cfg_sign)) else {
                            println!("d{depth} w{width}: diverged");
                            continue;
                        };
                        let aq = Network::Mlp(latent.quantize_affine(8, FloatFormat::fp16(), 8).unwrap());
                        let bnn = Network::Mlp(latent_sign.binarize().unwrap());
                        let spec = CorruptionSpec::new(0.1, 0, CorruptionScope::WeightsAndQuantParams).unwrap();
                        let ra = netsim::evaluate(&aq, data, &spec, 60).unwrap();
                        let rb = netsim::evaluate(&bnn, data, &spec, 60).unwrap();
                        println!(
                            "d{depth} w{width}: aq clean={:.3} p0.1={:.3}+-{:.3}  bnn clean={:.3} p0.1={:.3}+-{:.3}",
                            clean_acc(&aq, data), ra.mean_accuracy, ra.std_accuracy,
                            clean_acc(&bnn, data), rb.mean_accuracy, rb.std_accuracy,
                        );
                    }
                }
            }
        }

        "bnnscan" => {
            for (dname, data) in [("blobs4", &blobs4), ("rings2", &rings2)] {
                println!("== {dname} floor={:.3}", 1.0 / data.classes as f64);
                for depth in [3usize, 4] {
                    for width in [8usize, 12, 16, 24] {
                        for lr in [0.3f64, 0.5] {
                            let cfg = TrainConfig { width, depth, activation: Activation::Sign, epochs: 1200, learning_rate: lr, ..TrainConfig::default() };
                            let Ok(latent) = trainer::train_mlp(data, &cfg) else { println!("d{depth} w{width} lr{lr}: diverged"); continue };
                            let bnn = Network::Mlp(latent.binarize().unwrap());
                            let spec = CorruptionSpec::new(0.1, 0, CorruptionScope::WeightsAndQuantParams).unwrap();
                            let r = netsim::evaluate(&bnn, data, &spec, 60).unwrap();
                            println!(
                                "d{depth} w{width} lr{lr}: clean={:.3} p0.1={:.3}+-{:.3}",
                                clean_acc(&bnn, data), r.mean_accuracy, r.std_accuracy,
                            );
                        }
                    }
                }
            }
        }

        "recovery2" => {
            let blobs2 = make_synthetic(SyntheticKind::Blobs, 150, 2, 7);
            for t in [4usize, 6, 8] {
                for k in [2u8, 3, 4] {
                    for luts in [48usize, 96] {
                        let mut line = format!("t{t} k{k} n{luts}:");
                        for depth in [2u32, 4, 6] {
                            let mut accs = Vec::new();
                            for seed in 0..3u64 {
                                let lut_cfg = LutTrainConfig { layers: vec![(luts, k); depth as usize], thresholds_per_feature: t, passes: 5, seed: 100 * seed + u64::from(depth) };
                                let (net, _) = trainer::train_lut(&blobs2, &lut_cfg).unwrap();
                                let wrapped = Network::Lut(net);
                                let spec = CorruptionSpec::new(1.0, 0, CorruptionScope::LutTables).unwrap();
                                let p1 = netsim::evaluate(&wrapped, &blobs2, &spec, 1).unwrap().mean_accuracy;
                                accs.push(p1);
                            }
                            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                            line.push_str(&format!("  L{depth}: {:.3}/{:.3}/{:.3} m={mean:.3}", accs[0], accs[1], accs[2]));
                        }
                        println!("{line}");
                    }
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
