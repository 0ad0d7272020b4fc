//! Sweep engine and command-line back end: BER sweeps, analytic prediction
//! tables, ablation grids, oracle runs, trainer invocation, and recovery
//! sweeps, all emitting deterministic CSV.
//!
//! Sweep cells and trials run on the rayon pool when the `parallel` feature
//! is on; per-trial RNG streams and post-hoc sorting make the output
//! byte-identical for any worker count.

mod ablate;
pub mod config;
pub mod csv;

pub use ablate::cmd_ablate;
pub use config::ConfigFile;
pub use csv::{SweepRow, SWEEP_COLUMNS};

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytic::{self, AnalyticError, NeuronInstance};
use crate::dataset::{self, Dataset, DatasetError, SyntheticKind};
use crate::fault::{CorruptionScope, CorruptionSpec, FaultError};
use crate::formats::{NumericFormat, SpecialsMode};
use crate::netsim::{self, Activation, NetError, Network};
use crate::oracle;
use crate::recovery::{self, RecoveryError};
use crate::trainer::{
    self, LutTrainConfig, TargetFormat, TrainConfig, TrainError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("missing required key {key:?}")]
    MissingKey { key: String },
    #[error("bad value {value:?} for key {key:?}")]
    BadValue { key: String, value: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Default BER grid: the benign log range plus the catastrophic linear
/// range, with the clean point first.
pub fn default_p_grid() -> Vec<f64> {
    vec![
        0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0,
    ]
}

fn validated_p_grid(cfg: &ConfigFile) -> Result<Vec<f64>, HarnessError> {
    let grid = cfg.get_f64_list("p_grid")?.unwrap_or_else(default_p_grid);
    for &p in &grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(HarnessError::BadValue {
                key: "p_grid".into(),
                value: p.to_string(),
            });
        }
    }
    Ok(grid)
}

fn scope_of(cfg: &ConfigFile) -> Result<CorruptionScope, HarnessError> {
    match cfg.get("scope") {
        None => Ok(CorruptionScope::WeightsAndQuantParams),
        Some(text) => CorruptionScope::parse(text).ok_or_else(|| HarnessError::BadValue {
            key: "scope".into(),
            value: text.to_string(),
        }),
    }
}

/// Resolve the `dataset` key: `blobs` / `rings` with optional
/// `:classes=<c>:n=<per class>` options (seeded from the run seed), or a
/// path to a delimited text file.
pub fn resolve_dataset(cfg: &ConfigFile) -> Result<Dataset, HarnessError> {
    let spec = cfg.get("dataset").unwrap_or("blobs");
    let seed: u64 = cfg.get_parsed("seed", 0)?;
    let mut parts = spec.split(':');
    let head = parts.next().unwrap_or_default();
    if let Some(kind) = SyntheticKind::parse(head) {
        let mut classes: usize = cfg.get_parsed(
            "classes",
            if kind == SyntheticKind::Blobs { 4 } else { 2 },
        )?;
        let mut n_per_class: usize = cfg.get_parsed("n_per_class", 100)?;
        for option in parts {
            if let Some(v) = option.strip_prefix("classes=") {
                classes = v.parse().map_err(|_| HarnessError::BadValue {
                    key: "dataset".into(),
                    value: spec.to_string(),
                })?;
            } else if let Some(v) = option.strip_prefix("n=") {
                n_per_class = v.parse().map_err(|_| HarnessError::BadValue {
                    key: "dataset".into(),
                    value: spec.to_string(),
                })?;
            } else {
                return Err(HarnessError::BadValue {
                    key: "dataset".into(),
                    value: spec.to_string(),
                });
            }
        }
        Ok(dataset::make_synthetic(kind, n_per_class, classes, seed))
    } else {
        Ok(dataset::load_delimited(Path::new(spec))?)
    }
}

fn activation_of(cfg: &ConfigFile) -> Result<Activation, HarnessError> {
    match cfg.get("activation") {
        None => Ok(Activation::Relu),
        Some(text) => Activation::parse(text).ok_or_else(|| HarnessError::BadValue {
            key: "activation".into(),
            value: text.to_string(),
        }),
    }
}

fn target_of(cfg: &ConfigFile) -> Result<TargetFormat, HarnessError> {
    match cfg.get("format") {
        None => Ok(TargetFormat::parse("fp32").unwrap()),
        Some(text) => TargetFormat::parse(text).ok_or_else(|| HarnessError::BadValue {
            key: "format".into(),
            value: text.to_string(),
        }),
    }
}

pub fn mlp_train_config(cfg: &ConfigFile) -> Result<TrainConfig, HarnessError> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        width: cfg.get_parsed("width", defaults.width)?,
        depth: cfg.get_parsed("depth", defaults.depth)?,
        activation: activation_of(cfg)?,
        epochs: cfg.get_parsed("epochs", defaults.epochs)?,
        learning_rate: cfg.get_parsed("lr", defaults.learning_rate)?,
        seed: cfg.get_parsed("seed", defaults.seed)?,
        target: target_of(cfg)?,
        sparsity: cfg.get_parsed("sparsity", defaults.sparsity)?,
    })
}

fn lut_train_config(cfg: &ConfigFile, classes: usize) -> Result<LutTrainConfig, HarnessError> {
    let defaults = LutTrainConfig::default();
    let depth: usize = cfg.get_parsed("depth", 2)?;
    let mut luts: usize = cfg.get_parsed("luts", 48)?;
    // Terminal LUTs must partition into class bins.
    if luts % classes != 0 {
        luts += classes - luts % classes;
    }
    let k: u8 = cfg.get_parsed("k", 4)?;
    Ok(LutTrainConfig {
        layers: vec![(luts, k); depth.max(1)],
        thresholds_per_feature: cfg.get_parsed("thresholds", defaults.thresholds_per_feature)?,
        passes: cfg.get_parsed("passes", defaults.passes)?,
        seed: cfg.get_parsed("seed", defaults.seed)?,
    })
}

/// Train an MLP per the config, applying pruning (with a masked fine-tune at
/// half the epochs) before materialization.
pub fn train_mlp_network(
    cfg: &ConfigFile,
    data: &Dataset,
) -> Result<(Network, TrainConfig), HarnessError> {
    let train_cfg = mlp_train_config(cfg)?;
    let mut latent = trainer::train_mlp(data, &train_cfg)?;
    if train_cfg.sparsity > 0.0 {
        latent = latent.prune_magnitude(train_cfg.sparsity)?;
        latent.fine_tune(data, train_cfg.epochs / 2, train_cfg.learning_rate)?;
    }
    Ok((Network::Mlp(latent.materialize(&train_cfg.target)?), train_cfg))
}

/// A model plus the identifier used in CSV rows.
pub struct NamedModel {
    pub id: String,
    pub network: Network,
}

/// Each `model` value is a path: either a serialized model file or a train
/// config, distinguished by content. Train configs train on the sweep's
/// dataset.
fn resolve_models(cfg: &ConfigFile, data: &Dataset) -> Result<Vec<NamedModel>, HarnessError> {
    let paths = cfg.values("model");
    if paths.is_empty() {
        return Err(HarnessError::MissingKey { key: "model".into() });
    }
    let mut models = Vec::with_capacity(paths.len());
    for path in paths {
        let path = PathBuf::from(path);
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("model")
            .to_string();
        let text = fs::read_to_string(&path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let network = if text.trim_start().starts_with("faultline-model") {
            netsim::parse_model(&text)?
        } else {
            let inner = ConfigFile::parse(&text)?;
            match inner.get("kind") {
                Some("lut") => {
                    let lut_cfg = lut_train_config(&inner, data.classes)?;
                    Network::Lut(trainer::train_lut(data, &lut_cfg)?.0)
                }
                _ => train_mlp_network(&inner, data)?.0,
            }
        };
        models.push(NamedModel { id, network });
    }
    Ok(models)
}

fn maybe_write(cfg: &ConfigFile, text: &str) -> Result<(), HarnessError> {
    if let Some(path) = cfg.get("output") {
        fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Monte Carlo BER sweep over one or more models; one CSV row per
/// (model, p), sorted by (model_id, p), byte-identical for a fixed config.
pub fn cmd_sweep(cfg: &ConfigFile) -> Result<String, HarnessError> {
    let data = resolve_dataset(cfg)?;
    let models = resolve_models(cfg, &data)?;
    let p_grid = validated_p_grid(cfg)?;
    let trials: u32 = cfg.get_parsed("trials", 100)?;
    if trials == 0 {
        return Err(HarnessError::BadValue { key: "trials".into(), value: "0".into() });
    }
    let seed: u64 = cfg.get_parsed("seed", 0)?;
    let scope = scope_of(cfg)?;
    let mut rows = Vec::new();
    for model in &models {
        let census = netsim::flippable_bits(&model.network, scope);
        let format = model.network.format_label();
        for &p in &p_grid {
            let spec = CorruptionSpec::new(p, seed, scope)?;
            let report = netsim::evaluate(&model.network, &data, &spec, trials)?;
            rows.push(SweepRow {
                model_id: model.id.clone(),
                format: format.clone(),
                p,
                trials,
                report,
                flippable_bits: census,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.model_id
            .cmp(&b.model_id)
            .then(a.p.partial_cmp(&b.p).unwrap())
    });
    let comments = vec![
        format!("dataset={} examples={} classes={}", data.name, data.len(), data.classes),
        format!("seed={seed} scope={}", scope.label()),
    ];
    let text = csv::sweep_csv(&comments, &rows);
    maybe_write(cfg, &text)?;
    Ok(text)
}

/// Analytic per-layer expected-MSE predictions, no sampling. Layer inputs
/// come from clean forward passes over the dataset (or a unit probe when no
/// dataset is configured); float moments use extended-mode semantics.
pub fn cmd_analyze(cfg: &ConfigFile) -> Result<String, HarnessError> {
    let model_path = cfg.require("model")?;
    let network = netsim::load_model(Path::new(model_path))?;
    let net = match network {
        Network::Mlp(net) => net,
        Network::Lut(_) => {
            return Err(HarnessError::Unsupported(
                "analyze covers weighted (MLP) formats; LUT error isolation has its own closed form".into(),
            ))
        }
    };
    let probes: Vec<Vec<f64>> = if cfg.get("dataset").is_some() {
        resolve_dataset(cfg)?.features
    } else {
        vec![vec![1.0; net.features]]
    };
    let p_grid = validated_p_grid(cfg)?;
    let scope = scope_of(cfg)?;
    let model_id = Path::new(model_path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();

    // Clean per-layer input vectors (bias column included) per probe.
    let mut layer_inputs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); net.layers.len()];
    for probe in &probes {
        let mut current = probe.clone();
        for (l, layer) in net.layers.iter().enumerate() {
            if net.augment_bias {
                current.push(1.0);
            }
            layer_inputs[l].push(current.clone());
            let matrix = layer.decoded_matrix();
            current = matrix
                .iter()
                .map(|row| {
                    layer
                        .activation
                        .apply(row.iter().zip(&current).map(|(w, x)| w * x).sum())
                })
                .collect();
        }
    }

    let mut out = String::new();
    out.push_str(csv::ANALYZE_HEADER);
    out.push('\n');
    out.push_str(&format!("# scope={} probes={}\n", scope.label(), probes.len()));
    out.push_str(csv::ANALYZE_COLUMNS);
    out.push('\n');
    for &p in &p_grid {
        let mut total = analytic::MseBreakdown::zero();
        let mut layer_rows = Vec::new();
        for (l, layer) in net.layers.iter().enumerate() {
            let mse = analyze_layer(layer, &layer_inputs[l], p, scope)?;
            total = analytic::MseBreakdown::new(
                total.variance_term + mse.variance_term,
                total.bias_term + mse.bias_term,
            );
            layer_rows.push((format!("layer{l}"), mse));
        }
        layer_rows.push(("total".into(), total));
        for (label, mse) in layer_rows {
            let format = Network::Mlp(net.clone()).format_label();
            out.push_str(&format!(
                "{model_id},{label},{format},{p},{},{},{}\n",
                mse.variance_term, mse.bias_term, mse.total
            ));
        }
    }
    maybe_write(cfg, &out)?;
    Ok(out)
}

/// Mean intrinsic MSE of one layer over probe inputs, summed across output
/// neurons.
fn analyze_layer(
    layer: &netsim::DenseLayer,
    inputs: &[Vec<f64>],
    p: f64,
    scope: CorruptionScope,
) -> Result<analytic::MseBreakdown, HarnessError> {
    let mut acc_var = 0.0;
    let mut acc_bias = 0.0;
    for input in inputs {
        for row in 0..layer.output_size() {
            let mut xs = Vec::new();
            let mut words = Vec::new();
            for col in 0..layer.input_size() {
                if layer.is_active(row, col) {
                    xs.push(input[col]);
                    words.push(layer.weights[row][col]);
                }
            }
            let mse = match (&layer.fmt, &layer.aq) {
                (NumericFormat::Binary, _) => {
                    let neuron =
                        NeuronInstance::from_words(xs, words, &NumericFormat::Binary)?;
                    analytic::bnn_neuron_mse(&neuron, p)?
                }
                (NumericFormat::Int(int_fmt), None) => {
                    let neuron =
                        NeuronInstance::from_words(xs, words, &NumericFormat::Int(*int_fmt))?;
                    analytic::int_neuron_mse(&neuron, int_fmt, p)?
                }
                (NumericFormat::Int(int_fmt), Some(aq)) => {
                    let neuron =
                        NeuronInstance::from_words(xs, words, &NumericFormat::Int(*int_fmt))?;
                    match scope {
                        CorruptionScope::WeightsAndQuantParams => {
                            analytic::aq_corrupted_full_mse(&neuron, aq, p)?
                        }
                        _ => analytic::aq_protected_mse(&neuron, aq, p)?,
                    }
                }
                (NumericFormat::Float(f), None) => {
                    let ext = f.with_specials(SpecialsMode::Extended);
                    let neuron =
                        NeuronInstance::from_words(xs, words, &NumericFormat::Float(ext))?;
                    analytic::float_neuron_mse(&neuron, &ext, p)?
                }
                (NumericFormat::Float(_), Some(_)) => {
                    return Err(HarnessError::Unsupported(
                        "affine quantization over float weight words".into(),
                    ))
                }
            };
            acc_var += mse.variance_term;
            acc_bias += mse.bias_term;
        }
    }
    let n = inputs.len() as f64;
    Ok(analytic::MseBreakdown::new(acc_var / n, acc_bias / n))
}

/// Run every enumeration-vs-closed-form identity; returns the rendered
/// report and whether all checks passed.
pub fn cmd_oracle(cfg: &ConfigFile) -> Result<(String, bool), HarnessError> {
    let budget: u32 = cfg.get_parsed("budget", oracle::DEFAULT_BUDGET_BITS)?;
    if budget > 20 {
        return Err(HarnessError::BadValue { key: "budget".into(), value: budget.to_string() });
    }
    let report = oracle::run_checks(budget);
    let text = report.render();
    maybe_write(cfg, &text)?;
    Ok((text, report.all_pass()))
}

/// Train one model and report train/test accuracy; saves the model when an
/// output path is configured.
pub fn cmd_train(cfg: &ConfigFile) -> Result<String, HarnessError> {
    let data = resolve_dataset(cfg)?;
    let seed: u64 = cfg.get_parsed("seed", 0)?;
    let test_fraction: f64 = cfg.get_parsed("test_fraction", 0.25)?;
    let (train_set, test_set) = data.split(test_fraction, seed ^ 0x7E57);
    let network = match cfg.get("kind") {
        Some("lut") => {
            let lut_cfg = lut_train_config(cfg, data.classes)?;
            Network::Lut(trainer::train_lut(&train_set, &lut_cfg)?.0)
        }
        None | Some("mlp") => train_mlp_network(cfg, &train_set)?.0,
        Some(other) => {
            return Err(HarnessError::BadValue { key: "kind".into(), value: other.to_string() })
        }
    };
    let accuracy = |set: &Dataset| -> Result<f64, HarnessError> {
        let mut correct = 0usize;
        for (x, &label) in set.features.iter().zip(&set.labels) {
            if netsim::predict(&network.forward(x)?) == Some(label) {
                correct += 1;
            }
        }
        Ok(correct as f64 / set.len() as f64)
    };
    let train_acc = accuracy(&train_set)?;
    let test_acc = if test_set.is_empty() { f64::NAN } else { accuracy(&test_set)? };
    let census = netsim::flippable_bits(&network, scope_of(cfg)?);
    if let Some(path) = cfg.get("output") {
        netsim::save_model(&network, Path::new(path))?;
    }
    Ok(format!(
        "model format={} train_accuracy={train_acc} test_accuracy={test_acc} flippable_bits={census} examples={}\n",
        network.format_label(),
        data.len(),
    ))
}

/// Depth-parity recovery sweep over trained LUT networks, one per depth,
/// with per-depth anti-symmetry summaries in the header comments.
pub fn cmd_recovery(cfg: &ConfigFile) -> Result<String, HarnessError> {
    let data = resolve_dataset(cfg)?;
    let depths: Vec<u32> = match cfg.get("depths") {
        None => vec![2, 4, 6],
        Some(text) => text
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| HarnessError::BadValue {
                    key: "depths".into(),
                    value: v.to_string(),
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let p_grid = cfg
        .get_f64_list("p_grid")?
        .unwrap_or_else(|| vec![0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]);
    let trials: u32 = cfg.get_parsed("trials", 100)?;
    let seed: u64 = cfg.get_parsed("seed", 0)?;

    let mut networks = Vec::new();
    let mut comments = vec![format!(
        "dataset={} examples={} classes={}",
        data.name,
        data.len(),
        data.classes
    )];
    for &depth in &depths {
        let mut depth_cfg = cfg.clone();
        depth_cfg.set("depth", depth.to_string());
        depth_cfg.set("seed", (seed + u64::from(depth)).to_string());
        let lut_cfg = lut_train_config(&depth_cfg, data.classes)?;
        let (net, _) = trainer::train_lut(&data, &lut_cfg)?;
        let alpha_report = recovery::network_alpha(&net, &data)?;
        comments.push(format!(
            "recovery depth={depth} mean_alpha={} min_alpha={} predicted_per_layer={} predicted_per_pair={}",
            alpha_report.mean_alpha,
            alpha_report.min_alpha,
            alpha_report.predicted_recovery_per_layer,
            alpha_report
                .predicted_recovery_per_pair
                .map_or("n/a".to_string(), |v| v.to_string()),
        ));
        networks.push((depth, net));
    }
    let cells = recovery::parity_sweep(&networks, &p_grid, &data, seed, trials)?;
    let mut rows: Vec<SweepRow> = cells
        .iter()
        .map(|cell| {
            let network = networks
                .iter()
                .find(|(d, _)| *d == cell.depth)
                .map(|(_, n)| Network::Lut(n.clone()))
                .unwrap();
            SweepRow {
                model_id: format!("lut-depth{}", cell.depth),
                format: network.format_label(),
                p: cell.ber,
                trials: cell.report.trials,
                report: cell.report,
                flippable_bits: netsim::flippable_bits(&network, CorruptionScope::LutTables),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.model_id
            .cmp(&b.model_id)
            .then(a.p.partial_cmp(&b.p).unwrap())
    });
    let text = csv::sweep_csv(&comments, &rows);
    maybe_write(cfg, &text)?;
    Ok(text)
}

/// First grid point at which mean accuracy drops below `factor` times the
/// clean accuracy; `None` when the model never collapses on the grid.
pub fn collapse_threshold(
    points: &[(f64, f64)],
    clean_accuracy: f64,
    factor: f64,
) -> Option<f64> {
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    sorted
        .iter()
        .find(|(_, acc)| *acc < factor * clean_accuracy)
        .map(|&(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_benign_to_catastrophic() {
        let grid = default_p_grid();
        assert_eq!(grid[0], 0.0);
        assert!(grid.contains(&1e-8));
        assert!(grid.contains(&1.0));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn threshold_finds_first_collapse() {
        let points = vec![(0.0, 1.0), (0.1, 0.9), (0.2, 0.4), (0.5, 0.2)];
        assert_eq!(collapse_threshold(&points, 1.0, 0.5), Some(0.2));
        assert_eq!(collapse_threshold(&points, 1.0, 0.1), None);
    }

    #[test]
    fn dataset_spec_options() {
        let mut cfg = ConfigFile::empty();
        cfg.set("dataset", "blobs:classes=2:n=10");
        let data = resolve_dataset(&cfg).unwrap();
        assert_eq!(data.classes, 2);
        assert_eq!(data.len(), 20);
        cfg.set("dataset", "rings");
        let rings = resolve_dataset(&cfg).unwrap();
        assert_eq!(rings.classes, 2);
        cfg.set("dataset", "blobs:bogus=1");
        assert!(resolve_dataset(&cfg).is_err());
    }
}
