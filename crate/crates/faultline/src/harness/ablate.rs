//! Ablation grids: train one model per grid point along a single axis (all
//! other knobs held at documented defaults), sweep the BER grid, and emit a
//! unified CSV plus the analytic predictor's expected ordering for the axis.

use crate::analytic::{self, MseBreakdown, NeuronInstance, NoiseDistribution};
use crate::fault::CorruptionSpec;
use crate::formats::NumericFormat;
use crate::netsim::{self, Network};
use crate::trainer::{self, TargetFormat, TrainError};

use super::{csv, ConfigFile, HarnessError, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Width,
    Depth,
    Activation,
    Sparsity,
    Precision,
}

impl AblationAxis {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "width" => Some(AblationAxis::Width),
            "depth" => Some(AblationAxis::Depth),
            "activation" => Some(AblationAxis::Activation),
            "sparsity" => Some(AblationAxis::Sparsity),
            "precision" => Some(AblationAxis::Precision),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AblationAxis::Width => "width",
            AblationAxis::Depth => "depth",
            AblationAxis::Activation => "activation",
            AblationAxis::Sparsity => "sparsity",
            AblationAxis::Precision => "precision",
        }
    }

    fn default_grid(&self) -> Vec<String> {
        match self {
            AblationAxis::Width => vec!["16".into(), "64".into(), "256".into()],
            AblationAxis::Depth => vec!["1".into(), "2".into(), "3".into(), "4".into()],
            AblationAxis::Activation => {
                vec!["sign".into(), "tanh".into(), "sigmoid:1".into(), "relu".into()]
            }
            AblationAxis::Sparsity => vec!["0".into(), "0.9".into(), "0.95".into()],
            AblationAxis::Precision => vec![
                "fp32".into(),
                "fp16".into(),
                "fp8".into(),
                "aq-int8".into(),
                "bnn".into(),
            ],
        }
    }
}

/// Grid BER sweep per axis value. Emits the sweep CSV; when an output path
/// is set, also writes `<output>.pred.csv` with the predictor table.
pub fn cmd_ablate(cfg: &ConfigFile) -> Result<String, HarnessError> {
    let axis_text = cfg.require("axis")?;
    let axis = AblationAxis::parse(axis_text).ok_or_else(|| HarnessError::BadValue {
        key: "axis".into(),
        value: axis_text.to_string(),
    })?;
    let grid: Vec<String> = match cfg.get("grid") {
        None => axis.default_grid(),
        Some(text) => text.split(',').map(|v| v.trim().to_string()).collect(),
    };
    let data = super::resolve_dataset(cfg)?;
    let p_grid = cfg
        .get_f64_list("p_grid")?
        .unwrap_or_else(super::default_p_grid);
    let trials: u32 = cfg.get_parsed("trials", 100)?;
    let seed: u64 = cfg.get_parsed("seed", 0)?;
    let scope = super::scope_of(cfg)?;

    // Precision reuses one latent; the grid only changes materialization.
    let shared_latent = if axis == AblationAxis::Precision {
        Some(trainer::train_mlp(&data, &super::mlp_train_config(cfg)?)?)
    } else {
        None
    };

    let mut out = String::new();
    out.push_str(csv::ABLATE_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "# axis={} dataset={} trials={trials} seed={seed} scope={}\n",
        axis.label(),
        data.name,
        scope.label()
    ));
    out.push_str(csv::ABLATE_COLUMNS);
    out.push('\n');

    for value in &grid {
        let trained: Result<Network, TrainError> = match axis {
            AblationAxis::Precision => {
                let target =
                    TargetFormat::parse(value).ok_or_else(|| HarnessError::BadValue {
                        key: "grid".into(),
                        value: value.clone(),
                    })?;
                shared_latent
                    .as_ref()
                    .unwrap()
                    .materialize(&target)
                    .map(Network::Mlp)
            }
            _ => {
                let mut point_cfg = cfg.clone();
                let key = match axis {
                    AblationAxis::Width => "width",
                    AblationAxis::Depth => "depth",
                    AblationAxis::Activation => "activation",
                    AblationAxis::Sparsity => "sparsity",
                    AblationAxis::Precision => unreachable!(),
                };
                point_cfg.set(key, value.clone());
                super::train_mlp_network(&point_cfg, &data).map(|(net, _)| net).map_err(|e| {
                    match e {
                        HarnessError::Train(t) => t,
                        other => TrainError::BadConfig { message: other.to_string() },
                    }
                })
            }
        };
        let model_id = format!("{}-{}", axis.label(), value);
        match trained {
            Err(TrainError::Diverged { epoch, loss }) => {
                // Flag the grid point and continue with the rest of the run.
                for &p in &p_grid {
                    out.push_str(&format!(
                        "{},{},{},untrained,{},{},NaN,NaN,NaN,NaN,0,diverged(epoch={epoch};loss={loss})\n",
                        axis.label(),
                        value,
                        model_id,
                        p,
                        trials
                    ));
                }
            }
            Err(other) => return Err(other.into()),
            Ok(network) => {
                let census = netsim::flippable_bits(&network, scope);
                let format = network.format_label();
                for &p in &p_grid {
                    let spec = CorruptionSpec::new(p, seed, scope)?;
                    let report = netsim::evaluate(&network, &data, &spec, trials)?;
                    let row = SweepRow {
                        model_id: model_id.clone(),
                        format: format.clone(),
                        p,
                        trials,
                        report,
                        flippable_bits: census,
                    };
                    out.push_str(&format!("{},{},{},ok\n", axis.label(), value, row.to_line()));
                }
            }
        }
    }

    let predictor = predictor_table(axis, &grid)?;
    if let Some(path) = cfg.get("output") {
        std::fs::write(path, &out).map_err(|source| HarnessError::Io {
            path: path.to_string(),
            source,
        })?;
        let pred_path = format!("{path}.pred.csv");
        std::fs::write(&pred_path, &predictor).map_err(|source| HarnessError::Io {
            path: pred_path.clone(),
            source,
        })?;
    }
    out.push_str(&predictor);
    Ok(out)
}

/// The analytic module's expected ordering for an axis, with unit
/// proportionality constants; meant for ordering checks against the
/// measured sweep, not absolute values.
fn predictor_table(axis: AblationAxis, grid: &[String]) -> Result<String, HarnessError> {
    let mut out = String::new();
    out.push_str(csv::PREDICTOR_HEADER);
    out.push('\n');
    out.push_str(csv::PREDICTOR_COLUMNS);
    out.push('\n');
    for value in grid {
        let mse = predict_point(axis, value)?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            axis.label(),
            value,
            mse.variance_term,
            mse.bias_term,
            mse.total
        ));
    }
    Ok(out)
}

fn bad_grid(value: &str) -> HarnessError {
    HarnessError::BadValue { key: "grid".into(), value: value.to_string() }
}

fn predict_point(axis: AblationAxis, value: &str) -> Result<MseBreakdown, HarnessError> {
    match axis {
        AblationAxis::Width => {
            let width: usize = value.parse().map_err(|_| bad_grid(value))?;
            Ok(analytic::width_sparsity_predictor(width, 1.0, 1.0, 1.0, 1.0))
        }
        AblationAxis::Depth => {
            let depth: u32 = value.parse().map_err(|_| bad_grid(value))?;
            // Critical-gain accumulation: one unit of intrinsic noise per layer.
            Ok(MseBreakdown::new(analytic::depth_mse(1.0, 1.0, depth), 0.0))
        }
        AblationAxis::Sparsity => {
            let sparsity: f64 = value.parse().map_err(|_| bad_grid(value))?;
            if !(0.0..1.0).contains(&sparsity) {
                return Err(bad_grid(value));
            }
            let reference_fan_in = 256.0;
            let active = ((1.0 - sparsity) * reference_fan_in).round() as usize;
            Ok(analytic::width_sparsity_predictor(active, 1.0, 1.0, 1.0, 1.0))
        }
        AblationAxis::Activation => {
            // Propagated error for a saturated clean pre-activation under a
            // bit-flip-shaped noise law: mostly sub-threshold perturbations
            // plus rare huge ones. Saturating activations mask the former
            // and bound the latter; relu passes both through.
            let noise = NoiseDistribution::new(vec![
                (-0.8, 0.2),
                (0.8, 0.2),
                (-100.0, 0.01),
                (100.0, 0.01),
                (0.0, 0.58),
            ]);
            let y = 2.0;
            let total = match value {
                "relu" => analytic::relu_propagated_mse(y, &noise),
                "sign" => analytic::sigmoid_propagated_mse(y, 0.0, &noise)?,
                "tanh" => noise
                    .atoms()
                    .iter()
                    .map(|&(xi, p)| {
                        let d = (y + xi).tanh() - y.tanh();
                        p * d * d
                    })
                    .sum(),
                other => {
                    let tau = other
                        .strip_prefix("sigmoid:")
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| bad_grid(value))?;
                    analytic::sigmoid_propagated_mse(y, tau, &noise)?
                }
            };
            Ok(MseBreakdown::new(total, 0.0))
        }
        AblationAxis::Precision => {
            // Representative neuron at a reference BER; lower is more
            // resilient.
            let p_ref = 1e-3;
            let fan_in = 8usize;
            let xs = vec![1.0; fan_in];
            let target = TargetFormat::parse(value).ok_or_else(|| bad_grid(value))?;
            let mse = match target {
                TargetFormat::Float(fmt) => {
                    let ext = fmt.with_specials(crate::formats::SpecialsMode::Extended);
                    let word = ext.encode(0.5).map_err(TrainError::Format)?;
                    let neuron = NeuronInstance::from_words(
                        xs,
                        vec![word; fan_in],
                        &NumericFormat::Float(ext),
                    )?;
                    analytic::float_neuron_mse(&neuron, &ext, p_ref)?
                }
                TargetFormat::AffineInt { weight_bits, zero_bits, scale_fmt } => {
                    let weight_fmt = crate::formats::IntFormat::new(weight_bits)
                        .map_err(TrainError::Format)?;
                    let zero_fmt = crate::formats::IntFormat::new(zero_bits)
                        .map_err(TrainError::Format)?;
                    let params = crate::formats::AffineQuantLayerParams::new(
                        scale_fmt.encode(0.01).map_err(TrainError::Format)?,
                        scale_fmt,
                        zero_fmt.encode(0).map_err(TrainError::Format)?,
                        zero_fmt,
                        weight_fmt,
                    )
                    .map_err(TrainError::Format)?;
                    let word = weight_fmt.encode(50).map_err(TrainError::Format)?;
                    let neuron = NeuronInstance::from_words(
                        xs,
                        vec![word; fan_in],
                        &NumericFormat::Int(weight_fmt),
                    )?;
                    analytic::aq_corrupted_full_mse(&neuron, &params, p_ref)?
                }
                TargetFormat::Binary => {
                    let word = crate::formats::BitWord::new(1, 1).map_err(TrainError::Format)?;
                    let neuron = NeuronInstance::from_words(
                        xs,
                        vec![word; fan_in],
                        &NumericFormat::Binary,
                    )?;
                    analytic::bnn_neuron_mse(&neuron, p_ref)?
                }
            };
            Ok(mse)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        assert_eq!(AblationAxis::parse("width"), Some(AblationAxis::Width));
        assert_eq!(AblationAxis::parse("bogus"), None);
    }

    #[test]
    fn width_predictor_orders_by_width() {
        let narrow = predict_point(AblationAxis::Width, "16").unwrap();
        let wide = predict_point(AblationAxis::Width, "256").unwrap();
        assert!(wide.total > narrow.total);
    }

    #[test]
    fn depth_predictor_grows_linearly() {
        let d1 = predict_point(AblationAxis::Depth, "1").unwrap();
        let d4 = predict_point(AblationAxis::Depth, "4").unwrap();
        assert_eq!(d4.total, 4.0 * d1.total);
    }

    #[test]
    fn activation_predictor_ranks_sign_best_relu_worst() {
        // tanh and sigmoid form one middle class; sign must beat both and
        // relu must lose to both.
        let sign = predict_point(AblationAxis::Activation, "sign").unwrap().total;
        let tanh = predict_point(AblationAxis::Activation, "tanh").unwrap().total;
        let sigmoid = predict_point(AblationAxis::Activation, "sigmoid:1").unwrap().total;
        let relu = predict_point(AblationAxis::Activation, "relu").unwrap().total;
        assert!(sign <= tanh.min(sigmoid), "{sign} vs {tanh}/{sigmoid}");
        assert!(tanh.max(sigmoid) <= relu, "{tanh}/{sigmoid} vs {relu}");
    }

    #[test]
    fn precision_predictor_ranks_bnn_most_resilient() {
        let fp32 = predict_point(AblationAxis::Precision, "fp32").unwrap().total;
        let aq = predict_point(AblationAxis::Precision, "aq-int8").unwrap().total;
        let bnn = predict_point(AblationAxis::Precision, "bnn").unwrap().total;
        assert!(bnn < aq && aq < fp32, "bnn={bnn} aq={aq} fp32={fp32}");
    }

    #[test]
    fn sparsity_predictor_decreases_with_sparsity() {
        let dense = predict_point(AblationAxis::Sparsity, "0").unwrap();
        let sparse = predict_point(AblationAxis::Sparsity, "0.9").unwrap();
        assert!(sparse.total < dense.total);
    }
}
