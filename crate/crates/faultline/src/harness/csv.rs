//! Fixed, versioned CSV schemas. Reals are written with Rust's shortest
//! round-trip display, so identical runs emit byte-identical files.

use crate::netsim::EvalReport;

pub const SWEEP_HEADER: &str = "# faultline sweep csv v1";
pub const SWEEP_COLUMNS: &str =
    "model_id,format,p,trials,mean_accuracy,std_accuracy,mean_mse,special_rate,flippable_bits";

pub const ANALYZE_HEADER: &str =
    "# faultline analyze csv v1 (float weight moments use extended-mode semantics)";
pub const ANALYZE_COLUMNS: &str = "model_id,layer,format,p,variance_term,bias_term,total_mse";

pub const ABLATE_HEADER: &str = "# faultline ablate csv v1";
pub const ABLATE_COLUMNS: &str = "axis,value,model_id,format,p,trials,mean_accuracy,std_accuracy,mean_mse,special_rate,flippable_bits,status";

pub const PREDICTOR_HEADER: &str = "# faultline ablate predictor csv v1";
pub const PREDICTOR_COLUMNS: &str = "axis,value,predicted_variance,predicted_bias,predicted_total";

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub model_id: String,
    pub format: String,
    pub p: f64,
    pub trials: u32,
    pub report: EvalReport,
    pub flippable_bits: u64,
}

impl SweepRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.model_id,
            self.format,
            self.p,
            self.trials,
            self.report.mean_accuracy,
            self.report.std_accuracy,
            self.report.mean_output_mse,
            self.report.special_value_rate,
            self.flippable_bits
        )
    }
}

pub fn sweep_csv(comments: &[String], rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for comment in comments {
        out.push_str("# ");
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_render_in_schema_order() {
        let row = SweepRow {
            model_id: "m".into(),
            format: "fp32".into(),
            p: 0.1,
            trials: 3,
            report: EvalReport {
                mean_accuracy: 0.5,
                std_accuracy: 0.0,
                mean_output_mse: 1.25,
                trials: 3,
                special_value_rate: 0.0,
            },
            flippable_bits: 64,
        };
        assert_eq!(row.to_line(), "m,fp32,0.1,3,0.5,0,1.25,0,64");
        let text = sweep_csv(&["note".into()], &[row]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        assert_eq!(lines.next(), Some("# note"));
        assert_eq!(lines.next(), Some(SWEEP_COLUMNS));
    }
}
