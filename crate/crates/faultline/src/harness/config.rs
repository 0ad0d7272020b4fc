//! Key-value experiment configs: `key = value` lines, `#` comments. The key
//! list is closed; unknown keys are hard errors so a typo cannot silently
//! change an experiment.

use std::fs;
use std::path::Path;

use super::HarnessError;

/// Every key the harness understands, with its meaning.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("model", "path to a model file or a train config (repeatable)"),
    ("dataset", "blobs | rings (optionally :classes=<c>:n=<per class>) | path to delimited text"),
    ("p_grid", "comma-separated bit error rates in [0, 1]"),
    ("trials", "Monte Carlo trials per sweep point"),
    ("seed", "base RNG seed"),
    ("scope", "weights_only | weights_and_quant_params | lut_tables"),
    ("output", "output path for CSV / model files"),
    ("axis", "ablation axis: width | depth | activation | sparsity | precision"),
    ("grid", "comma-separated ablation grid values"),
    ("kind", "trainer kind: mlp | lut"),
    ("width", "MLP hidden width"),
    ("depth", "hidden layer count (MLP) or LUT layer count"),
    ("activation", "relu | tanh | sign | identity | sigmoid:<tau>"),
    ("epochs", "training epochs"),
    ("lr", "learning rate"),
    ("format", "storage format: fp32|fp16|fp8[-ext]|aq-int<N>|bnn|float:E:M:bias:<ieee|ext>"),
    ("sparsity", "magnitude-pruning fraction in [0, 1)"),
    ("thresholds", "thermometer thresholds per feature"),
    ("luts", "LUTs per layer"),
    ("k", "LUT fan-in"),
    ("passes", "greedy training passes"),
    ("depths", "comma-separated LUT depths for recovery sweeps"),
    ("budget", "oracle enumeration budget in bits"),
    ("classes", "synthetic dataset class count"),
    ("n_per_class", "synthetic dataset examples per class"),
    ("test_fraction", "held-out fraction for train reports"),
];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

/// Keys allowed to appear more than once.
const REPEATABLE: &[&str] = &["model"];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !is_known(key) {
                return Err(HarnessError::Config {
                    line: i + 1,
                    message: format!("unknown key {key:?}"),
                });
            }
            if !REPEATABLE.contains(&key) && entries.iter().any(|(k, _)| k == key) {
                return Err(HarnessError::Config {
                    line: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Set or replace a key (CLI overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        assert!(is_known(key), "harness bug: setting unknown key {key}");
        let value = value.into();
        if let Some(entry) = self.entries.iter_mut().find(|(k, _)| k == key) {
            entry.1 = value;
        } else {
            self.entries.push((key.to_string(), value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn values(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn require(&self, key: &str) -> Result<&str, HarnessError> {
        self.get(key).ok_or_else(|| HarnessError::MissingKey { key: key.to_string() })
    }

    pub fn get_parsed<T: std::str::FromStr>(
        &self,
        key: &str,
        default: T,
    ) -> Result<T, HarnessError> {
        match self.get(key) {
            None => Ok(default),
            Some(text) => text.parse().map_err(|_| HarnessError::BadValue {
                key: key.to_string(),
                value: text.to_string(),
            }),
        }
    }

    /// Comma-separated f64 list.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, HarnessError> {
        match self.get(key) {
            None => Ok(None),
            Some(text) => {
                let values = text
                    .split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| HarnessError::BadValue {
                            key: key.to_string(),
                            value: v.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Some(values))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let cfg = ConfigFile::parse("# comment\nseed = 7\np_grid = 0,0.1\n").unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.get_f64_list("p_grid").unwrap().unwrap(), vec![0.0, 0.1]);
    }

    #[test]
    fn unknown_key_is_a_hard_error() {
        let err = ConfigFile::parse("sede = 7\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(err.to_string().contains("line 1") || err.to_string().contains("1"));
    }

    #[test]
    fn duplicate_scalar_key_rejected_but_model_repeats() {
        assert!(ConfigFile::parse("seed = 1\nseed = 2\n").is_err());
        let cfg = ConfigFile::parse("model = a.flm\nmodel = b.flm\n").unwrap();
        assert_eq!(cfg.values("model"), vec!["a.flm", "b.flm"]);
    }

    #[test]
    fn overrides_replace_in_place() {
        let mut cfg = ConfigFile::parse("seed = 1\n").unwrap();
        cfg.set("seed", "9");
        cfg.set("trials", "5");
        assert_eq!(cfg.get("seed"), Some("9"));
        assert_eq!(cfg.get("trials"), Some("5"));
    }
}
