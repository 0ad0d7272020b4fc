//! Desk-scale datasets: synthetic generators and delimited-text ingestion.
//!
//! Rows are `f1,f2,...,label` with a one-line header; labels are class
//! indices in `[0, classes)`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Deterministic shuffled split into (train, test) with the given test
    /// fraction.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let test_len = ((self.len() as f64) * test_fraction).round() as usize;
        let (test_idx, train_idx) = order.split_at(test_len.min(self.len()));
        let pick = |idx: &[usize], tag: &str| Dataset {
            name: format!("{}-{}", self.name, tag),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        };
        (pick(train_idx, "train"), pick(test_idx, "test"))
    }

    /// Per-feature (min, max) over the dataset.
    pub fn feature_ranges(&self) -> Vec<(f64, f64)> {
        let d = self.feature_count();
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for row in &self.features {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Gaussian class clusters on a circle of centers; linearly separable
    /// when the centers are far apart.
    Blobs,
    /// Concentric rings, one radius band per class; not linearly separable.
    Rings,
}

impl SyntheticKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "blobs" => Some(SyntheticKind::Blobs),
            "rings" => Some(SyntheticKind::Rings),
            _ => None,
        }
    }
}

/// Deterministic synthetic dataset. Blobs places class centers evenly on a
/// radius-3 circle with sigma 0.6; rings nests classes at radii 1.2, 2.6,
/// 4.0, ... with radial sigma 0.12.
pub fn make_synthetic(
    kind: SyntheticKind,
    n_per_class: usize,
    classes: usize,
    seed: u64,
) -> Dataset {
    assert!(classes >= 2, "need at least two classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_per_class * classes);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    match kind {
        SyntheticKind::Blobs => {
            let noise = Normal::new(0.0, 0.6).unwrap();
            for class in 0..classes {
                let angle = std::f64::consts::TAU * class as f64 / classes as f64;
                let (cx, cy) = (3.0 * angle.cos(), 3.0 * angle.sin());
                for _ in 0..n_per_class {
                    features.push(vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]);
                    labels.push(class);
                }
            }
        }
        SyntheticKind::Rings => {
            let radial = Normal::new(0.0, 0.12).unwrap();
            for class in 0..classes {
                let radius = 1.2 + 1.4 * class as f64;
                for _ in 0..n_per_class {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    let r = radius + radial.sample(&mut rng);
                    features.push(vec![r * theta.cos(), r * theta.sin()]);
                    labels.push(class);
                }
            }
        }
    }
    let name = match kind {
        SyntheticKind::Blobs => format!("blobs{classes}"),
        SyntheticKind::Rings => format!("rings{classes}"),
    };
    Dataset { name, features, labels, classes }
}

/// Load `f1,...,fn,label` rows with a one-line header.
pub fn load_delimited(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_delimited(&text, path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset"))
}

pub fn parse_delimited(text: &str, name: &str) -> Result<Dataset, DatasetError> {
    let mut lines = text.lines().enumerate();
    // Header line is present but unused beyond existence.
    let _ = lines
        .next()
        .ok_or(DatasetError::Empty)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(DatasetError::Parse {
                line: line_no + 1,
                message: "expected at least one feature and a label".into(),
            });
        }
        let (label_field, feature_fields) = fields.split_last().unwrap();
        match width {
            None => width = Some(feature_fields.len()),
            Some(w) if w != feature_fields.len() => {
                return Err(DatasetError::Parse {
                    line: line_no + 1,
                    message: format!("expected {w} features, got {}", feature_fields.len()),
                })
            }
            _ => {}
        }
        let row: Vec<f64> = feature_fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| DatasetError::Parse {
                    line: line_no + 1,
                    message: format!("bad feature value {f:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let label = label_field.parse::<usize>().map_err(|_| DatasetError::Parse {
            line: line_no + 1,
            message: format!("bad label {label_field:?}"),
        })?;
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(DatasetError::Empty);
    }
    let classes = labels.iter().copied().max().unwrap() + 1;
    Ok(Dataset { name: name.to_string(), features, labels, classes })
}

/// Write the delimited format produced by `load_delimited`.
pub fn write_delimited(dataset: &Dataset) -> String {
    let mut out = String::new();
    let d = dataset.feature_count();
    for i in 0..d {
        out.push_str(&format!("f{i},"));
    }
    out.push_str("label\n");
    for (row, label) in dataset.features.iter().zip(&dataset.labels) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{label}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic() {
        let a = make_synthetic(SyntheticKind::Blobs, 20, 3, 7);
        let b = make_synthetic(SyntheticKind::Blobs, 20, 3, 7);
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        let c = make_synthetic(SyntheticKind::Blobs, 20, 3, 8);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn blob_classes_are_separated() {
        let data = make_synthetic(SyntheticKind::Blobs, 50, 2, 1);
        // Centers at angle 0 and pi: the x coordinate separates the classes
        // except for rare noise excursions.
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(row, &label)| (row[0] > 0.0) == (label == 0))
            .count();
        assert!(correct as f64 / data.len() as f64 > 0.98);
    }

    #[test]
    fn delimited_round_trip() {
        let data = make_synthetic(SyntheticKind::Rings, 10, 2, 3);
        let text = write_delimited(&data);
        let parsed = parse_delimited(&text, "rings2").unwrap();
        assert_eq!(parsed.labels, data.labels);
        assert_eq!(parsed.classes, 2);
        for (a, b) in parsed.features.iter().zip(&data.features) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x, y, "Display round-trips f64 exactly");
            }
        }
    }

    #[test]
    fn delimited_rejects_ragged_rows() {
        let text = "f0,f1,label\n1.0,2.0,0\n1.0,1\n";
        assert!(parse_delimited(text, "bad").is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let data = make_synthetic(SyntheticKind::Blobs, 30, 2, 5);
        let (train_a, test_a) = data.split(0.25, 11);
        let (train_b, test_b) = data.split(0.25, 11);
        assert_eq!(train_a.features, train_b.features);
        assert_eq!(test_a.features, test_b.features);
        assert_eq!(train_a.len() + test_a.len(), data.len());
        assert_eq!(test_a.len(), 15);
    }
}
