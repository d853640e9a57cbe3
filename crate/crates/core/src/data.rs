//! Tabular datasets: CSV ingestion and synthetic fixtures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ErrorCode, Rejection, Result};

/// A labelled feature matrix. Labels are indices into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub positive_class: usize,
    pub feature_names: Vec<String>,
}

/// Shape summary served by the API and printed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub id: String,
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub classes: Vec<String>,
    pub class_counts: Vec<usize>,
    pub positive_class: String,
    pub feature_names: Vec<String>,
}

fn ingest_error(row: Option<usize>, column: Option<usize>, message: impl Into<String>) -> Rejection {
    let message = message.into();
    let location = match (row, column) {
        (Some(r), Some(c)) => format!("row {r}, column {c}: "),
        (Some(r), None) => format!("row {r}: "),
        _ => String::new(),
    };
    Rejection::new(ErrorCode::IngestionFailed, format!("{location}{message}"))
        .with_detail(serde_json::json!({ "row": row, "column": column }))
}

/// Content-derived dataset id, stable across restarts.
pub fn dataset_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    format!("ds-{}", &hex::encode(digest)[..12])
}

/// Parses a comma-delimited CSV with a header row; the last column is the class label.
///
/// Rows are numbered from 1 starting at the first data row, columns from 1.
pub fn load_csv(bytes: &[u8], name: &str) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ingest_error(None, None, format!("input is not UTF-8: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ingest_error(None, None, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(ingest_error(None, None, "need at least one feature column and a label column"));
    }
    let d = header.len() - 1;
    let mut features = Vec::new();
    let mut tokens = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ingest_error(Some(row), None, e.to_string()))?;
        if record.len() != header.len() {
            return Err(ingest_error(
                Some(row),
                None,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let mut values = Vec::with_capacity(d);
        for (j, cell) in record.iter().take(d).enumerate() {
            if cell.is_empty() {
                return Err(ingest_error(Some(row), Some(j + 1), "empty cell"));
            }
            let v: f64 = cell.parse().map_err(|_| {
                ingest_error(Some(row), Some(j + 1), format!("{cell:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(ingest_error(Some(row), Some(j + 1), "non-finite value"));
            }
            values.push(v);
        }
        let label = &record[d];
        if label.is_empty() {
            return Err(ingest_error(Some(row), Some(d + 1), "empty label"));
        }
        features.push(values);
        tokens.push(label.to_string());
    }
    if features.len() < 2 {
        return Err(ingest_error(None, None, "need at least 2 data rows"));
    }
    let mut ds = Dataset::from_tokens(name, header[..d].to_vec(), features, &tokens)?;
    ds.id = dataset_id(bytes);
    Ok(ds)
}

impl Dataset {
    /// Builds a dataset from labelled rows; classes keep first-appearance order.
    pub fn from_tokens(
        name: &str,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        tokens: &[String],
    ) -> Result<Dataset> {
        let mut classes: Vec<String> = Vec::new();
        let labels = tokens
            .iter()
            .map(|t| match classes.iter().position(|c| c == t) {
                Some(i) => i,
                None => {
                    classes.push(t.clone());
                    classes.len() - 1
                }
            })
            .collect();
        if classes.len() < 2 {
            return Err(ingest_error(None, None, "labels contain a single class"));
        }
        let positive_class = (0..classes.len())
            .max_by(|&a, &b| classes[a].cmp(&classes[b]))
            .unwrap_or(0);
        let mut ds = Dataset {
            id: String::new(),
            name: name.to_string(),
            features,
            labels,
            classes,
            positive_class,
            feature_names,
        };
        ds.id = dataset_id(ds.to_csv().as_bytes());
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn set_positive_class(&mut self, token: &str) -> Result<()> {
        self.positive_class = self
            .classes
            .iter()
            .position(|c| c == token)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownName, format!("no class {token}")))?;
        Ok(())
    }

    pub fn descriptor(&self) -> DatasetDescriptor {
        DatasetDescriptor {
            id: self.id.clone(),
            name: self.name.clone(),
            n: self.n(),
            d: self.d(),
            classes: self.classes.clone(),
            class_counts: self.class_counts(),
            positive_class: self.classes[self.positive_class].clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.feature_names.join(",");
        out.push_str(",label\n");
        for (row, &label) in self.features.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&self.classes[label]);
            out.push('\n');
        }
        out
    }
}

/// Two isotropic unit-variance Gaussian blobs whose means differ by
/// `separation` standard deviations in every coordinate. Classes alternate so
/// each holds half the rows.
pub fn gaussian_blobs(n: usize, d: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let offset = separation / 2.0;
    let mut features = Vec::with_capacity(n);
    let mut tokens = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i % 2 == 1;
        let sign = if positive { 1.0 } else { -1.0 };
        features.push(
            (0..d)
                .map(|_| sign * offset + normal.sample(&mut rng))
                .collect(),
        );
        tokens.push(if positive { "pos" } else { "neg" }.to_string());
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::from_tokens("blobs", names, features, &tokens).expect("two classes")
}
