//! Samples, the JSONL dataset format and attribute co-occurrence statistics.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::CooccurrenceMatrix;
use crate::numerics::{all_finite, Matrix};
use crate::schema::AttributeSchema;
use crate::{BINARY_THRESHOLD, SCORE_MAX, SCORE_MIN};

/// One image: feature vector, attribute confidences and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

impl Sample {
    pub fn new(id: impl Into<String>, x: Vec<f64>, a: Option<Vec<f64>>, y: Option<f64>) -> Self {
        Sample { id: id.into(), x, a, y }
    }

    /// Checks the per-sample invariants against an attribute count `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !all_finite(&self.x) {
            return Err(Error::Validation(format!(
                "record {:?}: feature vector has non-finite entries",
                self.id
            )));
        }
        if let Some(a) = &self.a {
            if a.len() != n {
                return Err(Error::Schema(format!(
                    "record {:?}: attribute vector has length {}, schema has {n} slots",
                    self.id,
                    a.len()
                )));
            }
            if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "record {:?}: attribute {i} = {v} is outside [0, 1]",
                    self.id
                )));
            }
        }
        if let Some(y) = self.y {
            if !(SCORE_MIN..=SCORE_MAX).contains(&y) {
                return Err(Error::Validation(format!(
                    "record {:?}: score {y} is outside [{SCORE_MIN}, {SCORE_MAX}]",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn attributes(&self) -> Result<&[f64]> {
        self.a
            .as_deref()
            .ok_or_else(|| Error::Validation(format!("record {:?} has no attribute annotation", self.id)))
    }

    pub fn score(&self) -> Result<f64> {
        self.y
            .ok_or_else(|| Error::Validation(format!("record {:?} has no score annotation", self.id)))
    }
}

/// Validates a whole dataset: per-sample invariants plus a shared feature dimension.
pub fn validate_samples(samples: &[Sample], n: usize) -> Result<()> {
    let d = samples.first().map(|s| s.x.len());
    for s in samples {
        s.validate(n)?;
        if Some(s.x.len()) != d {
            return Err(Error::Schema(format!(
                "record {:?}: feature dimension {} differs from the dataset's {}",
                s.id,
                s.x.len(),
                d.unwrap_or(0)
            )));
        }
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(reader: R, schema: &AttributeSchema) -> Result<Vec<Sample>> {
    let mut samples: Vec<Sample> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        sample.validate(schema.len())?;
        if let Some(first) = samples.first() {
            if first.x.len() != sample.x.len() {
                return Err(Error::Schema(format!(
                    "record {:?} (line {}): feature dimension {} differs from the dataset's {}",
                    sample.id,
                    lineno + 1,
                    sample.x.len(),
                    first.x.len()
                )));
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn load_dataset(path: &Path, schema: &AttributeSchema) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), schema)
}

pub fn write_dataset<W: Write>(mut writer: W, samples: &[Sample]) -> Result<()> {
    for s in samples {
        let line = serde_json::to_string(s)?;
        writeln!(writer, "{line}").map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, samples)?;
    write_atomic(path, &buf)
}

/// `M_ij = (1/m) · #{samples with aᵢ ≥ 0.5 and a_j ≥ 0.5}`.
pub fn compute_cooccurrence(samples: &[Sample]) -> Result<CooccurrenceMatrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("co-occurrence needs at least one sample".into()))?;
    let n = first.attributes()?.len();
    let mut counts = Matrix::zeros(n, n);
    for s in samples {
        let a = s.attributes()?;
        if a.len() != n {
            return Err(Error::Schema(format!(
                "record {:?}: attribute vector has length {}, expected {n}",
                s.id,
                a.len()
            )));
        }
        let active: Vec<usize> = (0..n).filter(|&i| a[i] >= BINARY_THRESHOLD).collect();
        for &i in &active {
            for &j in &active {
                counts[(i, j)] += 1.0;
            }
        }
    }
    let m = samples.len() as f64;
    let freq = Matrix::from_fn(n, n, |i, j| counts[(i, j)] / m);
    CooccurrenceMatrix::new(freq)
}
