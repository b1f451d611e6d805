//! Comparison methods and evaluation metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClsvmModel;
use crate::numerics::Matrix;
use crate::schema::AttributeSchema;
use crate::svr::{train_attribute_regressors, train_svr, LinearRegressor, SvrConfig};
use crate::{binarize, clip_score, Sample};

/// Feature → score regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsModel {
    pub regressor: LinearRegressor,
}

impl FsModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.regressor.w.len() {
            return Err(Error::Dimension(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.regressor.w.len()
            )));
        }
        Ok(clip_score(self.regressor.predict(x)))
    }
}

fn scores(samples: &[Sample]) -> Result<Vec<f64>> {
    samples.iter().map(Sample::score).collect()
}

pub fn train_fs(samples: &[Sample], svr: &SvrConfig) -> Result<FsModel> {
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let regressor = train_svr(&xs, &scores(samples)?, svr)?;
    Ok(FsModel { regressor })
}

/// What the second stage of F-A-S consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOneOutput {
    /// Raw regression outputs.
    Continuous,
    /// Outputs thresholded at 0.5, like the annotations.
    #[default]
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FasConfig {
    /// Stage 2 (attributes → score).
    pub svr: SvrConfig,
    /// Stage 1 (features → each attribute).
    pub attribute_svr: SvrConfig,
    pub stage_one_output: StageOneOutput,
    /// Train stage 2 on annotated attributes instead of stage-1 predictions.
    pub stage_two_on_ground_truth: bool,
}

impl Default for FasConfig {
    fn default() -> Self {
        FasConfig {
            svr: SvrConfig::default(),
            attribute_svr: SvrConfig::attribute_default(),
            stage_one_output: StageOneOutput::default(),
            stage_two_on_ground_truth: false,
        }
    }
}

/// Feature → attributes → score, two independent regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FasModel {
    /// `d×n`
    pub w_xa: Matrix,
    pub b_xa: Vec<f64>,
    pub stage_one_output: StageOneOutput,
    pub stage_two: LinearRegressor,
}

impl FasModel {
    pub fn predict_attributes(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.w_xa.rows() {
            return Err(Error::Dimension(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.w_xa.rows()
            )));
        }
        let mut a = self.w_xa.tr_matvec(x);
        for (ai, b) in a.iter_mut().zip(&self.b_xa) {
            *ai = (*ai + b).clamp(0.0, 1.0);
        }
        Ok(match self.stage_one_output {
            StageOneOutput::Continuous => a,
            StageOneOutput::Binary => binarize(&a),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let a = self.predict_attributes(x)?;
        Ok(clip_score(self.stage_two.predict(&a)))
    }
}

pub fn train_fas(samples: &[Sample], config: &FasConfig) -> Result<FasModel> {
    let n = match samples.first() {
        Some(s) => s.attributes()?.len(),
        None => return Err(Error::InvalidArgument("F-A-S needs at least one sample".into())),
    };
    if n == 0 {
        return Err(Error::InvalidArgument("F-A-S needs at least one attribute".into()));
    }
    let (w_xa, b_xa) = train_attribute_regressors(samples, &config.attribute_svr)?;
    let mut model = FasModel {
        w_xa,
        b_xa,
        stage_one_output: config.stage_one_output,
        stage_two: LinearRegressor {
            w: vec![0.0; n],
            b: 0.0,
        },
    };
    let stage_two_inputs: Vec<Vec<f64>> = if config.stage_two_on_ground_truth {
        samples
            .iter()
            .map(|s| s.attributes().map(<[f64]>::to_vec))
            .collect::<Result<_>>()?
    } else {
        samples
            .iter()
            .map(|s| model.predict_attributes(&s.x))
            .collect::<Result<_>>()?
    };
    model.stage_two = train_svr(&stage_two_inputs, &scores(samples)?, &config.svr)?;
    Ok(model)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("MAE of an empty set".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Per-slot fraction of samples whose binarized prediction matches the truth.
pub fn attribute_accuracy(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predicted attribute vectors for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    let n = truth[0].len();
    let mut hits = vec![0usize; n];
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != n || t.len() != n {
            return Err(Error::Dimension(format!(
                "attribute vectors of lengths {} and {}, expected {n}",
                p.len(),
                t.len()
            )));
        }
        for (h, (pv, tv)) in hits.iter_mut().zip(binarize(p).iter().zip(binarize(t))) {
            if *pv == tv {
                *h += 1;
            }
        }
    }
    Ok(hits.iter().map(|h| *h as f64 / pred.len() as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub rank: usize,
    pub slot: String,
    pub index: usize,
    pub weight: f64,
}

/// Attribute → score weights, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub entries: Vec<WeightEntry>,
}

impl WeightReport {
    pub fn new(schema: &AttributeSchema, w_ay: &[f64]) -> Result<Self> {
        if w_ay.len() != schema.len() {
            return Err(Error::Dimension(format!(
                "{} weights for a schema of {} slots",
                w_ay.len(),
                schema.len()
            )));
        }
        let mut order: Vec<usize> = (0..w_ay.len()).collect();
        // descending weight; ties go to the lower slot index
        order.sort_by(|&i, &j| w_ay[j].total_cmp(&w_ay[i]).then(i.cmp(&j)));
        let entries = order
            .into_iter()
            .enumerate()
            .map(|(rank, index)| WeightEntry {
                rank: rank + 1,
                slot: schema.slots()[index].clone(),
                index,
                weight: w_ay[index],
            })
            .collect();
        Ok(WeightReport { entries })
    }

    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|e| e.slot.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:>4}  {:<width$}  {:>12}\n", "rank", "slot", "weight");
        for e in &self.entries {
            let _ = writeln!(out, "{:>4}  {:<width$}  {:>12.6}", e.rank, e.slot, e.weight);
        }
        out
    }

    /// Plot data: `rank,slot,index,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,slot,index,weight\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.rank, e.slot, e.index, e.weight);
        }
        out
    }
}

pub fn attribute_weight_report(model: &ClsvmModel) -> Result<WeightReport> {
    WeightReport::new(&model.schema, &model.predictors.w_ay)
}

/// Published MAE of the four methods on the original photo collection.
const PUBLISHED_MAE: &str = "NN 1.92\nF-S 1.49\nF-A-S 1.35\nC-LSVM 1.27\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMae {
    pub method: String,
    pub mae: f64,
}

pub fn published_reference() -> Vec<ReferenceMae> {
    PUBLISHED_MAE
        .lines()
        .filter_map(|line| {
            let (method, value) = line.split_once(' ')?;
            Some(ReferenceMae {
                method: method.to_string(),
                mae: value.trim().parse().ok()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAccuracy {
    pub slot: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub mae: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attribute_accuracy: Option<Vec<SlotAccuracy>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_attribute_accuracy: Option<f64>,
    pub published_reference: Vec<ReferenceMae>,
}

impl EvalReport {
    /// `pred_attributes` are only scored when every truth sample is annotated.
    pub fn new(
        pred_scores: &[f64],
        pred_attributes: Option<&[Vec<f64>]>,
        truth: &[Sample],
        schema: &AttributeSchema,
    ) -> Result<Self> {
        let mae = mae(pred_scores, &scores(truth)?)?;
        let mut report = EvalReport {
            count: truth.len(),
            mae,
            attribute_accuracy: None,
            mean_attribute_accuracy: None,
            published_reference: published_reference(),
        };
        if let Some(pred) = pred_attributes {
            if truth.iter().all(|s| s.a.is_some()) {
                let t: Vec<Vec<f64>> = truth.iter().map(|s| s.a.clone().unwrap_or_default()).collect();
                let acc = attribute_accuracy(pred, &t)?;
                if acc.len() != schema.len() {
                    return Err(Error::Dimension(format!(
                        "{} attribute slots, schema has {}",
                        acc.len(),
                        schema.len()
                    )));
                }
                report.mean_attribute_accuracy = Some(acc.iter().sum::<f64>() / acc.len() as f64);
                report.attribute_accuracy = Some(
                    schema
                        .slots()
                        .iter()
                        .zip(acc)
                        .map(|(slot, accuracy)| SlotAccuracy {
                            slot: slot.clone(),
                            accuracy,
                        })
                        .collect(),
                );
            }
        }
        Ok(report)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("samples  {}\nMAE      {:.4}\n", self.count, self.mae);
        if let (Some(acc), Some(mean)) = (&self.attribute_accuracy, self.mean_attribute_accuracy) {
            let width = acc.iter().map(|s| s.slot.len()).max().unwrap_or(4);
            let _ = writeln!(out, "\nattribute accuracy (mean {mean:.4})");
            for s in acc {
                let _ = writeln!(out, "  {:<width$}  {:.4}", s.slot, s.accuracy);
            }
        }
        out.push_str("\npublished reference MAE\n");
        for r in &self.published_reference {
            let _ = writeln!(out, "  {:<7} {:.2}", r.method, r.mae);
        }
        out
    }
}
