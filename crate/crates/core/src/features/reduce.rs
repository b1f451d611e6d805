//! Raw per-box descriptors and their PCA reduction to one feature vector.

use serde::{Deserialize, Serialize};

use super::boxes::{extract_boxes, Rect};
use super::gabor::GaborBank;
use super::hog::hog_features;
use super::image::GrayImage;
use super::lbp::lbp_histogram;
use crate::error::{Error, Result};
use crate::numerics::{fit_pca, Matrix, PcaProjection};

/// Number of boxes in the layout.
pub const BOXES: usize = 5;

/// Which descriptors to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub gabor: bool,
    pub hog: bool,
    pub lbp: bool,
}

impl Default for DescriptorSet {
    fn default() -> Self {
        DescriptorSet {
            gabor: true,
            hog: true,
            lbp: true,
        }
    }
}

impl DescriptorSet {
    /// Parses a comma-separated list such as `gabor,lbp`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut set = DescriptorSet {
            gabor: false,
            hog: false,
            lbp: false,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "gabor" => set.gabor = true,
                "hog" => set.hog = true,
                "lbp" => set.lbp = true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown descriptor {other:?} (expected gabor, hog, lbp)"
                    )))
                }
            }
        }
        if !(set.gabor || set.hog || set.lbp) {
            return Err(Error::InvalidArgument("no descriptor selected".into()));
        }
        Ok(set)
    }
}

/// Descriptors of one patch; a deselected descriptor is empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDescriptors {
    /// Pooled Gabor magnitudes (40·64·64).
    pub gabor: Vec<f64>,
    pub hog: Vec<f64>,
    pub lbp: Vec<f64>,
}

pub fn describe_patch(patch: &GrayImage, set: &DescriptorSet) -> Result<RawDescriptors> {
    Ok(RawDescriptors {
        gabor: if set.gabor {
            GaborBank::standard().pooled_features(patch)?
        } else {
            Vec::new()
        },
        hog: if set.hog { hog_features(patch)? } else { Vec::new() },
        lbp: if set.lbp { lbp_histogram(patch)? } else { Vec::new() },
    })
}

/// Descriptors of the five boxes around `face`.
pub fn describe_image(image: &GrayImage, face: Rect, set: &DescriptorSet) -> Result<Vec<RawDescriptors>> {
    extract_boxes(image, face)?
        .iter()
        .map(|p| describe_patch(p, set))
        .collect()
}

/// Target dimensions per descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaDims {
    pub gabor: usize,
    pub hog: usize,
    pub lbp: usize,
}

impl Default for PcaDims {
    fn default() -> Self {
        PcaDims {
            gabor: 200,
            hog: 200,
            lbp: 40,
        }
    }
}

/// One projection per descriptor type, shared by all five boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePca {
    pub gabor: Option<PcaProjection>,
    pub hog: Option<PcaProjection>,
    pub lbp: Option<PcaProjection>,
}

impl FeaturePca {
    /// Length of the concatenated output.
    pub fn output_dim(&self) -> usize {
        let k = |p: &Option<PcaProjection>| p.as_ref().map_or(0, |p| p.output_dim());
        BOXES * (k(&self.gabor) + k(&self.hog) + k(&self.lbp))
    }

    pub fn descriptors(&self) -> DescriptorSet {
        DescriptorSet {
            gabor: self.gabor.is_some(),
            hog: self.hog.is_some(),
            lbp: self.lbp.is_some(),
        }
    }
}

fn fit_one(
    boxes: &[RawDescriptors],
    pick: fn(&RawDescriptors) -> &[f64],
    k: usize,
    name: &str,
) -> Result<PcaProjection> {
    let rows: Vec<Vec<f64>> = boxes.iter().map(|b| pick(b).to_vec()).collect();
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension(format!(
            "{name} descriptors have inconsistent lengths {dim} and {}",
            bad.len()
        )));
    }
    fit_pca(&Matrix::from_rows(&rows)?, k).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{name} PCA: {msg}")),
        other => other,
    })
}

/// Fits one PCA per descriptor type on every box of every training image.
///
/// `boxes` is a flat list of box descriptors; a type is fitted when the
/// first box carries it.
pub fn fit_feature_pca(boxes: &[RawDescriptors], dims: &PcaDims) -> Result<FeaturePca> {
    let Some(first) = boxes.first() else {
        return Err(Error::InvalidArgument("PCA fitting needs at least one image".into()));
    };
    let gabor = if first.gabor.is_empty() {
        None
    } else {
        Some(fit_one(boxes, |b| &b.gabor, dims.gabor, "gabor")?)
    };
    let hog = if first.hog.is_empty() {
        None
    } else {
        Some(fit_one(boxes, |b| &b.hog, dims.hog, "hog")?)
    };
    let lbp = if first.lbp.is_empty() {
        None
    } else {
        Some(fit_one(boxes, |b| &b.lbp, dims.lbp, "lbp")?)
    };
    Ok(FeaturePca { gabor, hog, lbp })
}

/// Per box: Gabor, HOG, LBP codes; boxes in layout order.
pub fn reduce_and_concat(boxes: &[RawDescriptors], pca: &FeaturePca) -> Result<Vec<f64>> {
    if boxes.len() != BOXES {
        return Err(Error::Dimension(format!("expected {BOXES} boxes, got {}", boxes.len())));
    }
    let mut x = Vec::with_capacity(pca.output_dim());
    for (i, b) in boxes.iter().enumerate() {
        for (name, raw, proj) in [
            ("gabor", &b.gabor, &pca.gabor),
            ("hog", &b.hog, &pca.hog),
            ("lbp", &b.lbp, &pca.lbp),
        ] {
            match proj {
                Some(p) => x.extend(
                    p.project(raw)
                        .map_err(|e| Error::Dimension(format!("box {i} {name}: {e}")))?,
                ),
                None if !raw.is_empty() => {
                    return Err(Error::Dimension(format!(
                        "box {i} has {name} descriptors but the PCA has no {name} projection"
                    )))
                }
                None => {}
            }
        }
    }
    Ok(x)
}

/// Image plus face box to the final feature vector.
pub fn image_features(image: &GrayImage, face: Rect, pca: &FeaturePca) -> Result<Vec<f64>> {
    let boxes = describe_image(image, face, &pca.descriptors())?;
    reduce_and_concat(&boxes, pca)
}
