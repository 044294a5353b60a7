//! Turns per-image model scores into a multi-label selector dataset.
//!
//! Every model whose per-image F equals the image's best F gets a positive
//! label, so ties produce multi-label targets. An image nobody detects
//! anything useful on (best F of zero) is kept as an all-negative record.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruth, ModelOutput};
use crate::error::{Error, Result};
use crate::scoring::{score_model, MatchConfig};

/// Two F-scores closer than this are treated as a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub image_id: String,
    pub features: Vec<f64>,
    pub f_scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LabelRecord {
    pub fn is_positive(&self, model: usize) -> bool {
        self.labels.get(model).is_some_and(|&b| b == 1)
    }

    pub fn has_positive(&self) -> bool {
        self.labels.iter().any(|&b| b == 1)
    }
}

pub fn make_label(f_scores: &[f64]) -> Result<Vec<u8>> {
    if f_scores.is_empty() {
        return Err(Error::input("cannot label an empty score vector"));
    }
    let best = f_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(f_scores
        .iter()
        .map(|&f| u8::from(best > 0.0 && (best - f).abs() <= TIE_TOL))
        .collect())
}

/// One record per ground-truth image, sorted by image id. Images missing
/// from a model's output count as zero detections for that model.
pub fn build_dataset(
    gt: &GroundTruth,
    model_outputs: &[ModelOutput],
    features: &BTreeMap<String, Vec<f64>>,
    cfg: &MatchConfig,
) -> Result<Vec<LabelRecord>> {
    if model_outputs.is_empty() {
        return Err(Error::input("need at least one model output"));
    }
    let mut dim = None;
    for id in gt.keys() {
        let f = features
            .get(id)
            .ok_or_else(|| Error::input(format!("no feature vector for image {id:?}")))?;
        match dim {
            None => dim = Some(f.len()),
            Some(d) if d != f.len() => {
                return Err(Error::input(format!(
                    "feature length {} for image {id:?} differs from {d}",
                    f.len()
                )))
            }
            _ => {}
        }
    }
    let scores = model_outputs
        .iter()
        .map(|out| score_model(out, gt, cfg))
        .collect::<Result<Vec<_>>>()?;
    gt.keys()
        .map(|id| {
            let f_scores: Vec<f64> = scores.iter().map(|s| s.per_image[id].score.f_score).collect();
            let labels = make_label(&f_scores)?;
            Ok(LabelRecord { image_id: id.clone(), features: features[id].clone(), f_scores, labels })
        })
        .collect()
}

/// Drops records without any positive label.
pub fn drop_unlabeled(records: Vec<LabelRecord>) -> Vec<LabelRecord> {
    records.into_iter().filter(LabelRecord::has_positive).collect()
}
