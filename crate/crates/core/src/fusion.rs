//! Pool-and-suppress baseline: greedy hard NMS over all models' detections.

use rayon::prelude::*;

use crate::data::{Detection, GroundTruth, ModelOutput};
use crate::error::Result;
use crate::geometry::{iou, Polygon};
use crate::scoring::{check_known_ids, score_model, MatchConfig, ModelScore};

pub const DEFAULT_NMS_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDetection {
    pub polygon: Polygon,
    pub confidence: f64,
    pub source_model: usize,
}

/// Greedy NMS. Candidates are visited by confidence (descending), then
/// source model, then input position; a candidate survives if its IoU with
/// every survivor so far is at most `iou_threshold`.
pub fn nms(dets: &[ScoredDetection], iou_threshold: f64) -> Vec<ScoredDetection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(dets[a].source_model.cmp(&dets[b].source_model))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<ScoredDetection> = Vec::new();
    for i in order {
        let d = &dets[i];
        if kept.iter().all(|k| iou(&k.polygon, &d.polygon) <= iou_threshold) {
            kept.push(d.clone());
        }
    }
    kept
}

/// Pools every model's detections per image and suppresses duplicates.
pub fn fuse_outputs(model_outputs: &[ModelOutput], iou_threshold: f64) -> ModelOutput {
    let mut ids: Vec<&String> = model_outputs.iter().flat_map(|m| m.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_par_iter()
        .map(|id| {
            let pooled: Vec<ScoredDetection> = model_outputs
                .iter()
                .enumerate()
                .flat_map(|(k, m)| {
                    m.get(id).into_iter().flatten().map(move |d| ScoredDetection {
                        polygon: d.polygon.clone(),
                        confidence: d.confidence,
                        source_model: k,
                    })
                })
                .collect();
            let fused = nms(&pooled, iou_threshold)
                .into_iter()
                .map(|s| Detection { polygon: s.polygon, confidence: s.confidence })
                .collect();
            (id.clone(), fused)
        })
        .collect()
}

pub fn fuse_and_score(
    model_outputs: &[ModelOutput],
    gt: &GroundTruth,
    iou_threshold: f64,
    cfg: &MatchConfig,
) -> Result<ModelScore> {
    for out in model_outputs {
        check_known_ids(out, gt)?;
    }
    score_model(&fuse_outputs(model_outputs, iou_threshold), gt, cfg)
}
