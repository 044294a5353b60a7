//! Detection-to-ground-truth matching and precision / recall / F-score.
//!
//! A detection matches a ground-truth region when their IoU is strictly
//! greater than `tau`. Two matching modes are offered:
//!
//! * [`MatchMode::OneToOne`] (default): greedy assignment over all pairs by
//!   descending IoU, each detection and each region used at most once.
//! * [`MatchMode::PaperLiteral`]: a detection counts as matched if *any*
//!   region exceeds `tau`; duplicates of one region all count, so recall
//!   can exceed 1.
//!
//! Dataset scores are micro-averaged: counts are summed over images before
//! computing P/R/F.

use std::collections::BTreeMap;
use std::iter::Sum;
use std::ops::Add;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Detection, GroundTruth, GtRegion, ModelOutput};
use crate::error::{Error, Result};
use crate::geometry::{iou, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub n_match: usize,
    pub n_det: usize,
    pub n_gt: usize,
}

impl EvalCounts {
    pub const fn new(n_match: usize, n_det: usize, n_gt: usize) -> Self {
        Self { n_match, n_det, n_gt }
    }
}

impl Add for EvalCounts {
    type Output = EvalCounts;
    fn add(self, o: EvalCounts) -> EvalCounts {
        EvalCounts::new(self.n_match + o.n_match, self.n_det + o.n_det, self.n_gt + o.n_gt)
    }
}

impl Sum for EvalCounts {
    fn sum<I: Iterator<Item = EvalCounts>>(iter: I) -> Self {
        iter.fold(EvalCounts::default(), Add::add)
    }
}

impl<'a> Sum<&'a EvalCounts> for EvalCounts {
    fn sum<I: Iterator<Item = &'a EvalCounts>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl PrfScore {
    /// Harmonic mean, zero when both inputs are zero.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f_score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    OneToOne,
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub tau: f64,
    pub mode: MatchMode,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { tau: 0.5, mode: MatchMode::OneToOne }
    }
}

impl MatchConfig {
    pub fn new(tau: f64, mode: MatchMode) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::input(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self { tau, mode })
    }
}

/// Counts matched detections between two polygon lists.
pub fn match_detections(dets: &[Polygon], gts: &[Polygon], cfg: &MatchConfig) -> EvalCounts {
    let n_match = match cfg.mode {
        MatchMode::PaperLiteral => dets
            .iter()
            .filter(|d| gts.iter().any(|g| iou(d, g) > cfg.tau))
            .count(),
        MatchMode::OneToOne => {
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (i, d) in dets.iter().enumerate() {
                for (j, g) in gts.iter().enumerate() {
                    let v = iou(d, g);
                    if v > cfg.tau {
                        pairs.push((v, i, j));
                    }
                }
            }
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut det_used = vec![false; dets.len()];
            let mut gt_used = vec![false; gts.len()];
            let mut n = 0;
            for (_, i, j) in pairs {
                if !det_used[i] && !gt_used[j] {
                    det_used[i] = true;
                    gt_used[j] = true;
                    n += 1;
                }
            }
            n
        }
    };
    EvalCounts::new(n_match, dets.len(), gts.len())
}

/// Matches one image, honoring don't-care regions: they are removed from
/// `n_gt`, and a detection whose best overlap is a don't-care region
/// (IoU > tau) is dropped from `n_det` instead of counting as a false alarm.
pub fn match_image(dets: &[Detection], regions: &[GtRegion], cfg: &MatchConfig) -> EvalCounts {
    let care: Vec<Polygon> =
        regions.iter().filter(|r| !r.dont_care).map(|r| r.polygon.clone()).collect();
    let ignored: Vec<&Polygon> =
        regions.iter().filter(|r| r.dont_care).map(|r| &r.polygon).collect();
    let kept: Vec<Polygon> = dets
        .iter()
        .filter(|d| {
            if ignored.is_empty() {
                return true;
            }
            let best_ignored = ignored.iter().map(|g| iou(&d.polygon, g)).fold(0.0, f64::max);
            if best_ignored <= cfg.tau {
                return true;
            }
            let best_care = care.iter().map(|g| iou(&d.polygon, g)).fold(0.0, f64::max);
            best_care > best_ignored
        })
        .map(|d| d.polygon.clone())
        .collect();
    match_detections(&kept, &care, cfg)
}

pub fn prf(counts: EvalCounts) -> PrfScore {
    let p = if counts.n_det == 0 { 0.0 } else { counts.n_match as f64 / counts.n_det as f64 };
    let r = if counts.n_gt == 0 { 0.0 } else { counts.n_match as f64 / counts.n_gt as f64 };
    PrfScore::from_pr(p, r)
}

pub fn micro_aggregate(per_image: &[EvalCounts]) -> PrfScore {
    prf(per_image.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub counts: EvalCounts,
    pub score: PrfScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub per_image: BTreeMap<String, ImageScore>,
    pub totals: EvalCounts,
    pub dataset: PrfScore,
}

/// Fails with the offending id if `outputs` mentions an image absent from `gt`.
pub fn check_known_ids(outputs: &ModelOutput, gt: &GroundTruth) -> Result<()> {
    match outputs.keys().find(|id| !gt.contains_key(*id)) {
        Some(id) => Err(Error::input(format!("detections for unknown image id {id:?}"))),
        None => Ok(()),
    }
}

/// Scores one model on every ground-truth image. Images without an entry in
/// `outputs` count as zero detections.
pub fn score_model(outputs: &ModelOutput, gt: &GroundTruth, cfg: &MatchConfig) -> Result<ModelScore> {
    check_known_ids(outputs, gt)?;
    let per_image: BTreeMap<String, ImageScore> = gt
        .par_iter()
        .map(|(id, image)| {
            let dets = outputs.get(id).map(Vec::as_slice).unwrap_or(&[]);
            let counts = match_image(dets, &image.regions, cfg);
            (id.clone(), ImageScore { counts, score: prf(counts) })
        })
        .collect();
    let totals: EvalCounts = per_image.values().map(|s| s.counts).sum();
    Ok(ModelScore { per_image, totals, dataset: prf(totals) })
}
