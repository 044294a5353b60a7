//! Two-stage ensemble evaluation (select a model per image, then score only
//! that model), the oracle upper bound, and the comparison report.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{GroundTruth, GtImage, ModelOutput};
use crate::error::{Error, Result};
use crate::fusion::fuse_and_score;
use crate::scoring::{check_known_ids, match_image, prf, score_model, EvalCounts, MatchConfig, MatchMode, PrfScore};
use crate::selector::{select, FeatureExtractor, SelectorNet};
use crate::synthbench::SceneSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub image_id: String,
    pub selected: usize,
    /// Number of base models whose outputs were read for this image.
    pub models_consulted: usize,
    pub counts: EvalCounts,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub totals: EvalCounts,
    pub score: PrfScore,
    pub trace: Vec<SelectionStep>,
}

fn check_pool(model_outputs: &[ModelOutput], gt: &GroundTruth) -> Result<()> {
    if model_outputs.is_empty() {
        return Err(Error::input("model pool is empty"));
    }
    for out in model_outputs {
        check_known_ids(out, gt)?;
    }
    Ok(())
}

/// Scores the pool when `choose` picks one model per image; only the chosen
/// model's detections are read.
pub fn evaluate_with_selection<F>(model_outputs: &[ModelOutput], gt: &GroundTruth, cfg: &MatchConfig, choose: F) -> Result<SelectionResult>
where
    F: Fn(&str, &GtImage) -> Result<usize> + Sync,
{
    check_pool(model_outputs, gt)?;
    let trace: Vec<SelectionStep> = gt
        .par_iter()
        .map(|(id, image)| {
            let selected = choose(id, image)?;
            let out = model_outputs
                .get(selected)
                .ok_or_else(|| Error::input(format!("selected model {selected} outside pool of {}", model_outputs.len())))?;
            let dets = out.get(id).map(Vec::as_slice).unwrap_or(&[]);
            let counts = match_image(dets, &image.regions, cfg);
            Ok(SelectionStep { image_id: id.clone(), selected, models_consulted: 1, counts, f_score: prf(counts).f_score })
        })
        .collect::<Result<_>>()?;
    let totals: EvalCounts = trace.iter().map(|s| s.counts).sum();
    Ok(SelectionResult { totals, score: prf(totals), trace })
}

/// Selector-driven evaluation: features from each image's scene, the
/// highest-scoring model, and that model's detections only.
pub fn pel_evaluate(
    net: &SelectorNet,
    extractor: &dyn FeatureExtractor,
    model_outputs: &[ModelOutput],
    gt: &GroundTruth,
    cfg: &MatchConfig,
) -> Result<SelectionResult> {
    if net.output_dim() != model_outputs.len() {
        return Err(Error::input(format!(
            "selector scores {} models but the pool has {}",
            net.output_dim(),
            model_outputs.len()
        )));
    }
    if net.input_dim() != extractor.dim() {
        return Err(Error::input(format!(
            "selector expects {} features, extractor {:?} gives {}",
            net.input_dim(),
            extractor.id(),
            extractor.dim()
        )));
    }
    evaluate_with_selection(model_outputs, gt, cfg, |id, image| {
        select(net, &extractor.extract(&SceneSample::from_gt(id, image)))
    })
}

/// Perfect per-image selection: the model with the highest per-image F,
/// lowest index on ties (including all-zero images).
pub fn oracle_evaluate(model_outputs: &[ModelOutput], gt: &GroundTruth, cfg: &MatchConfig) -> Result<SelectionResult> {
    check_pool(model_outputs, gt)?;
    let trace: Vec<SelectionStep> = gt
        .par_iter()
        .map(|(id, image)| {
            let mut best: Option<(usize, EvalCounts, f64)> = None;
            for (k, out) in model_outputs.iter().enumerate() {
                let counts = match_image(out.get(id).map(Vec::as_slice).unwrap_or(&[]), &image.regions, cfg);
                let f = prf(counts).f_score;
                if best.is_none_or(|(_, _, bf)| f > bf) {
                    best = Some((k, counts, f));
                }
            }
            let (selected, counts, f_score) = best.expect("non-empty pool");
            SelectionStep { image_id: id.clone(), selected, models_consulted: model_outputs.len(), counts, f_score }
        })
        .collect();
    let totals: EvalCounts = trace.iter().map(|s| s.counts).sum();
    Ok(SelectionResult { totals, score: prf(totals), trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub counts: EvalCounts,
}

impl ReportRow {
    fn new(method: impl Into<String>, counts: EvalCounts) -> Self {
        let s = prf(counts);
        Self { method: method.into(), precision: s.precision, recall: s.recall, f_score: s.f_score, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub match_config: MatchConfig,
    pub nms_iou: f64,
    /// Base models in pool order, then `NMS`, `PEL`, `Oracle`.
    pub rows: Vec<ReportRow>,
    /// Set when some row has recall above 1 (possible only in
    /// `paper_literal` matching, where duplicates all count as matches).
    pub recall_exceeds_one: bool,
    pub pel_trace: Vec<SelectionStep>,
    pub oracle_trace: Vec<SelectionStep>,
}

impl Report {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>9}  {:>9}", "Method", "Precision", "Recall", "F-score");
        let _ = writeln!(s, "{}", "-".repeat(width + 33));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
                r.method, r.precision, r.recall, r.f_score
            );
        }
        if self.recall_exceeds_one {
            let _ = writeln!(s, "note: recall > 1 under paper_literal matching (duplicate detections matched one region)");
        }
        s
    }
}

pub fn compare_report(
    gt: &GroundTruth,
    model_outputs: &[ModelOutput],
    model_names: &[String],
    net: &SelectorNet,
    extractor: &dyn FeatureExtractor,
    cfg: &MatchConfig,
    nms_iou: f64,
) -> Result<Report> {
    if model_names.len() != model_outputs.len() {
        return Err(Error::input("one name per model required"));
    }
    let mut rows = Vec::with_capacity(model_outputs.len() + 3);
    for (name, out) in model_names.iter().zip(model_outputs) {
        rows.push(ReportRow::new(name.clone(), score_model(out, gt, cfg)?.totals));
    }
    rows.push(ReportRow::new("NMS", fuse_and_score(model_outputs, gt, nms_iou, cfg)?.totals));
    let pel = pel_evaluate(net, extractor, model_outputs, gt, cfg)?;
    rows.push(ReportRow::new("PEL", pel.totals));
    let oracle = oracle_evaluate(model_outputs, gt, cfg)?;
    rows.push(ReportRow::new("Oracle", oracle.totals));
    let recall_exceeds_one = cfg.mode == MatchMode::PaperLiteral && rows.iter().any(|r| r.recall > 1.0);
    Ok(Report {
        match_config: *cfg,
        nms_iou,
        rows,
        recall_exceeds_one,
        pel_trace: pel.trace,
        oracle_trace: oracle.trace,
    })
}
