//! Scene feature extraction for the selector.

use std::collections::BTreeMap;

use crate::data::GroundTruth;
use crate::synthbench::SceneSample;

pub trait FeatureExtractor: Send + Sync {
    /// Stable identifier recorded alongside trained weights.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Must return exactly `dim()` values and depend only on `scene`.
    fn extract(&self, scene: &SceneSample) -> Vec<f64>;
}

/// Handcrafted summary statistics of the visible (non-don't-care) regions.
///
/// Layout: `ln(1 + count)`; mean/std/min/max of region area in percent of
/// the scene; mean/std of log aspect ratio; mean/std of absolute
/// orientation (radians); coverage; scene width/height; scene scale
/// (`sqrt(w * h) / 100`); four zero pads.
#[derive(Debug, Clone, Copy, Default)]
pub struct SceneStats;

pub const SCENE_STATS_ID: &str = "scene-stats-v1";
pub const SCENE_STATS_DIM: usize = 16;

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl FeatureExtractor for SceneStats {
    fn id(&self) -> &str {
        SCENE_STATS_ID
    }

    fn dim(&self) -> usize {
        SCENE_STATS_DIM
    }

    fn extract(&self, scene: &SceneSample) -> Vec<f64> {
        let visible: Vec<_> = scene.care_regions().collect();
        let areas: Vec<f64> = visible.iter().map(|r| 100.0 * r.attrs.rel_area).collect();
        let aspects: Vec<f64> = visible.iter().map(|r| r.attrs.aspect.ln()).collect();
        let angles: Vec<f64> = visible.iter().map(|r| r.attrs.orientation_deg.abs().to_radians()).collect();
        let (area_mean, area_std) = mean_std(&areas);
        let (area_min, area_max) = if areas.is_empty() {
            (0.0, 0.0)
        } else {
            (areas.iter().copied().fold(f64::INFINITY, f64::min), areas.iter().copied().fold(0.0, f64::max))
        };
        let (aspect_mean, aspect_std) = mean_std(&aspects);
        let (angle_mean, angle_std) = mean_std(&angles);
        let coverage = areas.iter().sum::<f64>() / 100.0;
        let e = scene.extent;
        let mut f = vec![
            (1.0 + visible.len() as f64).ln(),
            area_mean,
            area_std,
            area_min,
            area_max,
            aspect_mean,
            aspect_std,
            angle_mean,
            angle_std,
            coverage,
            e.width / e.height,
            (e.width * e.height).sqrt() / 100.0,
        ];
        f.resize(SCENE_STATS_DIM, 0.0);
        f
    }
}

/// Features for every ground-truth image, keyed by id.
pub fn extract_all(extractor: &dyn FeatureExtractor, gt: &GroundTruth) -> BTreeMap<String, Vec<f64>> {
    gt.iter().map(|(id, img)| (id.clone(), extractor.extract(&SceneSample::from_gt(id, img)))).collect()
}
