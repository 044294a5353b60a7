//! Scene-space augmentation: rotation, truncation-free cropping and random
//! masking of regions as don't-care.

use rand::Rng;

use crate::data::Extent;
use crate::geometry::{intersect, Aabb, Point};
use crate::synthbench::{SceneRegion, SceneSample};

pub const MAX_ROTATION_DEG: f64 = 15.0;
pub const CROP_AREA_RATIO: (f64, f64) = (0.1, 1.0);
/// Crop aspect relative to the scene's own aspect ratio.
pub const CROP_ASPECT: (f64, f64) = (0.5, 2.0);
pub const CROP_ATTEMPTS: usize = 50;

/// What one call to [`augment`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentTrace {
    pub angle_deg: f64,
    /// Crop window in rotated-scene coordinates, `None` if no valid window
    /// was found.
    pub window: Option<Aabb>,
    pub masked: usize,
}

/// Rotates every region about the scene center by `angle_deg`.
pub fn rotate_scene(sample: &SceneSample, angle_deg: f64) -> SceneSample {
    if angle_deg == 0.0 {
        return sample.clone();
    }
    let e = sample.extent;
    let center = Point::new(e.width / 2.0, e.height / 2.0);
    let angle = angle_deg.to_radians();
    SceneSample {
        regions: sample
            .regions
            .iter()
            .map(|r| SceneRegion {
                dont_care: r.dont_care,
                ..SceneRegion::new(r.polygon.transformed(center, angle, Point::default()), e)
            })
            .collect(),
        ..sample.clone()
    }
}

/// Crops to `window` if no region straddles its border and at least one
/// region survives (when there were any). Surviving regions are shifted so
/// the window's corner becomes the origin.
pub fn crop_scene(sample: &SceneSample, window: &Aabb) -> Option<SceneSample> {
    let win_poly = window.to_polygon();
    let mut kept = Vec::new();
    for r in &sample.regions {
        if window.contains(&r.polygon.bounds()) {
            kept.push(r);
        } else if intersect(&r.polygon, &win_poly).is_some() {
            return None;
        }
    }
    if kept.is_empty() && !sample.regions.is_empty() {
        return None;
    }
    let extent = Extent { width: window.width(), height: window.height() };
    let shift = Point::new(-window.x_min, -window.y_min);
    Some(SceneSample {
        image_id: sample.image_id.clone(),
        extent,
        regions: kept
            .into_iter()
            .map(|r| SceneRegion { dont_care: r.dont_care, ..SceneRegion::new(r.polygon.translated(shift), extent) })
            .collect(),
        regime: sample.regime,
    })
}

fn draw_window(rng: &mut impl Rng, extent: Extent) -> Option<Aabb> {
    let ratio = rng.random_range(CROP_AREA_RATIO.0..=CROP_AREA_RATIO.1);
    let aspect = rng.random_range(CROP_ASPECT.0..=CROP_ASPECT.1);
    let w = extent.width * (ratio * aspect).sqrt();
    let h = extent.height * (ratio / aspect).sqrt();
    if w > extent.width || h > extent.height {
        return None;
    }
    let x = rng.random_range(0.0..=extent.width - w);
    let y = rng.random_range(0.0..=extent.height - h);
    Aabb::new(x, y, x + w, y + h).ok()
}

/// Random rotation in [-15, 15] degrees, a random crop that truncates no
/// region, then each visible region independently masked with `p_mask`.
/// Falls back to the rotated scene if no crop window is found.
pub fn augment(sample: &SceneSample, rng: &mut impl Rng, p_mask: f64) -> (SceneSample, AugmentTrace) {
    let angle_deg = rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG);
    let rotated = rotate_scene(sample, angle_deg);
    let mut window = None;
    let mut out = None;
    for _ in 0..CROP_ATTEMPTS {
        let Some(w) = draw_window(rng, rotated.extent) else { continue };
        if let Some(cropped) = crop_scene(&rotated, &w) {
            window = Some(w);
            out = Some(cropped);
            break;
        }
    }
    let mut out = out.unwrap_or(rotated);
    let p = p_mask.clamp(0.0, 1.0);
    let mut masked = 0;
    for r in out.regions.iter_mut().filter(|r| !r.dont_care) {
        if rng.random_bool(p) {
            r.dont_care = true;
            masked += 1;
        }
    }
    (out, AugmentTrace { angle_deg, window, masked })
}
