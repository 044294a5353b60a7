//! Synthetic scenes and simulated detectors with complementary strengths.
//!
//! Scenes come from three regimes: many small compact words, a few long
//! horizontal lines, and a few strongly rotated words. Each simulated
//! detector is reliable on one kind of region and mediocre on the rest, so
//! per-image model choice matters. Everything is deterministic per seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{Detection, Extent, GroundTruth, GtImage, GtRegion, ModelOutput};
use crate::geometry::{intersect, Aabb, Point, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallDense,
    LongHorizontal,
    Rotated,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::SmallDense, Regime::LongHorizontal, Regime::Rotated];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspectClass {
    Compact,
    Elongated,
    Long,
}

/// The region family a detector's recall depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Compact,
    Line,
    Oriented,
}

/// Orientations beyond this many degrees count as rotated text.
pub const ORIENTED_DEG: f64 = 10.0;

/// Geometry-derived attributes of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionAttrs {
    /// Region area as a fraction of the scene area.
    pub rel_area: f64,
    pub size_class: SizeClass,
    /// Long side over short side of the minimum-area enclosing rectangle.
    pub aspect: f64,
    pub aspect_class: AspectClass,
    /// Long-axis angle in degrees, in (-90, 90].
    pub orientation_deg: f64,
}

impl RegionAttrs {
    pub fn measure(polygon: &Polygon, extent: Extent) -> Self {
        let rel_area = polygon.area() / (extent.width * extent.height);
        let (long, short, angle) = polygon.oriented_extent();
        let aspect = long / short;
        let size_class = if rel_area < 0.004 {
            SizeClass::Small
        } else if rel_area < 0.015 {
            SizeClass::Medium
        } else {
            SizeClass::Large
        };
        let aspect_class = if aspect < 2.5 {
            AspectClass::Compact
        } else if aspect < 5.0 {
            AspectClass::Elongated
        } else {
            AspectClass::Long
        };
        Self { rel_area, size_class, aspect, aspect_class, orientation_deg: angle.to_degrees() }
    }

    pub fn kind(&self) -> TextKind {
        if self.orientation_deg.abs() > ORIENTED_DEG {
            TextKind::Oriented
        } else if self.aspect >= 5.0 {
            TextKind::Line
        } else {
            TextKind::Compact
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRegion {
    pub polygon: Polygon,
    pub attrs: RegionAttrs,
    pub dont_care: bool,
}

impl SceneRegion {
    pub fn new(polygon: Polygon, extent: Extent) -> Self {
        let attrs = RegionAttrs::measure(&polygon, extent);
        Self { polygon, attrs, dont_care: false }
    }
}

/// One scene: its extent, ground-truth regions and (for generated scenes)
/// the regime it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub image_id: String,
    pub extent: Extent,
    pub regions: Vec<SceneRegion>,
    pub regime: Option<Regime>,
}

impl SceneSample {
    /// Rebuilds a scene from file ground truth. Without a stored extent the
    /// scene is taken to span the origin to the far corner of its regions.
    pub fn from_gt(image_id: &str, image: &GtImage) -> Self {
        let extent = image.extent.unwrap_or_else(|| {
            let (w, h) = image.regions.iter().fold((1.0f64, 1.0f64), |(w, h), r| {
                let b = r.polygon.bounds();
                (w.max(b.x_max), h.max(b.y_max))
            });
            Extent { width: w, height: h }
        });
        let regions = image
            .regions
            .iter()
            .map(|r| SceneRegion { dont_care: r.dont_care, ..SceneRegion::new(r.polygon.clone(), extent) })
            .collect();
        Self { image_id: image_id.to_string(), extent, regions, regime: None }
    }

    pub fn to_gt(&self) -> GtImage {
        GtImage {
            extent: Some(self.extent),
            regions: self
                .regions
                .iter()
                .map(|r| GtRegion { polygon: r.polygon.clone(), dont_care: r.dont_care })
                .collect(),
        }
    }

    pub fn care_regions(&self) -> impl Iterator<Item = &SceneRegion> {
        self.regions.iter().filter(|r| !r.dont_care)
    }
}

pub fn ground_truth(scenes: &[SceneSample]) -> GroundTruth {
    scenes.iter().map(|s| (s.image_id.clone(), s.to_gt())).collect()
}

/// Shape distribution of one regime. Angles are magnitudes in degrees with a
/// random sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub count: (usize, usize),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub angle_deg: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Regime probabilities, indexed like [`Regime::ALL`].
    pub mixture: [f64; 3],
    pub regimes: [RegimeSpec; 3],
    pub scene_width: f64,
    pub scene_height: (f64, f64),
    pub id_prefix: String,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            mixture: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            regimes: [
                RegimeSpec { count: (6, 10), width: (3.5, 6.0), height: (2.0, 3.0), angle_deg: (0.0, 3.0) },
                RegimeSpec { count: (3, 5), width: (30.0, 50.0), height: (3.0, 5.0), angle_deg: (0.0, 3.0) },
                RegimeSpec { count: (3, 5), width: (12.0, 22.0), height: (3.0, 5.0), angle_deg: (25.0, 65.0) },
            ],
            scene_width: 100.0,
            scene_height: (70.0, 100.0),
            id_prefix: "scene".into(),
        }
    }
}

fn rotated_rect(center: Point, w: f64, h: f64, angle: f64) -> Polygon {
    Aabb::new(center.x - w / 2.0, center.y - h / 2.0, center.x + w / 2.0, center.y + h / 2.0)
        .expect("positive rectangle size")
        .to_polygon()
        .transformed(center, angle, Point::default())
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn pick_regime(rng: &mut impl Rng, mixture: &[f64; 3]) -> Regime {
    let total: f64 = mixture.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in mixture.iter().enumerate() {
        if u < w {
            return Regime::ALL[k];
        }
        u -= w;
    }
    Regime::Rotated
}

/// Generates `n` scenes. Regions are placed without overlap and fully
/// inside the extent.
pub fn generate_scenes(n: usize, seed: u64, config: &SceneConfig) -> Vec<SceneSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width_digits = n.max(1).to_string().len().max(5);
    (0..n)
        .map(|i| {
            let regime = pick_regime(&mut rng, &config.mixture);
            let spec = &config.regimes[regime.index()];
            let extent = Extent { width: config.scene_width, height: uniform(&mut rng, config.scene_height) };
            let frame = Aabb::new(0.0, 0.0, extent.width, extent.height).unwrap();
            let target = rng.random_range(spec.count.0..=spec.count.1.max(spec.count.0));
            let mut regions: Vec<SceneRegion> = Vec::with_capacity(target);
            let mut attempts = 0;
            while regions.len() < target && attempts < 200 * target {
                attempts += 1;
                let w = uniform(&mut rng, spec.width);
                let h = uniform(&mut rng, spec.height);
                let mut angle = uniform(&mut rng, spec.angle_deg).to_radians();
                if rng.random_bool(0.5) {
                    angle = -angle;
                }
                let center = Point::new(
                    rng.random_range(0.0..extent.width),
                    rng.random_range(0.0..extent.height),
                );
                let poly = rotated_rect(center, w, h, angle);
                if !frame.contains(&poly.bounds()) {
                    continue;
                }
                if regions.iter().any(|r| intersect(&r.polygon, &poly).is_some()) {
                    continue;
                }
                regions.push(SceneRegion::new(poly, extent));
            }
            SceneSample {
                image_id: format!("{}_{:0width$}", config.id_prefix, i, width = width_digits),
                extent,
                regions,
                regime: Some(regime),
            }
        })
        .collect()
}

/// Per-kind probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindRates {
    pub compact: f64,
    pub line: f64,
    pub oriented: f64,
}

impl KindRates {
    pub const fn uniform(p: f64) -> Self {
        Self { compact: p, line: p, oriented: p }
    }

    pub fn get(&self, kind: TextKind) -> f64 {
        match kind {
            TextKind::Compact => self.compact,
            TextKind::Line => self.line,
            TextKind::Oriented => self.oriented,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub true_mean: f64,
    pub true_spread: f64,
    pub false_mean: f64,
    pub false_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    pub name: String,
    /// Probability of a well-localized detection for a region of each kind.
    pub recall: KindRates,
    /// Probability that a missed region still yields a fragment covering
    /// only part of it (a localization failure that counts as a false alarm).
    pub fragment: KindRates,
    /// Gaussian vertex jitter (scene units), truncated at three sigma.
    pub jitter: f64,
    /// Poisson mean of spurious detections per image.
    pub fp_rate: f64,
    pub confidence: ConfidenceModel,
}

impl DetectorProfile {
    pub fn is_valid(&self) -> bool {
        let probs = [self.recall, self.fragment]
            .iter()
            .flat_map(|r| [r.compact, r.line, r.oriented])
            .all(|p| (0.0..=1.0).contains(&p));
        probs && self.jitter >= 0.0 && self.fp_rate >= 0.0
    }

    /// Zero-noise detector that finds every region.
    pub fn perfect(name: &str) -> Self {
        Self {
            name: name.into(),
            recall: KindRates::uniform(1.0),
            fragment: KindRates::uniform(0.0),
            jitter: 0.0,
            fp_rate: 0.0,
            confidence: ConfidenceModel { true_mean: 0.9, true_spread: 0.0, false_mean: 0.5, false_spread: 0.0 },
        }
    }
}

fn draw_confidence(rng: &mut impl Rng, mean: f64, spread: f64) -> f64 {
    if spread <= 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    (mean + spread * z).clamp(0.0, 1.0)
}

fn jittered(rng: &mut impl Rng, polygon: &Polygon, sigma: f64) -> Polygon {
    if sigma <= 0.0 {
        return polygon.clone();
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..32 {
        let verts: Vec<Point> = polygon
            .vertices()
            .iter()
            .map(|p| {
                let dx: f64 = normal.sample(rng);
                let dy: f64 = normal.sample(rng);
                Point::new(p.x + sigma * dx.clamp(-3.0, 3.0), p.y + sigma * dy.clamp(-3.0, 3.0))
            })
            .collect();
        if let Ok(p) = Polygon::new(verts) {
            return p;
        }
    }
    polygon.clone()
}

/// A sub-rectangle spanning 20-45% of the region's long axis.
fn fragment_of(rng: &mut impl Rng, polygon: &Polygon) -> Polygon {
    let (long, short, angle) = polygon.oriented_extent();
    let frac = rng.random_range(0.2..0.45);
    let offset = rng.random_range(-(1.0 - frac) / 2.0..(1.0 - frac) / 2.0) * long;
    let c = polygon.centroid();
    let shifted = Point::new(c.x + offset * angle.cos(), c.y + offset * angle.sin());
    rotated_rect(shifted, long * frac, short, angle)
}

fn spurious(rng: &mut impl Rng, extent: Extent) -> Polygon {
    let w = rng.random_range(3.0..15.0f64).min(extent.width * 0.9);
    let h = rng.random_range(2.0..5.0f64).min(extent.height * 0.9);
    let x = rng.random_range(0.0..extent.width - w);
    let y = rng.random_range(0.0..extent.height - h);
    Aabb::new(x, y, x + w, y + h).unwrap().to_polygon()
}

/// Runs a simulated detector over `scenes`. Don't-care regions are treated
/// like any other text.
pub fn simulate_detector(profile: &DetectorProfile, scenes: &[SceneSample], seed: u64) -> ModelOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conf = profile.confidence;
    scenes
        .iter()
        .map(|scene| {
            let mut dets = Vec::new();
            for region in &scene.regions {
                let kind = region.attrs.kind();
                if rng.random_bool(profile.recall.get(kind)) {
                    let polygon = jittered(&mut rng, &region.polygon, profile.jitter);
                    let confidence = draw_confidence(&mut rng, conf.true_mean, conf.true_spread);
                    dets.push(Detection { polygon, confidence });
                } else if rng.random_bool(profile.fragment.get(kind)) {
                    let frag = fragment_of(&mut rng, &region.polygon);
                    let polygon = jittered(&mut rng, &frag, profile.jitter);
                    let confidence = draw_confidence(&mut rng, conf.false_mean, conf.false_spread);
                    dets.push(Detection { polygon, confidence });
                }
            }
            if profile.fp_rate > 0.0 {
                let n: f64 = Poisson::new(profile.fp_rate).unwrap().sample(&mut rng);
                for _ in 0..n as usize {
                    let polygon = spurious(&mut rng, scene.extent);
                    let confidence = draw_confidence(&mut rng, conf.false_mean, conf.false_spread);
                    dets.push(Detection { polygon, confidence });
                }
            }
            (scene.image_id.clone(), dets)
        })
        .collect()
}

/// Three detectors, each reliable on one kind of region.
pub fn standard_profiles() -> Vec<DetectorProfile> {
    let conf = |t: f64, f: f64| ConfidenceModel { true_mean: t, true_spread: 0.08, false_mean: f, false_spread: 0.15 };
    vec![
        DetectorProfile {
            name: "word".into(),
            recall: KindRates { compact: 0.92, line: 0.40, oriented: 0.45 },
            fragment: KindRates { compact: 0.2, line: 0.9, oriented: 0.9 },
            jitter: 0.15,
            fp_rate: 0.5,
            confidence: conf(0.85, 0.6),
        },
        DetectorProfile {
            name: "line".into(),
            recall: KindRates { compact: 0.65, line: 0.95, oriented: 0.40 },
            fragment: KindRates { compact: 0.9, line: 0.2, oriented: 0.9 },
            jitter: 0.25,
            fp_rate: 0.5,
            confidence: conf(0.80, 0.65),
        },
        DetectorProfile {
            name: "oriented".into(),
            recall: KindRates { compact: 0.62, line: 0.45, oriented: 0.95 },
            fragment: KindRates { compact: 0.9, line: 0.9, oriented: 0.2 },
            jitter: 0.25,
            fp_rate: 0.5,
            confidence: conf(0.9, 0.7),
        },
    ]
}

pub const STANDARD_TRAIN: usize = 1000;
pub const STANDARD_TEST: usize = 300;

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub train: Vec<SceneSample>,
    pub test: Vec<SceneSample>,
    pub profiles: Vec<DetectorProfile>,
    /// One output map per profile, covering both splits.
    pub outputs: Vec<ModelOutput>,
}

impl Benchmark {
    pub fn ground_truth(&self) -> GroundTruth {
        ground_truth(&self.all_scenes())
    }

    pub fn train_gt(&self) -> GroundTruth {
        ground_truth(&self.train)
    }

    pub fn test_gt(&self) -> GroundTruth {
        ground_truth(&self.test)
    }

    pub fn all_scenes(&self) -> Vec<SceneSample> {
        self.train.iter().chain(&self.test).cloned().collect()
    }

    /// Outputs restricted to the ids of `scenes`.
    pub fn outputs_for(&self, scenes: &[SceneSample]) -> Vec<ModelOutput> {
        self.outputs
            .iter()
            .map(|out| {
                scenes
                    .iter()
                    .filter_map(|s| out.get(&s.image_id).map(|d| (s.image_id.clone(), d.clone())))
                    .collect::<BTreeMap<_, _>>()
            })
            .collect()
    }
}

/// Derives an independent sub-seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9)) ^ stream
}

/// 1,000 train and 300 test scenes scored by the three standard detectors.
pub fn standard_benchmark(seed: u64) -> Benchmark {
    let mut scenes = generate_scenes(STANDARD_TRAIN + STANDARD_TEST, sub_seed(seed, 0), &SceneConfig::default());
    let test = scenes.split_off(STANDARD_TRAIN);
    let profiles = standard_profiles();
    let all: Vec<SceneSample> = scenes.iter().chain(&test).cloned().collect();
    let outputs = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| simulate_detector(p, &all, sub_seed(seed, k as u64 + 1)))
        .collect();
    Benchmark { train: scenes, test, profiles, outputs }
}
