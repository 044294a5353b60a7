//! In-memory ground truth and detector outputs, keyed by image id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Polygon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRegion {
    pub polygon: Polygon,
    #[serde(default)]
    pub dont_care: bool,
}

impl GtRegion {
    pub fn care(polygon: Polygon) -> Self {
        Self { polygon, dont_care: false }
    }
}

/// Scene width and height in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

impl From<[f64; 2]> for Extent {
    fn from(v: [f64; 2]) -> Self {
        Extent { width: v[0], height: v[1] }
    }
}

impl From<Extent> for [f64; 2] {
    fn from(e: Extent) -> Self {
        [e.width, e.height]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtImage {
    pub extent: Option<Extent>,
    pub regions: Vec<GtRegion>,
}

impl GtImage {
    pub fn care_regions(&self) -> impl Iterator<Item = &GtRegion> {
        self.regions.iter().filter(|r| !r.dont_care)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub polygon: Polygon,
    pub confidence: f64,
}

pub type GroundTruth = BTreeMap<String, GtImage>;
pub type ModelOutput = BTreeMap<String, Vec<Detection>>;
