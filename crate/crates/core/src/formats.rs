//! On-disk formats.
//!
//! * Ground truth / detections: JSON lines, one image per line:
//!   `{"image_id": "...", "regions": [{"polygon": [[x, y], ...], ...}]}`.
//!   Ground-truth regions carry `"dont_care"` (default `false`) and the line
//!   may carry `"extent": [w, h]`; detections carry `"confidence"`.
//! * Selector dataset: JSON lines of [`LabelRecord`].
//! * Selector weights: one JSON document, see [`WeightsFile`].
//!
//! Floats are written in shortest round-trip form, so parsing a written
//! file gives back bit-identical values.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{Detection, Extent, GroundTruth, GtImage, GtRegion, ModelOutput};
use crate::error::{Error, Result};
use crate::labeling::LabelRecord;
use crate::selector::{Layer, SelectorNet, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtLine {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
    pub regions: Vec<GtRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetLine {
    pub image_id: String,
    pub regions: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLine {
    pub image_id: String,
    pub features: Vec<f64>,
}

fn schema(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_path_buf(), line, message: message.into() }
}

/// Parses every non-blank line; `line` in errors is 1-based.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| schema(path, i + 1, e.to_string()))?;
        out.push((i + 1, item));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| schema(path, e.line(), e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let mut gt = GroundTruth::new();
    for (line, rec) in read_jsonl::<GtLine>(path)? {
        if let Some(e) = rec.extent {
            if !(e.width > 0.0 && e.height > 0.0) {
                return Err(schema(path, line, "extent must be positive"));
            }
        }
        let image = GtImage { extent: rec.extent, regions: rec.regions };
        if gt.insert(rec.image_id.clone(), image).is_some() {
            return Err(schema(path, line, format!("duplicate image_id {:?}", rec.image_id)));
        }
    }
    Ok(gt)
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    write_jsonl(
        path,
        gt.iter().map(|(id, img)| GtLine { image_id: id.clone(), extent: img.extent, regions: img.regions.clone() }),
    )
}

pub fn read_detections(path: &Path) -> Result<ModelOutput> {
    let mut out = ModelOutput::new();
    for (line, rec) in read_jsonl::<DetLine>(path)? {
        if rec.regions.iter().any(|d| !(0.0..=1.0).contains(&d.confidence)) {
            return Err(schema(path, line, "confidence must lie in [0, 1]"));
        }
        if out.insert(rec.image_id.clone(), rec.regions).is_some() {
            return Err(schema(path, line, format!("duplicate image_id {:?}", rec.image_id)));
        }
    }
    Ok(out)
}

pub fn write_detections(path: &Path, out: &ModelOutput) -> Result<()> {
    write_jsonl(path, out.iter().map(|(id, d)| DetLine { image_id: id.clone(), regions: d.clone() }))
}

pub fn read_records(path: &Path) -> Result<Vec<LabelRecord>> {
    let rows = read_jsonl::<LabelRecord>(path)?;
    let mut shape: Option<(usize, usize)> = None;
    let mut records = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if r.labels.len() != r.f_scores.len() {
            return Err(schema(path, line, "labels and f_scores differ in length"));
        }
        if r.labels.iter().any(|&b| b > 1) {
            return Err(schema(path, line, "labels must be 0 or 1"));
        }
        match shape {
            None => shape = Some((r.features.len(), r.labels.len())),
            Some(s) if s != (r.features.len(), r.labels.len()) => {
                return Err(schema(path, line, format!("expected {} features and {} labels", s.0, s.1)))
            }
            _ => {}
        }
        records.push(r);
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[LabelRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// Reads `{"image_id", "features"}` lines; selector dataset files qualify.
pub fn read_features(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut map = BTreeMap::new();
    for (line, rec) in read_jsonl::<FeatureLine>(path)? {
        if map.insert(rec.image_id.clone(), rec.features).is_some() {
            return Err(schema(path, line, format!("duplicate image_id {:?}", rec.image_id)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorInfo {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Row-major, `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Serialized selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub extractor: ExtractorInfo,
    pub train_config: TrainConfig,
    pub seed: u64,
}

impl WeightsFile {
    pub fn new(net: &SelectorNet, extractor: ExtractorInfo, train_config: TrainConfig) -> Self {
        Self {
            layer_dims: net.layer_dims(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerParams { weights: l.weights.clone(), biases: l.biases.clone() })
                .collect(),
            extractor,
            seed: train_config.seed,
            train_config,
        }
    }

    pub fn to_net(&self) -> Result<SelectorNet> {
        if self.layer_dims.len() != self.layers.len() + 1 {
            return Err(Error::input("layer_dims does not match the number of layers"));
        }
        if self.layer_dims.first() != Some(&self.extractor.dim) {
            return Err(Error::input("input width differs from the extractor dimension"));
        }
        let layers = self
            .layers
            .iter()
            .zip(self.layer_dims.windows(2))
            .map(|(p, d)| Layer { inputs: d[0], outputs: d[1], weights: p.weights.clone(), biases: p.biases.clone() })
            .collect();
        SelectorNet::from_layers(layers)
    }
}

pub fn load_weights(path: &Path) -> Result<(SelectorNet, WeightsFile)> {
    let file: WeightsFile = read_json(path)?;
    let net = file.to_net().map_err(|e| schema(path, 0, e.to_string()))?;
    Ok((net, file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn ids(&self, split: &str) -> Option<BTreeSet<String>> {
        match split {
            "train" => Some(self.train.iter().cloned().collect()),
            "test" => Some(self.test.iter().cloned().collect()),
            _ => None,
        }
    }
}
