//! `pel` command-line interface.
//!
//! Exit codes: 0 success, 2 I/O error, 3 schema or shape error, 4 numerical
//! failure during training.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{GroundTruth, ModelOutput};
use crate::ensemble::{compare_report, oracle_evaluate, pel_evaluate};
use crate::error::{Error, Result};
use crate::formats::{
    load_weights, read_detections, read_features, read_ground_truth, read_json, read_records, write_detections,
    write_ground_truth, write_json, write_records, ExtractorInfo, Splits, WeightsFile,
};
use crate::fusion::{fuse_and_score, DEFAULT_NMS_IOU};
use crate::labeling::{build_dataset, drop_unlabeled};
use crate::scoring::{score_model, EvalCounts, MatchConfig, MatchMode, PrfScore};
use crate::selector::{extract_all, train, train_augmented, Augmentation, FeatureExtractor, SceneStats, TrainConfig};
use crate::synthbench::{standard_benchmark, SceneSample};

pub const EXIT_IO: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub const DEFAULT_SEED: u64 = 2019;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Schema { .. } | Error::Input(_) | Error::Geometry(_) => EXIT_SCHEMA,
        Error::NonFiniteLoss { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "pel", version, about = "Per-example model selection for detector ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    OneToOne,
    PaperLiteral,
}

impl From<ModeArg> for MatchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::OneToOne => MatchMode::OneToOne,
            ModeArg::PaperLiteral => MatchMode::PaperLiteral,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// IoU threshold; a detection matches when IoU > tau.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "one-to-one")]
    pub match_mode: ModeArg,
}

impl MatchArgs {
    fn config(&self) -> Result<MatchConfig> {
        MatchConfig::new(self.tau, self.match_mode.into())
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Split manifest written by `pel gen`.
    #[arg(long, requires = "split")]
    pub splits: Option<PathBuf>,
    /// Restrict to one split (`train` or `test`).
    #[arg(long, requires = "splits")]
    pub split: Option<String>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection files, one per base model, in pool order.
    #[arg(long = "det", required = true)]
    pub dets: Vec<PathBuf>,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the standard synthetic benchmark.
    Gen {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one detection file.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        det: PathBuf,
        #[command(flatten)]
        matching: MatchArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the selector dataset.
    Labels {
        #[command(flatten)]
        pool: PoolArgs,
        /// Feature vectors (JSON lines with image_id and features).
        #[arg(long, conflicts_with = "extract")]
        features: Option<PathBuf>,
        /// Compute scene-statistics features from the ground truth.
        #[arg(long)]
        extract: bool,
        /// Drop records where no model scores above zero.
        #[arg(long)]
        drop_unlabeled: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the selector.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// JSON training configuration; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Ground truth for on-the-fly scene augmentation.
        #[arg(long)]
        augment_gt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate the selector-driven ensemble.
    Pel {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate pooled detections after non-maximum suppression.
    Nms {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
        nms_iou: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the perfect per-image selector.
    Oracle {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare base models, NMS, the selector ensemble and the oracle.
    Report {
        #[command(flatten)]
        pool: PoolArgs,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
        nms_iou: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Serialize)]
struct ScoreJson {
    #[serde(flatten)]
    counts: EvalCounts,
    #[serde(flatten)]
    score: PrfScore,
}

fn print_score(label: &str, counts: EvalCounts, score: PrfScore) {
    println!("{label}P={:.3} R={:.3} F={:.3}", score.precision, score.recall, score.f_score);
    println!("{}", serde_json::to_string(&ScoreJson { counts, score }).expect("plain data"));
}

fn load_split(args: &SplitArgs) -> Result<Option<std::collections::BTreeSet<String>>> {
    match (&args.splits, &args.split) {
        (Some(path), Some(name)) => {
            let splits: Splits = read_json(path)?;
            splits
                .ids(name)
                .map(Some)
                .ok_or_else(|| Error::input(format!("unknown split {name:?}; expected train or test")))
        }
        _ => Ok(None),
    }
}

fn restrict<V: Clone>(map: &BTreeMap<String, V>, keep: &Option<std::collections::BTreeSet<String>>) -> BTreeMap<String, V> {
    match keep {
        None => map.clone(),
        Some(ids) => map.iter().filter(|(k, _)| ids.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
    }
}

struct Pool {
    gt: GroundTruth,
    outputs: Vec<ModelOutput>,
    names: Vec<String>,
    cfg: MatchConfig,
}

fn load_pool(args: &PoolArgs) -> Result<Pool> {
    let cfg = args.matching.config()?;
    let keep = load_split(&args.split)?;
    let gt = restrict(&read_ground_truth(&args.gt)?, &keep);
    let mut outputs = Vec::with_capacity(args.dets.len());
    let mut names = Vec::with_capacity(args.dets.len());
    for path in &args.dets {
        outputs.push(restrict(&read_detections(path)?, &keep));
        names.push(path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string()));
    }
    Ok(Pool { gt, outputs, names, cfg })
}

fn maybe_write<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => Ok(()),
    }
}

fn extractor_for(info: &ExtractorInfo) -> Result<SceneStats> {
    let ex = SceneStats;
    if info.id != ex.id() || info.dim != ex.dim() {
        return Err(Error::input(format!("unsupported feature extractor {:?} (dim {})", info.id, info.dim)));
    }
    Ok(ex)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { seed, out } => cmd_gen(seed, &out),
        Command::Eval { gt, det, matching, split, out } => {
            let cfg = matching.config()?;
            let keep = load_split(&split)?;
            let gt = restrict(&read_ground_truth(&gt)?, &keep);
            let dets = restrict(&read_detections(&det)?, &keep);
            let s = score_model(&dets, &gt, &cfg)?;
            print_score("", s.totals, s.dataset);
            if cfg.mode == MatchMode::PaperLiteral && s.dataset.recall > 1.0 {
                println!("note: recall > 1 under paper_literal matching");
            }
            maybe_write(&out, &s)
        }
        Command::Labels { pool, features, extract, drop_unlabeled: drop, out } => {
            let p = load_pool(&pool)?;
            let feats = match (features, extract) {
                (Some(path), _) => read_features(&path)?,
                (None, true) => extract_all(&SceneStats, &p.gt),
                (None, false) => return Err(Error::input("pass --features or --extract")),
            };
            let mut records = build_dataset(&p.gt, &p.outputs, &feats, &p.cfg)?;
            if drop {
                records = drop_unlabeled(records);
            }
            let multi = records.iter().filter(|r| r.labels.iter().filter(|&&b| b == 1).count() >= 2).count();
            let none = records.iter().filter(|r| !r.has_positive()).count();
            println!("{} records, {multi} multi-label, {none} all-negative", records.len());
            write_records(&out, &records)
        }
        Command::Train { dataset, config, seed, augment_gt, out, log } => {
            cmd_train(&dataset, config.as_deref(), seed, augment_gt.as_deref(), &out, log.as_deref())
        }
        Command::Pel { pool, weights, out } => {
            let p = load_pool(&pool)?;
            let (net, file) = load_weights(&weights)?;
            let res = pel_evaluate(&net, &extractor_for(&file.extractor)?, &p.outputs, &p.gt, &p.cfg)?;
            print_score("PEL ", res.totals, res.score);
            maybe_write(&out, &res)
        }
        Command::Nms { pool, nms_iou, out } => {
            let p = load_pool(&pool)?;
            let s = fuse_and_score(&p.outputs, &p.gt, nms_iou, &p.cfg)?;
            print_score("NMS ", s.totals, s.dataset);
            maybe_write(&out, &s)
        }
        Command::Oracle { pool, out } => {
            let p = load_pool(&pool)?;
            let res = oracle_evaluate(&p.outputs, &p.gt, &p.cfg)?;
            print_score("Oracle ", res.totals, res.score);
            maybe_write(&out, &res)
        }
        Command::Report { pool, weights, nms_iou, out } => {
            let p = load_pool(&pool)?;
            let (net, file) = load_weights(&weights)?;
            let ex = extractor_for(&file.extractor)?;
            let report = compare_report(&p.gt, &p.outputs, &p.names, &net, &ex, &p.cfg, nms_iou)?;
            print!("{}", report.to_table());
            maybe_write(&out, &report)
        }
    }
}

pub fn cmd_gen(seed: u64, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let bench = standard_benchmark(seed);
    write_ground_truth(&out.join("gt.jsonl"), &bench.ground_truth())?;
    for (p, o) in bench.profiles.iter().zip(&bench.outputs) {
        write_detections(&out.join(format!("{}.jsonl", p.name)), o)?;
    }
    let splits = Splits {
        seed,
        train: bench.train.iter().map(|s| s.image_id.clone()).collect(),
        test: bench.test.iter().map(|s| s.image_id.clone()).collect(),
    };
    write_json(&out.join("splits.json"), &splits)?;
    let regions: usize = bench.all_scenes().iter().map(|s| s.regions.len()).sum();
    println!(
        "wrote {} train + {} test scenes ({regions} regions) and {} detector files to {}",
        splits.train.len(),
        splits.test.len(),
        bench.outputs.len(),
        out.display()
    );
    for (p, o) in bench.profiles.iter().zip(&bench.outputs) {
        println!("  {}: {} detections", p.name, o.values().map(Vec::len).sum::<usize>());
    }
    Ok(())
}

pub fn cmd_train(
    dataset: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    augment_gt: Option<&Path>,
    out: &Path,
    log: Option<&Path>,
) -> Result<()> {
    let records = read_records(dataset)?;
    let mut cfg: TrainConfig = match config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ex = SceneStats;
    let (net, train_log) = match augment_gt {
        Some(path) => {
            let scenes: Vec<SceneSample> =
                read_ground_truth(path)?.iter().map(|(id, img)| SceneSample::from_gt(id, img)).collect();
            train_augmented(&records, &Augmentation { scenes: &scenes, extractor: &ex }, &cfg)?
        }
        None => train(&records, &cfg)?,
    };
    for e in &train_log.epochs {
        println!("epoch {:>3}  lr={:.0e}  p_mask={:.3}  loss={:.5}  acc={:.4}", e.epoch, e.lr, e.p_mask, e.mean_loss, e.train_accuracy);
    }
    let dim = records.first().map_or(0, |r| r.features.len());
    let info = if dim == ex.dim() {
        ExtractorInfo { id: ex.id().to_string(), dim }
    } else {
        ExtractorInfo { id: "external".into(), dim }
    };
    write_json(out, &WeightsFile::new(&net, info, cfg))?;
    if let Some(p) = log {
        write_json(p, &train_log)?;
    }
    Ok(())
}
