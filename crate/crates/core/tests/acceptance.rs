//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::time::Instant;

use common::{label_rule, mc_iou, random_pair, rect};
use pel::ensemble::{compare_report, oracle_evaluate, pel_evaluate};
use pel::formats::write_records;
use pel::fusion::{nms, ScoredDetection};
use pel::geometry::iou;
use pel::labeling::{build_dataset, make_label, LabelRecord};
use pel::scoring::{MatchConfig, PrfScore};
use pel::selector::{extract_all, selector_accuracy, train, SceneStats, SelectorNet, TrainConfig};
use pel::synthbench::{standard_benchmark, Benchmark};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const FIXTURE_SEED: u64 = 2019;

const PRF_TOL: f64 = 1e-4;
const MC_SAMPLES: usize = 1_000_000;
const MC_PAIRS: usize = 1000;
const MC_TOL: f64 = 1e-2;
const EXACT_TOL: f64 = 1e-12;
const GRAD_INSTANCES: u64 = 100;
const GRAD_TOL: f64 = 1e-5;
const PEL_MARGIN: f64 = 0.01;
const NMS_PRECISION_MARGIN: f64 = 0.01;
const TRAIN_ACC_MIN: f64 = 0.90;
const TEST_ACC_MIN: f64 = 0.70;
const NMS_SETS: usize = 1000;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Trained selector and test-split data shared by several criteria.
struct Fixture {
    bench: Benchmark,
    net: SelectorNet,
    train_records: Vec<LabelRecord>,
    test_records: Vec<LabelRecord>,
}

fn fixture() -> Fixture {
    let bench = standard_benchmark(FIXTURE_SEED);
    let cfg = MatchConfig::default();
    let (tr_gt, te_gt) = (bench.train_gt(), bench.test_gt());
    let train_records = build_dataset(&tr_gt, &bench.outputs_for(&bench.train), &extract_all(&SceneStats, &tr_gt), &cfg).unwrap();
    let test_records = build_dataset(&te_gt, &bench.outputs_for(&bench.test), &extract_all(&SceneStats, &te_gt), &cfg).unwrap();
    let (net, _) = train(&train_records, &TrainConfig::default()).unwrap();
    Fixture { bench, net, train_records, test_records }
}

fn harmonic_mean() -> Outcome {
    let cases = [((0.855, 0.820), 0.8371), ((0.756, 0.909), 0.8254)];
    let mut detail = Vec::new();
    let mut ok = true;
    for ((p, r), want) in cases {
        let f = PrfScore::from_pr(p, r).f_score;
        ok &= (f - want).abs() <= PRF_TOL;
        detail.push(format!("F({p}, {r}) = {f:.6} vs {want}"));
    }
    check(ok, detail.join("; "))
}

fn iou_accuracy() -> Outcome {
    let worst = (0..MC_PAIRS as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let (a, b) = random_pair(&mut rng);
            (iou(&a, &b) - mc_iou(&a, &b, MC_SAMPLES, &mut rng)).abs()
        })
        .reduce(|| 0.0, f64::max);
    let unit = rect(0.0, 0.0, 1.0, 1.0);
    let exact = [
        (iou(&unit, &unit), 1.0),
        (iou(&unit, &rect(2.0, 0.0, 3.0, 1.0)), 0.0),
        (iou(&unit, &rect(0.5, 0.0, 1.5, 1.0)), 1.0 / 3.0),
    ];
    let exact_err = exact.iter().map(|(got, want)| (got - want).abs()).fold(0.0, f64::max);
    check(
        worst < MC_TOL && exact_err <= EXACT_TOL,
        format!("{MC_PAIRS} pairs, worst Monte-Carlo gap {worst:.2e} (< {MC_TOL}); exact cases max error {exact_err:.1e}"),
    )
}

fn gradients() -> Outcome {
    let worst = (0..GRAD_INSTANCES).into_par_iter().map(|s| common::gradient_check(s, &[16, 32, 32, 3], 4)).reduce(|| 0.0, f64::max);
    check(worst < GRAD_TOL, format!("{GRAD_INSTANCES} instances, worst relative error {worst:.2e} (< {GRAD_TOL:e})"))
}

fn label_grid() -> Outcome {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut bad = 0;
    for a in grid {
        for b in grid {
            for c in grid {
                let f = [a, b, c];
                if make_label(&f).unwrap() != label_rule(&f) {
                    bad += 1;
                }
            }
        }
    }
    check(bad == 0, format!("125 score triples, {bad} mismatches"))
}

fn pel_beats_models(fx: &Fixture) -> Outcome {
    let names: Vec<String> = fx.bench.profiles.iter().map(|p| p.name.clone()).collect();
    let report = compare_report(&fx.bench.test_gt(), &fx.bench.outputs_for(&fx.bench.test), &names, &fx.net, &SceneStats, &MatchConfig::default(), 0.5)
        .unwrap();
    let pel = report.row("PEL").unwrap();
    let nms = report.row("NMS").unwrap();
    let best_f = names.iter().map(|n| report.row(n).unwrap().f_score).fold(0.0, f64::max);
    let best_p = names.iter().map(|n| report.row(n).unwrap().precision).fold(0.0, f64::max);
    check(
        pel.f_score >= best_f + PEL_MARGIN && nms.precision <= best_p - NMS_PRECISION_MARGIN,
        format!("PEL F {:.4} vs best model F {best_f:.4}; NMS P {:.4} vs best model P {best_p:.4}", pel.f_score, nms.precision),
    )
}

fn oracle_bounds_pel(fx: &Fixture) -> Outcome {
    let gt = fx.bench.test_gt();
    let outs = fx.bench.outputs_for(&fx.bench.test);
    let cfg = MatchConfig::default();
    let pel = pel_evaluate(&fx.net, &SceneStats, &outs, &gt, &cfg).unwrap();
    let oracle = oracle_evaluate(&outs, &gt, &cfg).unwrap();
    let violations = pel.trace.iter().zip(&oracle.trace).filter(|(p, o)| p.image_id != o.image_id || o.f_score < p.f_score).count();
    let gap = oracle.score.f_score - pel.score.f_score;
    check(
        violations == 0 && gap > 0.0,
        format!("{} images, {violations} per-image violations; Oracle F {:.4} - PEL F {:.4} = {gap:.4}", gt.len(), oracle.score.f_score, pel.score.f_score),
    )
}

fn selector_accuracies(fx: &Fixture) -> Outcome {
    let tr = selector_accuracy(&fx.net, &fx.train_records, false).unwrap();
    let te = selector_accuracy(&fx.net, &fx.test_records, false).unwrap();
    check(tr >= TRAIN_ACC_MIN && te >= TEST_ACC_MIN, format!("train {tr:.4} (>= {TRAIN_ACC_MIN}), test {te:.4} (>= {TEST_ACC_MIN})"))
}

fn one_model_per_image(fx: &Fixture) -> Outcome {
    let pel = pel_evaluate(&fx.net, &SceneStats, &fx.bench.outputs_for(&fx.bench.test), &fx.bench.test_gt(), &MatchConfig::default()).unwrap();
    let multi = pel.trace.iter().filter(|s| s.models_consulted != 1).count();
    check(multi == 0, format!("{} test images, {multi} consulted more than one model", pel.trace.len()))
}

fn pel(args: &[&str]) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pel")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let seed = FIXTURE_SEED.to_string();
    pel(&["gen", "--seed", &seed, "--out", s(&a)]);
    pel(&["gen", "--seed", &seed, "--out", s(&b)]);
    let files = ["gt.jsonl", "splits.json", "word.jsonl", "line.jsonl", "oriented.jsonl"];
    let gen_same = files.iter().all(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap());

    let bench = standard_benchmark(FIXTURE_SEED);
    let gt = bench.train_gt();
    let records = build_dataset(&gt, &bench.outputs_for(&bench.train), &extract_all(&SceneStats, &gt), &MatchConfig::default()).unwrap();
    let data = tmp.path().join("train.jsonl");
    write_records(&data, &records).unwrap();
    let (w1, w2) = (tmp.path().join("w1.json"), tmp.path().join("w2.json"));
    pel(&["train", "--dataset", s(&data), "--out", s(&w1)]);
    pel(&["train", "--dataset", s(&data), "--out", s(&w2)]);
    let train_same = std::fs::read(&w1).unwrap() == std::fs::read(&w2).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut not_idempotent = 0;
    for _ in 0..NMS_SETS {
        let n = rng.random_range(0..25);
        let set: Vec<ScoredDetection> = (0..n)
            .map(|_| {
                let c = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
                let size = rng.random_range(1.0..4.0);
                let polygon = common::random_convex(&mut rng, c, size, 6);
                ScoredDetection { polygon, confidence: f64::from(rng.random_range(0..10u8)) / 10.0, source_model: rng.random_range(0..3) }
            })
            .collect();
        let thr = rng.random_range(0.1..0.9);
        let once = nms(&set, thr);
        if nms(&once, thr) != once {
            not_idempotent += 1;
        }
    }
    check(
        gen_same && train_same && not_idempotent == 0,
        format!("gen identical: {gen_same}; train identical: {train_same}; NMS not idempotent on {not_idempotent}/{NMS_SETS} sets"),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((name, out, t.elapsed().as_secs_f64()));
        let (name, out, secs) = results.last().unwrap();
        match out {
            Ok(d) => println!("PASS  {name}  [{secs:.1}s]  {d}"),
            Err(d) => println!("FAIL  {name}  [{secs:.1}s]  {d}"),
        }
    };
    run("harmonic_mean_worked_examples", &harmonic_mean);
    run("polygon_iou_accuracy", &iou_accuracy);
    run("backprop_gradient_check", &gradients);
    run("label_rule_grid", &label_grid);
    let t = Instant::now();
    let fx = fixture();
    println!("      fixture: seed {FIXTURE_SEED} benchmark and selector trained in {:.1}s", t.elapsed().as_secs_f64());
    run("pel_beats_every_model_and_nms_loses_precision", &|| pel_beats_models(&fx));
    run("oracle_upper_bounds_pel", &|| oracle_bounds_pel(&fx));
    run("selector_accuracy", &|| selector_accuracies(&fx));
    run("one_model_consulted_per_image", &|| one_model_per_image(&fx));
    run("reproducibility", &reproducibility);
    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
