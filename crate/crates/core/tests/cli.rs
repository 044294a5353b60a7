use std::path::Path;
use std::process::{Command, Output};

fn pel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pel")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const MODELS: [&str; 3] = ["word", "line", "oriented"];

fn det_args(dir: &Path) -> Vec<String> {
    MODELS.iter().flat_map(|m| ["--det".to_string(), dir.join(format!("{m}.jsonl")).display().to_string()]).collect()
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let bench = tmp.path().join("bench");
    let out = pel(&["gen", "--seed", "3", "--out", s(&bench)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("1000 train + 300 test"));
    for f in ["gt.jsonl", "splits.json", "word.jsonl", "line.jsonl", "oriented.jsonl"] {
        assert!(bench.join(f).exists(), "{f}");
    }
    let gt = bench.join("gt.jsonl");
    let splits = bench.join("splits.json");

    let eval = pel(&["eval", "--gt", s(&gt), "--det", s(&bench.join("word.jsonl"))]);
    assert_eq!(eval.status.code(), Some(0));
    let text = stdout(&eval);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("P=0.") && first.contains(" R=0.") && first.contains(" F=0."), "{first}");
    let json: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert!(json["f_score"].as_f64().unwrap() > 0.0);

    let records = tmp.path().join("train.jsonl");
    let mut args = vec!["labels".to_string(), "--gt".into(), s(&gt).into(), "--extract".into()];
    args.extend(det_args(&bench));
    args.extend(["--splits", s(&splits), "--split", "train", "--out", s(&records)].map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let lab = pel(&refs);
    assert!(lab.status.success(), "{}", String::from_utf8_lossy(&lab.stderr));
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 1000);

    let weights = tmp.path().join("w.json");
    let log = tmp.path().join("log.json");
    let tr = pel(&["train", "--dataset", s(&records), "--out", s(&weights), "--log", s(&log)]);
    assert!(tr.status.success(), "{}", String::from_utf8_lossy(&tr.stderr));
    let log: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(log).unwrap()).unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 80);

    let report = tmp.path().join("report.json");
    let mut args = vec!["report".to_string(), "--gt".into(), s(&gt).into(), "--weights".into(), s(&weights).into()];
    args.extend(det_args(&bench));
    args.extend(["--splits", s(&splits), "--split", "test", "--out", s(&report)].map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let rep = pel(&refs);
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));
    let table = stdout(&rep);
    for row in ["word", "line", "oriented", "NMS", "PEL", "Oracle"] {
        assert!(table.lines().any(|l| l.starts_with(row)), "missing {row}:\n{table}");
    }
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(parsed["pel_trace"].as_array().unwrap().len(), 300);

    // Weights for three models against a two-model pool.
    let w = bench.join("word.jsonl");
    let l = bench.join("line.jsonl");
    let mismatch = pel(&["pel", "--gt", s(&gt), "--weights", s(&weights), "--det", s(&w), "--det", s(&l)]);
    assert_eq!(mismatch.status.code(), Some(3));
}

#[test]
fn gen_and_train_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(pel(&["gen", "--seed", "9", "--out", s(&a)]).status.success());
    assert!(pel(&["gen", "--seed", "9", "--out", s(&b)]).status.success());
    for f in ["gt.jsonl", "splits.json", "word.jsonl", "line.jsonl", "oriented.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let records = tmp.path().join("r.jsonl");
    let mut args = vec!["labels".to_string(), "--gt".into(), s(&a.join("gt.jsonl")).into(), "--extract".into(), "--out".into(), s(&records).into()];
    args.extend(det_args(&a));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(pel(&refs).status.success());
    let (w1, w2) = (tmp.path().join("w1.json"), tmp.path().join("w2.json"));
    assert!(pel(&["train", "--dataset", s(&records), "--seed", "4", "--out", s(&w1)]).status.success());
    assert!(pel(&["train", "--dataset", s(&records), "--seed", "4", "--out", s(&w2)]).status.success());
    assert_eq!(std::fs::read(&w1).unwrap(), std::fs::read(&w2).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.jsonl");
    assert_eq!(pel(&["eval", "--gt", s(&missing), "--det", s(&missing)]).status.code(), Some(2));

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    assert_eq!(pel(&["gen", "--out", s(&blocker.join("sub"))]).status.code(), Some(2));

    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"image_id\": \"a\", \"regions\": [{\"polygon\": [[0,0],[1,1],[2,2]]}]}\n").unwrap();
    let out = pel(&["eval", "--gt", s(&bad), "--det", s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));

    let gt = tmp.path().join("gt.jsonl");
    std::fs::write(&gt, "{\"image_id\": \"a\", \"regions\": []}\n").unwrap();
    let det = tmp.path().join("det.jsonl");
    std::fs::write(&det, "{\"image_id\": \"a\", \"regions\": [{\"polygon\": [[0,0],[1,0],[1,1]], \"confidence\": 1.5}]}\n").unwrap();
    assert_eq!(pel(&["eval", "--gt", s(&gt), "--det", s(&det)]).status.code(), Some(3));

    // A record set, then a learning rate that overflows on the first step.
    let records = tmp.path().join("r.jsonl");
    let line = |id: &str, x: f64, l: [u8; 2]| {
        format!("{{\"image_id\":\"{id}\",\"features\":[{x},1.0],\"f_scores\":[{},{}],\"labels\":[{},{}]}}\n", l[0], l[1], l[0], l[1])
    };
    std::fs::write(&records, [line("a", 1.0, [1, 0]), line("b", -1.0, [0, 1])].concat()).unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, "{\"lr_initial\": 1e300, \"lr_floor\": 1e299}").unwrap();
    let out = pel(&["train", "--dataset", s(&records), "--config", s(&cfg), "--out", s(&tmp.path().join("w.json"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(&records, [line("a", 1.0, [1, 0]), "{\"image_id\":\"b\",\"features\":[1.0],\"f_scores\":[0,1],\"labels\":[0,1]}\n".into()].concat()).unwrap();
    let out = pel(&["train", "--dataset", s(&records), "--out", s(&tmp.path().join("w.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn paper_literal_mode_is_selectable() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.jsonl");
    std::fs::write(&gt, "{\"image_id\": \"a\", \"regions\": [{\"polygon\": [[0,0],[1,0],[1,1],[0,1]]}]}\n").unwrap();
    let det = tmp.path().join("det.jsonl");
    let d = "{\"polygon\": [[0,0],[1,0],[1,1],[0,1]], \"confidence\": 0.9}";
    std::fs::write(&det, format!("{{\"image_id\": \"a\", \"regions\": [{d}, {d}]}}\n")).unwrap();
    let strict = stdout(&pel(&["eval", "--gt", s(&gt), "--det", s(&det)]));
    assert!(strict.starts_with("P=0.500 R=1.000"), "{strict}");
    let literal = stdout(&pel(&["eval", "--gt", s(&gt), "--det", s(&det), "--match-mode", "paper-literal"]));
    assert!(literal.starts_with("P=1.000 R=2.000"), "{literal}");
    assert!(literal.contains("recall > 1"));
}
