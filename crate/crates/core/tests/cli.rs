use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn alphacc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alphacc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn alphacc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn version_exits_zero() {
    let o = alphacc(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("alphacc "));
}

#[test]
fn train_without_dataset_is_a_usage_error() {
    let o = alphacc(&["train", "--corpus", "x", "--index", "y", "--out", "z"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--dataset"));
}

#[test]
fn unknown_flag_suggests_the_right_one() {
    let o = alphacc(&["synth", "--problem", "3", "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--problems"));
}

#[test]
fn typo_key_in_config_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "ganma = 0.4\n").unwrap();
    let out = dir.path().join("bench");
    let o = alphacc(&[
        "--config",
        conf.to_str().unwrap(),
        "index",
        "build",
        "--corpus",
        "nowhere",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ganma"));
}

#[test]
fn gradcheck_passes_on_the_toy_model() {
    let o = alphacc(&["gradcheck", "--probes", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max relative error"));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("i.idx");
    let o = alphacc(&[
        "index",
        "build",
        "--corpus",
        dir.path().join("nope.jsonl").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn run_ok(args: &[&str]) -> String {
    let o = alphacc(args);
    assert_eq!(o.status.code(), Some(0), "alphacc {args:?}: {}", stderr(&o));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn end_to_end_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench");
    let functions = bench.join("functions.jsonl");
    let index = dir.path().join("corpus.idx");
    let embed = dir.path().join("tokens.emb");
    let model = dir.path().join("model.ckpt");
    let small = [
        "--set",
        "d=16",
        "--set",
        "d_ff=32",
        "--set",
        "L=48",
        "--set",
        "R=3",
        "--set",
        "lr=0.001",
        "--set",
        "batch_size=8",
    ];
    let with = |args: &[&str]| -> Vec<String> { args.iter().chain(small.iter()).map(|s| s.to_string()).collect() };
    let call = |args: Vec<String>| run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    run_ok(&[
        "synth",
        "--seed",
        "2",
        "--problems",
        "6",
        "--variants",
        "3",
        "--out",
        p(&bench),
    ]);
    let built = call(with(&["index", "build", "--corpus", p(&functions), "--out", p(&index)]));
    assert!(built.contains("\"functions\": 18"));
    call(with(&[
        "embed",
        "train",
        "--corpus",
        p(&functions),
        "--out",
        p(&embed),
        "--set",
        "embed.epochs=1",
    ]));
    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&functions).unwrap().lines().next().unwrap()).unwrap();
    let v0 = first["id"].as_str().unwrap().to_string();
    assert!(v0.ends_with("_v0"));
    let v1 = format!("{}1", &v0[..v0.len() - 1]);
    let msa = call(with(&[
        "msa",
        "--corpus",
        p(&functions),
        "--index",
        p(&index),
        "--function",
        &v0,
    ]));
    let msa: serde_json::Value = serde_json::from_str(&msa).unwrap();
    assert_eq!(msa["rows"].as_array().unwrap().len(), 3);

    call(with(&[
        "train",
        "--dataset",
        p(&bench),
        "--corpus",
        p(&functions),
        "--index",
        p(&index),
        "--embed",
        p(&embed),
        "--out",
        p(&model),
    ]));
    let report = dir.path().join("eval.json");
    call(with(&[
        "eval",
        "--model",
        p(&model),
        "--dataset",
        p(&bench),
        "--split",
        "train",
        "--corpus",
        p(&functions),
        "--index",
        p(&index),
        "--out",
        p(&report),
    ]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["precision", "recall", "f1", "per_type", "n_pairs", "tau", "config"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let pairs = dir.path().join("query.jsonl");
    fs::write(&pairs, format!("{{\"id1\":\"{v0}\",\"id2\":\"{v1}\"}}\n")).unwrap();
    let detections = dir.path().join("detect.jsonl");
    call(with(&[
        "detect",
        "--model",
        p(&model),
        "--functions",
        p(&functions),
        "--pairs",
        p(&pairs),
        "--out",
        p(&detections),
    ]));
    let line: serde_json::Value = serde_json::from_str(fs::read_to_string(&detections).unwrap().trim()).unwrap();
    // Reformatted copies are token-identical, so their distance is exactly zero.
    assert_eq!(line["score"].as_f64(), Some(0.0));
    assert_eq!(line["clone"].as_bool(), Some(true));
}
