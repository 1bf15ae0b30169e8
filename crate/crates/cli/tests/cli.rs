//! End-to-end runs of the `qtw` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qtw(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qtw"));
    cmd.args(args).current_dir(dir).env_remove("QTW_SEED").env_remove("QTW_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qtw(dir, args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn gen(dir: &Path) {
    ok(dir, &["gen", "--out", "data", "--train", "10", "--test", "4", "--T", "150"]);
}

#[test]
fn gen_prints_only_output_paths() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["gen", "--out", "data", "--train", "6", "--test", "2", "--T", "100"]);
    for line in stdout.lines() {
        assert!(dir.path().join(line).is_file(), "{line}");
    }
    assert!(stdout.contains("data/manifest.json"));
}

#[test]
fn smoke_train_eval_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d);
    ok(d, &["train", "--data", "data", "--out", "k", "--hidden", "6", "--epochs", "1"]);
    ok(d, &["train", "--data", "data", "--out", "r", "--head", "direct", "--hidden", "6", "--epochs", "1"]);
    ok(d, &["eval", "--ckpt", "k/model.qckp", "--data", "data/test.qtrj", "--out", "k.json", "--csv", "k.csv"]);
    ok(d, &["eval", "--ckpt", "r/model.qckp", "--data", "data", "--out", "r.json"]);
    ok(d, &["report", "--inputs", "k.json", "r.json", "--out", "t.csv"]);
    let table = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].ends_with("physical,delta_fid_proxy"));
    assert!(lines[1].starts_with("gru,kraus,4,") && !lines[1].ends_with(','));
    let csv = std::fs::read_to_string(d.join("k.csv")).unwrap();
    assert!(csv.starts_with("model,head,n_traj,fid_proxy,fid_full,bures,fid_p1,fid_p2,vtr_mean,vtr_max,"));
    ok(d, &["report", "--inputs", "k.json", "r.json", "--format", "json", "--out", "t.json"]);
    assert!(d.join("t.json.run.json").is_file());
}

#[test]
fn known_baseline_reproduces_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    ok(dir.path(), &["baseline", "--mode", "known", "--data", "data", "--out", "known.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("known.json")).unwrap()).unwrap();
    assert!(report["aggregate"]["fid_full"].as_f64().unwrap() >= 0.999);
}

#[test]
fn exit_codes_follow_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(qtw(d, &["train", "--data", "nowhere", "--out", "m"], &[]).status.code(), Some(3));
    gen(d);
    assert_eq!(qtw(d, &["train", "--data", "data", "--out", "m", "--model", "mlp"], &[]).status.code(), Some(2));
    assert_eq!(qtw(d, &["train", "--data", "data", "--out", "m"], &[("QTW_TRAIN_EPOCHS", "0")]).status.code(), Some(2));
    std::fs::write(d.join("bad.cfg"), "[train]\nunknown_knob = 1\n").unwrap();
    let out = qtw(d, &["train", "--data", "data", "--out", "m", "--config", "bad.cfg"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_knob"));

    ok(d, &["train", "--data", "data", "--out", "m", "--hidden", "4", "--epochs", "1"]);
    let mut bytes = std::fs::read(d.join("data/test.qtrj")).unwrap();
    bytes[20] ^= 0xff;
    std::fs::write(d.join("data/test.qtrj"), bytes).unwrap();
    let out = qtw(d, &["eval", "--ckpt", "m/model.qckp", "--data", "data/test.qtrj", "--out", "x.json"], &[]);
    assert_eq!(out.status.code(), Some(5));
    assert!(out.stdout.is_empty());

    let out = qtw(d, &["eval", "--ckpt", "m/model.qckp", "--data", "data/train.qtrj", "--out", "y.json"], &[]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    let out = qtw(d, &["baseline", "--mode", "known", "--data", "data", "--out", "z.json", "--events", "e.jsonl"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradient_norms_and_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d);
    ok(d, &["train", "--data", "data", "--out", "m", "--model", "esn", "--hidden", "6", "--epochs", "1"]);
    ok(d, &["eval", "--ckpt", "m/model.qckp", "--data", "data", "--out", "m.json", "--grad-norms", "g.json"]);
    let norms: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    let norms = norms.as_array().unwrap();
    assert!(norms.iter().any(|b| b["frozen"] == true && b["norm"] == 0.0));
    assert!(norms.iter().any(|b| b["frozen"] == false && b["norm"].as_f64().unwrap() > 0.0));

    ok(d, &["baseline", "--mode", "adaptive", "--data", "data", "--out", "a.json", "--events", "e.jsonl"]);
    let log = std::fs::read_to_string(d.join("e.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4 * 150);
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["traj", "step", "omega", "gamma", "ema", "detected"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn flags_override_environment_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d);
    std::fs::write(d.join("run.cfg"), "[train]\nepochs = 3\nhidden = 4\n").unwrap();
    let env = [("QTW_TRAIN_EPOCHS", "2")];
    let out = qtw(d, &["train", "--data", "data", "--out", "a", "--config", "run.cfg"], &env);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(d.join("a/epochs.jsonl")).unwrap().lines().count(), 2);
    let out = qtw(d, &["train", "--data", "data", "--out", "b", "--config", "run.cfg", "--epochs", "1"], &env);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(d.join("b/epochs.jsonl")).unwrap().lines().count(), 1);
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("b/run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["hidden"], 4);
    assert_eq!(run["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn check_runs_the_invariant_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = qtw(dir.path(), &["check", "--out", "check.json"], &[]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{stderr}");
    assert_eq!(stderr.lines().filter(|l| l.starts_with("PASS")).count(), 12);
    let lines: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check.json")).unwrap()).unwrap();
    assert_eq!(lines.as_array().unwrap().len(), 12);
}
