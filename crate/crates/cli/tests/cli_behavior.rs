//! End-to-end behavior of the compiled binary: history determinism, the
//! evaluation round trip, transport agreement, and the inspection commands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gridnewton")
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn head_lines(src: &Path, n: usize, dst: &Path) {
    let text = std::fs::read_to_string(src).expect("corpus file");
    let head: Vec<&str> = text.lines().take(n).collect();
    std::fs::write(dst, head.join("\n") + "\n").expect("dataset slice");
}

/// A tempdir holding small slices of the digit corpus plus a run config.
struct Workbench {
    dir: tempfile::TempDir,
}

impl Workbench {
    fn new() -> Workbench {
        let dir = tempfile::tempdir().expect("tempdir");
        head_lines(&corpus("pendigits"), 120, &dir.path().join("train.txt"));
        head_lines(&corpus("pendigits.t"), 60, &dir.path().join("test.txt"));
        Workbench { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Writes a config file: the small-net defaults, with `extra`'s
    /// top-level entries overriding them.
    fn config(&self, name: &str, extra: serde_json::Value) -> PathBuf {
        let mut base = json!({
            "train_path": self.path("train.txt"),
            "test_path": self.path("test.txt"),
            "layer_sizes": [16, 6, 10],
            "groups_per_layer": [2, 1, 1],
            "seed": 11,
            "max_iter": 3,
            "scaling": "per_feature",
            "newton": { "sample_rate": 0.5 }
        });
        let map = base.as_object_mut().unwrap();
        for (k, v) in extra.as_object().unwrap() {
            map.insert(k.clone(), v.clone());
        }
        let path = self.path(name);
        std::fs::write(&path, serde_json::to_vec_pretty(&base).unwrap()).unwrap();
        path
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The per-row (iter, f) pairs of a history, ignoring clock and metric.
fn objective_column(text: &str) -> Vec<(String, String)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            (cells[0].to_string(), cells[2].to_string())
        })
        .collect()
}

#[test]
fn reruns_write_byte_identical_history() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let out_a = wb.path("a");
    let out_b = wb.path("b");
    let text_a = run_ok(&["train-newton", "--config", s(&cfg), "--out", s(&out_a)]);
    let text_b = run_ok(&["train-newton", "--config", s(&cfg), "--out", s(&out_b)]);
    assert_eq!(text_a, text_b, "stdout history changed between reruns");

    let file_a = std::fs::read(out_a.join("metrics.csv")).unwrap();
    let file_b = std::fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(file_a, file_b, "metrics.csv changed between reruns");
    assert_eq!(file_a, text_a.as_bytes(), "file and stdout histories differ");
    assert_eq!(text_a.lines().count(), 5, "header plus four rows");
}

#[test]
fn zero_iterations_emit_only_the_initial_row() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let text = run_ok(&["train-newton", "--config", s(&cfg), "--max-iter", "0"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iter,elapsed_sec,f,metric");
    assert_eq!(lines.len(), 2, "exactly the header and the starting point");
    assert!(lines[1].starts_with("0,0,"), "row for iteration zero: {}", lines[1]);
}

#[test]
fn evaluation_reproduces_the_final_training_metric() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let out = wb.path("model");
    let text = run_ok(&["train-newton", "--config", s(&cfg), "--out", s(&out)]);
    let final_metric = text.lines().last().unwrap().rsplit(',').next().unwrap().to_string();

    let ckpt = out.join("model.ckpt");
    let eval = run_ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt)]);
    assert_eq!(eval.trim(), format!("accuracy,{final_metric}"));
}

#[test]
fn evaluation_scores_an_explicit_dataset() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let out = wb.path("model");
    run_ok(&["train-newton", "--config", s(&cfg), "--out", s(&out)]);
    let ckpt = out.join("model.ckpt");
    let train = wb.path("train.txt");
    let eval = run_ok(&[
        "eval",
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&train),
    ]);
    let (label, value) = eval.trim().split_once(',').unwrap();
    assert_eq!(label, "accuracy");
    let v: f64 = value.parse().unwrap();
    assert!((0.0..=1.0).contains(&v), "accuracy out of range: {v}");
}

#[test]
fn transports_agree_on_the_objective_trajectory() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let inproc = run_ok(&["train-newton", "--config", s(&cfg), "--transport", "inproc"]);
    let tcp = run_ok(&["train-newton", "--config", s(&cfg), "--transport", "tcp"]);
    assert_eq!(
        objective_column(&inproc),
        objective_column(&tcp),
        "objective values must match between transports, digit for digit"
    );
}

#[test]
fn sgd_reruns_are_byte_identical_and_evaluable() {
    let wb = Workbench::new();
    let cfg = wb.config(
        "sgd.json",
        json!({ "max_iter": 4, "sgd": { "min_epochs": 2, "eta": 0.02 } }),
    );
    let out = wb.path("model");
    let text_a = run_ok(&["train-sgd", "--config", s(&cfg), "--out", s(&out)]);
    let text_b = run_ok(&["train-sgd", "--config", s(&cfg)]);
    assert_eq!(text_a, text_b, "epoch history changed between reruns");
    assert_eq!(text_a.lines().count(), 6, "header, start, and four epochs");

    let final_metric = text_a.lines().last().unwrap().rsplit(',').next().unwrap().to_string();
    let ckpt = out.join("model.ckpt");
    let eval = run_ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt)]);
    assert_eq!(eval.trim(), format!("accuracy,{final_metric}"));
}

#[test]
fn partition_plan_lists_every_partition_with_costs() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({ "groups_per_layer": [2, 2, 1] }));
    let text = run_ok(&["partition-plan", "--config", s(&cfg)]);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("partition,layer,in_group,out_group,"));
    let data_rows = lines[1..].iter().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 6, "2·2 first-layer plus 2·1 second-layer blocks");
    assert!(text.contains("# balance_ratio,"), "summary lines present");
    assert!(text.contains("# max_compute,"), "cost maxima present");
}

#[test]
fn gn_check_reports_tiny_deviations_on_a_small_net() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let text = run_ok(&[
        "gn-check", "--config", s(&cfg), "--rows", "10", "--vectors", "2",
    ]);
    for key in ["jacobian_dev", "diag_dev", "full_dev"] {
        let line = text
            .lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("{key} line missing in {text}"));
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v < 1e-8, "{key} too large: {v}");
    }
}

#[test]
fn auc_with_many_outputs_is_refused() {
    let wb = Workbench::new();
    let cfg = wb.config("run.json", json!({}));
    let out = run(&["train-newton", "--config", s(&cfg), "--metric", "auc"]);
    assert!(!out.status.success(), "ten outputs cannot produce a single score");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("auc"), "error should name the metric: {stderr}");
}
