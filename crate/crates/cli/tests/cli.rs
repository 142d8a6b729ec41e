use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use caasr_cli::error::{EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE};

const SMALL: &[&str] = &[
    "--set", "synth_items=60",
    "--set", "synth_bundles=6",
    "--set", "synth_sequences=150",
    "--set", "max_epochs=3",
    "--set", "latent_dim=12",
    "--set", "cheb_order=2",
    "--set", "learning_rate=0.01",
];

fn caasr(cmd: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caasr"))
        .arg(cmd)
        .arg("--out-dir")
        .arg(out)
        .args(SMALL)
        .args(extra)
        .output()
        .unwrap()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn prepared(out: &Path) {
    ok(caasr("synth", out, &[]));
    let input = format!("input={}", out.join("synth.tsv").display());
    ok(caasr("prepare", out, &["--set", &input]));
    ok(caasr("build-graph", out, &[]));
}

#[test]
fn prepare_reports_dataset_statistics() {
    let dir = tempfile::tempdir().unwrap();
    ok(caasr("synth", dir.path(), &[]));
    let input = format!("input={}", dir.path().join("synth.tsv").display());
    let stats = ok(caasr("prepare", dir.path(), &["--set", &input]));
    for key in ["#users", "#items", "#interactions", "avg.len", "data density"] {
        assert!(stats.lines().any(|l| l.starts_with(&format!("{key}\t"))), "{key} missing:\n{stats}");
    }
    for f in ["train.tsv", "test.tsv", "users.tsv", "items.tsv", "prepare.config"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn order_zero_caasr_trace_equals_gru4rec() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    ok(caasr("train", dir.path(), &["--set", "model=gru4rec"]));
    ok(caasr("train", dir.path(), &["--set", "model=caasr", "--set", "cheb_order=0"]));
    let a = fs::read_to_string(dir.path().join("gru4rec.loss.tsv")).unwrap();
    let b = fs::read_to_string(dir.path().join("caasr.loss.tsv")).unwrap();
    assert_eq!(a.lines().count(), 3);
    assert_eq!(a, b);
}

#[test]
fn report_has_four_metric_lines_and_self_compare_is_null() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    ok(caasr("train", dir.path(), &["--set", "model=caasr"]));
    ok(caasr("evaluate", dir.path(), &["--set", "model=caasr"]));
    let report = dir.path().join("caasr.report.tsv");
    let text = fs::read_to_string(&report).unwrap();
    let metrics: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("recall\t") || l.starts_with("mrr\t"))
        .collect();
    assert_eq!(metrics.len(), 4, "{metrics:?}");

    let out = Command::new(env!("CARGO_BIN_EXE_caasr"))
        .arg("compare")
        .args([&report, &report])
        .output()
        .unwrap();
    let rendered = ok(out);
    assert!(rendered.trim_end().ends_with('−'), "{rendered}");
    assert!(rendered.contains("+0.00%"));
}

#[test]
fn every_model_trains_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    for m in ["caasr", "gru4rec", "bpr", "bpr_knn", "p_cofactor", "p_graphae"] {
        let model = format!("model={m}");
        ok(caasr("train", dir.path(), &["--set", &model]));
        let out = ok(caasr("evaluate", dir.path(), &["--set", &model]));
        assert!(out.contains("Recall@20"), "{m}: {out}");
        assert!(dir.path().join(format!("{m}.report.tsv")).is_file());
    }
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = caasr("prepare", dir.path(), &["--set", "input=/nonexistent/log.tsv"]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = caasr("prepare", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = caasr("train", dir.path(), &["--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn missing_artifacts_and_mismatched_checkpoints_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(caasr("build-graph", dir.path(), &[]).status.code(), Some(EXIT_DATA));
    prepared(dir.path());
    ok(caasr("train", dir.path(), &["--set", "model=caasr"]));
    let ckpt = dir.path().join("caasr.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let o = caasr("evaluate", dir.path(), &["--set", "model=gru4rec", ckpt]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));
    let o = caasr("evaluate", dir.path(), &["--set", "model=caasr", "--set", "latent_dim=7"]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));
}

#[test]
fn divergence_leaves_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let o = caasr("train", dir.path(), &["--set", "model=gru4rec", "--set", "learning_rate=1e300"]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(!names.iter().any(|n| n.starts_with("gru4rec.") || n.ends_with(".partial")), "{names:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        prepared(dir);
        ok(caasr("train", dir, &["--set", "model=caasr"]));
        ok(caasr("evaluate", dir, &["--set", "model=caasr"]));
    }
    for f in ["train.tsv", "test.tsv", "graph.txt", "sppmi.txt", "caasr.ckpt", "caasr.loss.tsv", "caasr.report.tsv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn help_and_bad_arguments() {
    assert!(caasr_cli::run(["caasr", "--help"]).unwrap().contains("build-graph"));
    let err = caasr_cli::run(["caasr", "frobnicate"]).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_USAGE);
    let err = caasr_cli::run(["caasr", "compare", "only-one.tsv"]).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_USAGE);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# planted run\nsynth_sequences = 40\nseed = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_caasr"))
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .args(["--set", "synth_items=60", "--set", "synth_bundles=6", "--seed", "4"])
        .output()
        .unwrap();
    let text = ok(out);
    assert!(text.starts_with("sequences\t40\n"), "{text}");
    let dumped = fs::read_to_string(dir.path().join("synth.config")).unwrap();
    assert!(dumped.lines().any(|l| l == "seed = 4"), "{dumped}");
}
