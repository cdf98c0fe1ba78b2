use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11

[dataset.synthetic]
n = 300
rho = 0.8

[pipeline.crossfit.outcome]
kind = "ridge_linear"

[pipeline.risk]
kind = "ridge_linear"

[pipeline.cate]
kind = "random_forest"
n_trees = 20

[sweep]
k_values = [0.0]
bootstrap_reps = 50

[curve]
window = 40
"#;

fn targeting(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_targeting"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Vec<PathBuf> {
    let out = targeting(args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect()
}

fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn synth_writes_both_files_and_creates_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("nested/out");
    let files = run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(files.len(), 3);
    for f in &files {
        assert!(f.exists(), "{} missing", f.display());
    }
    assert_eq!(data_lines(&out.join("synthetic.csv")), 300);
    assert_eq!(data_lines(&out.join("ground_truth.csv")), 300);

    let again = tmp.path().join("again");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out.join("synthetic.csv")).unwrap(),
        fs::read(again.join("synthetic.csv")).unwrap()
    );

    let other = tmp.path().join("other");
    run_ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--seed",
        "12",
    ]);
    assert_ne!(
        fs::read(out.join("synthetic.csv")).unwrap(),
        fs::read(other.join("synthetic.csv")).unwrap()
    );
}

#[test]
fn sweep_with_single_k_has_three_rows_per_welfare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let files = run_ok(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let svgs = files
        .iter()
        .filter(|f| f.extension().is_some_and(|e| e == "svg"))
        .count();
    assert_eq!(svgs, 3);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "welfare,policy,k,value,ci_lo,ci_hi");
    for label in ["utilitarian,", "nash,", "weighted_alpha_"] {
        assert_eq!(csv.lines().filter(|l| l.starts_with(label)).count(), 3, "{label}");
    }
    let json = fs::read_to_string(out.join("sweep.json")).unwrap();
    assert!(json.trim_start().starts_with('{') && json.contains("\"utilitarian\""));
}

#[test]
fn effective_config_reproduces_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let first = tmp.path().join("first");
    run_ok(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
    ]);
    let effective = first.join("config.effective.toml");
    let second = tmp.path().join("second");
    run_ok(&[
        "sweep",
        "--config",
        effective.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(first.join("sweep.csv")).unwrap(),
        fs::read(second.join("sweep.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("sweep.json")).unwrap(),
        fs::read(second.join("sweep.json")).unwrap()
    );
}

#[test]
fn curve_emits_csv_svg_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let files = run_ok(&[
        "curve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    let names: Vec<_> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    for want in [
        "curve.csv",
        "curve.svg",
        "curve_summary.json",
        "pseudo_outcomes.csv",
        "risk_scores.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "{want} not emitted");
    }
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "b,tau_hat,sigma,ci_lo,ci_hi");
    assert_eq!(curve.lines().count(), 301);
    assert!(fs::read_to_string(out.join("curve.svg")).unwrap().contains("<polygon"));
}

#[test]
fn curve_on_one_row_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL
            .replace("n = 300", "n = 1\nd = 2\nrho = 1.0")
            .replace("rho = 0.8\n", ""),
    );
    let out = tmp.path().join("never");
    let res = targeting(&[
        "curve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(res.stdout.is_empty());
    assert!(!out.exists());
}

#[test]
fn alpha_table_has_one_column_per_k() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "k_values = [0.0]",
        "k_values = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]",
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    run_ok(&[
        "alpha",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let table = fs::read_to_string(out.join("alpha.csv")).unwrap();
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines[0], "dataset,5%,10%,15%,20%,25%,30%,35%,40%");
    let cells: Vec<_> = lines[1].split(',').collect();
    assert_eq!(cells.len(), 9);
    for c in &cells[1..] {
        assert!(*c == "na" || c.parse::<f64>().is_ok(), "bad cell {c}");
    }
}

#[test]
fn csv_source_resolves_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let synth_cfg = write_config(tmp.path(), SMALL);
    let data_dir = tmp.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        synth_cfg.to_str().unwrap(),
        "--out",
        data_dir.to_str().unwrap(),
    ]);

    let cfg_dir = tmp.path().join("cfg");
    fs::create_dir(&cfg_dir).unwrap();
    let text = SMALL.replace(
        "[dataset.synthetic]\nn = 300\nrho = 0.8",
        "[dataset.csv]\npath = \"../data/synthetic.csv\"\nfeatures = [\"x0\", \"x1\", \"x2\", \"x3\", \"x4\", \"x5\"]\ntreatment = \"w\"\noutcome = \"y\"\ndirection = \"higher_is_better\"",
    );
    let cfg = write_config(&cfg_dir, &text);
    let out = tmp.path().join("out");
    run_ok(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn bad_config_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sed = 1\n[dataset.synthetic]\n");
    let res = targeting(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
}
