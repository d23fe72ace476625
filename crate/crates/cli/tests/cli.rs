use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svmtree"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(format!("{name}.csv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SVMTREE_OUT").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 4] = ["--gamma-grid", "0.1", "--c-grid", "10"];

fn train(dataset: &Path, strategy: &str, out: &Path) -> PathBuf {
    let mut args = vec!["train", "--dataset", s(dataset), "--strategy", strategy, "--out", s(out)];
    args.extend(FAST);
    ok(&run(&args));
    out.join("model.json")
}

/// Three well separated clusters labelled a, b, c in the last column.
fn separable_csv(dir: &Path) -> PathBuf {
    let mut csv = String::new();
    for (label, cx, cy) in [("a", 0.0, 0.0), ("b", 5.0, 0.0), ("c", 0.0, 5.0)] {
        for i in 0..10 {
            let dx = 0.1 * (i % 4) as f64;
            let dy = 0.1 * (i / 4) as f64;
            writeln!(csv, "{},{},{label}", cx + dx, cy + dy).unwrap();
        }
    }
    let path = dir.join("sep.csv");
    fs::write(&path, csv).unwrap();
    path
}

#[test]
fn train_ibge_three_classes_has_two_internal_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(&data("iris"), "ibge_dtree", dir.path());
    let json: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let text = json.to_string();
    assert_eq!(text.matches("\"pos_classes\"").count(), 2);
    assert_eq!(json["model"]["strategy"], "ibge_dtree");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dataset"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["dataset"]["classes"], 3);
}

#[test]
fn usage_and_io_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--dataset", s(&data("iris")), "--strategy", "nope", "--out", s(dir.path())]);
    assert!(!out.status.success());
    let out = run(&["train", "--dataset", "/no/such/file.csv", "--strategy", "ovo", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("file.csv"));
    let out = run(&["benchmark", "--dataset", s(&data("iris")), "--strategy", "ovo", "--frac", "0"]);
    assert!(!out.status.success());
}

#[test]
fn predict_ovo_ten_classes_uses_45_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(&data("digits"), "ovo", dir.path());
    let out = ok(&run(&["predict", "--model", s(&model), "--input", s(&data("digits")), "--label-col", "64"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("row,class,decisions"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1797);
    assert!(rows.iter().all(|r| r.ends_with(",45")));
}

#[test]
fn predict_empty_input_prints_header() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(&data("iris"), "ova", dir.path());
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = ok(&run(&["classify", "--model", s(&model), "--input", s(&empty)]));
    assert_eq!(out, "row,class,decisions\n");
}

#[test]
fn predict_reproduces_separable_training_labels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = separable_csv(dir.path());
    for strategy in ["ovo", "ddag", "ib_dtree", "cbts_g"] {
        let model = train(&csv, strategy, &dir.path().join(strategy));
        let pred = dir.path().join(format!("{strategy}.csv"));
        ok(&run(&["predict", "--model", s(&model), "--input", s(&csv), "--label-col", "2", "--output", s(&pred)]));
        let got: Vec<String> = fs::read_to_string(&pred)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().to_string())
            .collect();
        let want: Vec<String> = fs::read_to_string(&csv)
            .unwrap()
            .lines()
            .map(|l| l.rsplit(',').next().unwrap().to_string())
            .collect();
        assert_eq!(got, want, "{strategy}");
    }
}

#[test]
fn predict_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(&data("iris"), "ovo", dir.path());
    // label column kept: five values per row instead of four
    let out = run(&["predict", "--model", s(&model), "--input", s(&data("iris"))]);
    assert!(!out.status.success());
    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{\"format_version\": 1").unwrap();
    let out = run(&["predict", "--model", s(&corrupt), "--input", s(&data("iris"))]);
    assert!(!out.status.success());
}

fn bench_args<'a>(out: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["benchmark", "--folds", "3", "--out", s(out), "--gamma-grid", "0.1,1", "--c-grid", "1,10"];
    args.extend(extra);
    args
}

#[test]
fn benchmark_cells_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris");
    let wine = data("wine");
    let extra = ["--dataset", s(&iris), "--dataset", s(&wine), "--strategy", "ovo", "--strategy", "ibge_dtree"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let text = ok(&run(&bench_args(&a, &extra)));
    ok(&run(&bench_args(&b, &extra)));
    let csv_a = fs::read(a.join("report.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("report.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 2 * 2 * 3);
    let report: Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 4);
    assert_eq!(report["comparisons"].as_array().unwrap().len(), 1);
    assert!(text.contains("Wilcoxon"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["datasets"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["cv"]["folds"], 3);

    let cmp = ok(&run(&["compare", "--report", s(&a.join("report.json"))]));
    assert!(cmp.contains("ovo") && cmp.contains("ibge_dtree"));
}

#[test]
fn benchmark_output_dir_from_env_and_format_choice() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris");
    let out = bin()
        .args(["benchmark", "--dataset", s(&iris), "--strategy", "ova", "--folds", "2", "--format", "csv"])
        .args(FAST)
        .env("SVMTREE_OUT", dir.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("report.csv").exists());
    assert!(!dir.path().join("report.json").exists());
    let out = bin()
        .args(["benchmark", "--dataset", s(&iris), "--strategy", "ova", "--format", "xml"])
        .env("SVMTREE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn hundred_classes_decision_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::new();
    for c in 0..100 {
        let (cx, cy) = ((c % 10) as f64 * 3.0, (c / 10) as f64 * 3.0);
        for i in 0..6 {
            writeln!(csv, "{},{},{c}", cx + 0.1 * (i % 3) as f64, cy + 0.1 * (i / 3) as f64).unwrap();
        }
    }
    let path = dir.path().join("hundred.csv");
    fs::write(&path, csv).unwrap();
    let out = dir.path().join("out");
    let args = [
        "benchmark", "--dataset", s(&path), "--strategy", "ovo", "--strategy", "ib_dtree", "--folds", "2",
        "--gamma-grid", "10", "--c-grid", "10", "--format", "json", "--out", s(&out),
    ];
    ok(&run(&args));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let mean_dec = |k: usize| -> f64 {
        let folds = report["results"][k]["folds"].as_array().unwrap();
        folds.iter().map(|f| f["mean_decisions"].as_f64().unwrap()).sum::<f64>() / folds.len() as f64
    };
    assert_eq!(mean_dec(0), 4950.0);
    let tree = mean_dec(1);
    assert!((6.0..10.0).contains(&tree), "{tree}");
}
