//! `svmtree` command-line interface: train, predict, benchmark, compare.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svmtree::dataset::CsvOptions;
use svmtree::evaluation::{
    emit_report, run_cv, select_hyperparameters, CvConfig, DatasetEntry, EvaluationReport, HyperGrid, ReportFormat,
    RunManifest,
};
use svmtree::{Dataset, Exec, FitOptions, KernelSpec, ModelFile, MulticlassModel, Strategy, TrainConfig};

#[derive(Parser)]
#[command(name = "svmtree", version, about = "Multi-class SVMs: decision trees and pairwise baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy on a whole dataset and write the model.
    Train(TrainArgs),
    /// Classify the rows of a CSV file with a trained model.
    #[command(alias = "classify")]
    Predict(PredictArgs),
    /// Cross-validate strategies on datasets and write reports.
    Benchmark(BenchArgs),
    /// Pairwise Wilcoxon tests over saved JSON reports.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file; repeat for several datasets.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// 0-based label column (default: last).
    #[arg(long)]
    label_col: Option<usize>,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated RBF widths.
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.1, 1.0, 10.0])]
    gamma_grid: Vec<f64>,
    /// Comma-separated penalties.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1000.0])]
    c_grid: Vec<f64>,
    /// Share of pairwise classifiers shortlisted by ibge_dtree.
    #[arg(long, default_value_t = 0.2)]
    frac: f64,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl GridArgs {
    fn cv_config(&self, timing: bool) -> CvConfig {
        CvConfig {
            folds: self.folds,
            seed: self.seed,
            grid: HyperGrid {
                gammas: self.gamma_grid.clone(),
                cs: self.c_grid.clone(),
            },
            frac: self.frac,
            timing,
            exec: if self.sequential { Exec::Sequential } else { Exec::Parallel },
            ..CvConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    strategy: Strategy,
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory.
    #[arg(long, env = "SVMTREE_OUT", default_value = "svmtree-out")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// 0-based column of the input to ignore (e.g. a label).
    #[arg(long)]
    label_col: Option<usize>,
    #[arg(long)]
    header: bool,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Strategy to evaluate; repeat for several.
    #[arg(long = "strategy", required = true)]
    strategies: Vec<Strategy>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, env = "SVMTREE_OUT", default_value = "svmtree-out")]
    out: PathBuf,
    /// Report format; repeat for several (default: text, csv and json).
    #[arg(long = "format")]
    formats: Vec<String>,
    /// Record wall-clock times in the reports.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON report; repeat to merge several.
    #[arg(long = "report", required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Serialize, Deserialize)]
struct TrainManifest {
    tool_version: String,
    dataset: DatasetEntry,
    strategy: Strategy,
    gamma: f64,
    c: f64,
    cv: CvConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

fn load_dataset(path: &Path, data: &DataArgs) -> Result<(Dataset, DatasetEntry)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let opts = CsvOptions {
        label_column: data.label_col,
        header: data.header,
    };
    let ds = Dataset::from_csv_reader(bytes.as_slice(), &opts).with_context(|| format!("parsing {}", path.display()))?;
    let entry = DatasetEntry {
        name: dataset_name(path),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        label_column: data.label_col,
        header: data.header,
        rows: ds.len(),
        classes: ds.num_classes(),
    };
    Ok((ds, entry))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn train(a: TrainArgs) -> Result<ExitCode> {
    if a.data.datasets.len() != 1 {
        bail!("train takes exactly one --dataset");
    }
    let cv = a.grid.cv_config(false);
    cv.validate()?;
    let (raw, entry) = load_dataset(&a.data.datasets[0], &a.data)?;
    let ds = raw.normalize()?;
    let (gamma, c) = select_hyperparameters(&ds, &entry.name, a.strategy, &cv)?;
    let cfg = TrainConfig {
        c_reg: c,
        kernel: KernelSpec::rbf(gamma)?,
        ..TrainConfig::default()
    };
    let opts = FitOptions {
        frac: cv.frac,
        seed: cv.seed,
        exec: cv.exec,
        ..FitOptions::default()
    };
    let model = MulticlassModel::fit(&ds, a.strategy, &cfg, &opts)?;
    let file = ModelFile {
        format_version: ModelFile::VERSION,
        feature_dim: ds.feature_dim,
        class_names: ds.class_names.clone(),
        normalization: ds.normalization.clone(),
        train_config: cfg,
        model,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let model_path = a.out.join("model.json");
    write(&model_path, &file.to_json()?)?;
    let manifest = TrainManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        dataset: entry,
        strategy: a.strategy,
        gamma,
        c,
        cv,
    };
    write(&a.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    println!("{}", model_path.display());
    Ok(ExitCode::SUCCESS)
}

fn predict(a: PredictArgs) -> Result<ExitCode> {
    let json = fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let model = ModelFile::from_json(&json).with_context(|| format!("loading model {}", a.model.display()))?;
    let input = fs::File::open(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let rows = Dataset::read_features(input, a.label_col, a.header)?;
    let mut out = String::from("row,class,decisions\n");
    for (i, x) in rows.iter().enumerate() {
        let p = model.predict_raw(x).with_context(|| format!("row {}", i + 1))?;
        out.push_str(&format!("{},{},{}\n", i + 1, model.class_name(p.class), p.decisions));
    }
    match &a.output {
        Some(path) => write(path, &out)?,
        None => io::stdout().write_all(out.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_formats(raw: &[String]) -> Result<Vec<ReportFormat>> {
    if raw.is_empty() {
        return Ok(vec![ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json]);
    }
    raw.iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.parse::<ReportFormat>().map_err(Into::into))
        .collect()
}

fn benchmark(a: BenchArgs) -> Result<ExitCode> {
    let cv = a.grid.cv_config(a.timing);
    cv.validate()?;
    let formats = parse_formats(&a.formats)?;
    let mut loaded = Vec::new();
    for path in &a.data.datasets {
        let (ds, entry) = load_dataset(path, &a.data)?;
        if loaded.iter().any(|(_, e): &(Dataset, DatasetEntry)| e.name == entry.name) {
            bail!("two datasets are named {:?}", entry.name);
        }
        loaded.push((ds, entry));
    }
    let mut results = Vec::new();
    for (ds, entry) in &loaded {
        for &s in &a.strategies {
            eprintln!("{} / {s}", entry.name);
            results.push(run_cv(ds, &entry.name, s, &cv)?);
        }
    }
    let report = EvaluationReport::from_results(results)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for f in &formats {
        write(&a.out.join(format!("report.{}", f.extension())), &emit_report(&report, *f)?)?;
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        datasets: loaded.into_iter().map(|(_, e)| e).collect(),
        strategies: a.strategies.clone(),
        cv,
    };
    write(&a.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    print!("{}", emit_report(&report, ReportFormat::Text)?);
    if report.complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("some folds failed");
        Ok(ExitCode::from(2))
    }
}

fn compare(a: CompareArgs) -> Result<ExitCode> {
    let mut results = Vec::new();
    for path in &a.reports {
        let json = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let report = EvaluationReport::from_json(&json).with_context(|| format!("parsing {}", path.display()))?;
        results.extend(report.results);
    }
    let format: ReportFormat = a.format.parse()?;
    let merged = EvaluationReport::from_results(results)?;
    print!("{}", emit_report(&merged, format)?);
    Ok(ExitCode::SUCCESS)
}
