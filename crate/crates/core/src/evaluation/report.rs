//! Text / CSV / JSON rendering of evaluation reports.

use std::fmt::Write as _;
use std::str::FromStr;

use super::EvaluationReport;
use crate::error::{Error, Result};
use crate::multiclass::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

pub const CSV_HEADER: &str = "dataset,method,fold,accuracy,mean_decisions,train_s,classify_s";

pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Text => Ok(emit_text(report)),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn emit_csv(report: &EvaluationReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in &report.results {
        for f in &r.folds {
            w.write_record([
                r.dataset.clone(),
                r.method.name().to_string(),
                f.fold.to_string(),
                cell(f.accuracy),
                cell(f.mean_decisions),
                cell(f.train_s),
                cell(f.classify_s),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn emit_text(report: &EvaluationReport) -> String {
    let mut methods: Vec<Strategy> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    for r in &report.results {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    let find = |d: &str, m: Strategy| report.results.iter().find(|r| r.dataset == d && r.method == m);
    let mut out = String::new();

    out.push_str("Accuracy (%), mean ± std over folds, (rank)\n");
    let _ = write!(out, "{:<16}", "dataset");
    for m in &methods {
        let _ = write!(out, " {:>24}", m.name());
    }
    out.push('\n');
    for d in &datasets {
        let accs: Vec<Option<f64>> = methods.iter().map(|&m| find(d, m).and_then(|r| r.mean_accuracy())).collect();
        let _ = write!(out, "{d:<16}");
        for (k, &m) in methods.iter().enumerate() {
            let s = match (accs[k], find(d, m).and_then(|r| r.std_accuracy())) {
                (Some(a), Some(sd)) => {
                    let rank = 1 + accs.iter().flatten().filter(|&&o| o > a).count();
                    format!("{:.3} ± {:.3} ({rank})", 100.0 * a, 100.0 * sd)
                }
                _ => "n/a".to_string(),
            };
            let _ = write!(out, " {s:>24}");
        }
        out.push('\n');
    }

    out.push_str("\nAverage decisions per example\n");
    let _ = write!(out, "{:<16} {:>4}", "dataset", "N");
    for m in &methods {
        let _ = write!(out, " {:>12}", m.name());
    }
    out.push('\n');
    for d in &datasets {
        let n = methods.iter().find_map(|&m| find(d, m)).map(|r| r.num_classes).unwrap_or(0);
        let _ = write!(out, "{d:<16} {n:>4}");
        for &m in &methods {
            let s = find(d, m)
                .and_then(|r| r.mean_decisions())
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "n/a".into());
            let _ = write!(out, " {s:>12}");
        }
        out.push('\n');
    }

    out.push_str("\nWilcoxon signed-rank test on mean accuracy (win-lose-draw of first vs second)\n");
    for c in &report.comparisons {
        let p = c
            .test
            .p_value
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            out,
            "{:<12} vs {:<12} p = {:<10} ({}-{}-{})",
            c.a.name(),
            c.b.name(),
            p,
            c.test.win,
            c.test.lose,
            c.test.draw
        );
    }
    let failed: usize = report.results.iter().map(|r| r.failed_folds()).sum();
    if failed > 0 {
        let _ = writeln!(out, "\n{failed} fold(s) failed; see the JSON report for messages");
    }
    out
}
