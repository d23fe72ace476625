//! Cross-validation benchmark harness.
//!
//! For each outer fold the training split is scaled to [-1, 1] (the test
//! split reuses its statistics), `(gamma, C)` is picked by an inner
//! stratified cross-validation on the training split, and the strategy is
//! retrained on the whole training split and scored on the held-out fold.
//!
//! Every random choice draws from a seed derived from the identifying tuple
//! (dataset, method, fold, ...), never from execution order, so results are
//! identical whichever way folds and grid points are scheduled.

mod report;
mod wilcoxon;

pub use report::{emit_report, ReportFormat};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_with, WilcoxonMethod, WilcoxonResult, EXACT_LIMIT};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset, FoldPlan, Normalization};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::KernelSpec;
use crate::metrics::GenErrorParams;
use crate::multiclass::{FitOptions, MulticlassModel, PairOutcomes, Strategy};
use crate::seed::{derive, name_hash};
use crate::svm::{GramMatrix, TrainConfig, TrainingContext, FULL_GRAM_LIMIT};

const TAG_FOLDS: u64 = 1;
const TAG_INNER: u64 = 2;
const TAG_ORDERS: u64 = 3;
const TAG_BTS: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            gammas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            cs: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

impl HyperGrid {
    pub fn single(gamma: f64, c: f64) -> Self {
        Self {
            gammas: vec![gamma],
            cs: vec![c],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.cs.is_empty() {
            return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
        }
        if self.gammas.iter().chain(&self.cs).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("grid values must be positive".into()));
        }
        Ok(())
    }

    /// Grid points in tie-break order: smaller C first, then smaller gamma.
    fn points(&self) -> Vec<(f64, f64)> {
        let mut cs = self.cs.clone();
        let mut gs = self.gammas.clone();
        cs.sort_by(f64::total_cmp);
        gs.sort_by(f64::total_cmp);
        cs.dedup();
        gs.dedup();
        cs.iter().flat_map(|&c| gs.iter().map(move |&g| (g, c))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub grid: HyperGrid,
    pub frac: f64,
    pub bound: GenErrorParams,
    /// Random class orders averaged for DDAG / ADAG.
    pub orders: usize,
    /// Seeded BTS-G builds averaged per fold.
    pub bts_runs: usize,
    pub tolerance: f64,
    /// Record wall-clock times (makes reports non-reproducible).
    pub timing: bool,
    pub exec: Exec,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            inner_folds: 3,
            seed: 0,
            grid: HyperGrid::default(),
            frac: 0.2,
            bound: GenErrorParams::default(),
            orders: 1000,
            bts_runs: 10,
            tolerance: 1e-3,
            timing: false,
            exec: Exec::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.bound.validate()?;
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(Error::InvalidArgument("need at least 2 folds".into()));
        }
        if !(self.frac > 0.0 && self.frac <= 1.0) {
            return Err(Error::InvalidArgument(format!("frac must lie in (0, 1], got {}", self.frac)));
        }
        if self.orders == 0 || self.bts_runs == 0 {
            return Err(Error::InvalidArgument("orders and bts_runs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: Option<f64>,
    pub mean_decisions: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub train_s: Option<f64>,
    pub classify_s: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub dataset: String,
    pub method: Strategy,
    pub num_classes: usize,
    pub folds: Vec<FoldResult>,
}

impl MethodResult {
    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().filter_map(|f| f.accuracy).collect()
    }

    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.error.is_some()).count()
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        mean(&self.accuracies())
    }

    /// Sample standard deviation of fold accuracies.
    pub fn std_accuracy(&self) -> Option<f64> {
        let a = self.accuracies();
        let m = mean(&a)?;
        if a.len() < 2 {
            return Some(0.0);
        }
        Some((a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (a.len() - 1) as f64).sqrt())
    }

    pub fn mean_decisions(&self) -> Option<f64> {
        mean(&self.folds.iter().filter_map(|f| f.mean_decisions).collect::<Vec<_>>())
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: Strategy,
    pub b: Strategy,
    pub datasets: usize,
    pub test: WilcoxonResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub results: Vec<MethodResult>,
    pub comparisons: Vec<PairComparison>,
}

impl EvaluationReport {
    /// Collects results and runs a Wilcoxon test on mean accuracies across
    /// datasets for every pair of methods, in first-appearance order.
    pub fn from_results(results: Vec<MethodResult>) -> Result<Self> {
        let mut methods: Vec<Strategy> = Vec::new();
        let mut datasets: Vec<String> = Vec::new();
        for r in &results {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
            if !datasets.contains(&r.dataset) {
                datasets.push(r.dataset.clone());
            }
        }
        let acc = |m: Strategy, d: &str| {
            results
                .iter()
                .find(|r| r.method == m && r.dataset == d)
                .and_then(MethodResult::mean_accuracy)
        };
        let mut comparisons = Vec::new();
        for (i, &a) in methods.iter().enumerate() {
            for &b in &methods[i + 1..] {
                let (xs, ys): (Vec<f64>, Vec<f64>) = datasets
                    .iter()
                    .filter_map(|d| Some((acc(a, d)?, acc(b, d)?)))
                    .unzip();
                comparisons.push(PairComparison {
                    a,
                    b,
                    datasets: xs.len(),
                    test: wilcoxon_signed_rank(&xs, &ys)?,
                });
            }
        }
        Ok(Self { results, comparisons })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn complete(&self) -> bool {
        self.results.iter().all(|r| r.failed_folds() == 0)
    }
}

/// What a benchmark run needs to be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub datasets: Vec<DatasetEntry>,
    pub strategies: Vec<Strategy>,
    pub cv: CvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: String,
    pub sha256: String,
    pub label_column: Option<usize>,
    pub header: bool,
    pub rows: usize,
    pub classes: usize,
}

/// Seed for the outer folds of `dataset`; shared by all methods so their
/// fold accuracies are paired.
pub fn fold_seed(seed: u64, dataset: &str) -> u64 {
    derive(seed, &[TAG_FOLDS, name_hash(dataset)])
}

/// Runs k-fold cross-validation of one strategy on one (raw, unscaled)
/// dataset.
pub fn run_cv(ds: &Dataset, dataset: &str, method: Strategy, cfg: &CvConfig) -> Result<MethodResult> {
    cfg.validate()?;
    let plan = ds.make_folds(cfg.folds, fold_seed(cfg.seed, dataset))?;
    let folds = cfg.exec.map_range(cfg.folds, |f| {
        let t0 = Instant::now();
        match run_fold(ds, &plan, f, dataset, method, cfg) {
            Ok(mut r) => {
                if cfg.timing {
                    r.train_s.get_or_insert(t0.elapsed().as_secs_f64());
                } else {
                    r.train_s = None;
                    r.classify_s = None;
                }
                r
            }
            Err(e) => FoldResult {
                fold: f,
                accuracy: None,
                mean_decisions: None,
                gamma: None,
                c: None,
                train_s: None,
                classify_s: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(MethodResult {
        dataset: dataset.to_string(),
        method,
        num_classes: ds.num_classes(),
        folds,
    })
}

fn run_fold(
    ds: &Dataset,
    plan: &FoldPlan,
    f: usize,
    dataset: &str,
    method: Strategy,
    cfg: &CvConfig,
) -> Result<FoldResult> {
    let (train_idx, test_idx) = plan.split(f);
    let raw_train = ds.subset(&train_idx);
    let norm = Normalization::fit(&raw_train.features)?;
    let train = raw_train.normalize_with(&norm)?;
    let test = ds.subset(&test_idx).normalize_with(&norm)?;
    if train.num_classes() < 2 {
        return Err(Error::InvalidArgument("training fold has fewer than two classes".into()));
    }
    let path = [name_hash(dataset), name_hash(method.name()), f as u64];

    let t_train = Instant::now();
    let (gamma, c) = select_params(&train, method, cfg, &path)?;
    let tcfg = TrainConfig {
        c_reg: c,
        kernel: KernelSpec::rbf(gamma)?,
        tolerance: cfg.tolerance,
        ..TrainConfig::default()
    };
    let all: Vec<usize> = (0..train.len()).collect();
    let ctx = TrainingContext::from_parts(&train.features, &train.labels, &all, tcfg, None, cfg.exec)?;
    let models = fit_runs(&ctx, method, cfg, &path)?;
    let train_s = t_train.elapsed().as_secs_f64();

    let t_classify = Instant::now();
    let test_rows: Vec<usize> = (0..test.len()).collect();
    let (accuracy, mean_decisions) =
        score_runs(&models, &test.features, &test.labels, &test_rows, method, cfg, &path)?;
    let classify_s = t_classify.elapsed().as_secs_f64();

    Ok(FoldResult {
        fold: f,
        accuracy: Some(accuracy),
        mean_decisions: Some(mean_decisions),
        gamma: Some(gamma),
        c: Some(c),
        train_s: Some(train_s),
        classify_s: Some(classify_s),
        error: None,
    })
}

/// BTS-G is built once per seed; every other strategy once.
fn fit_runs(ctx: &TrainingContext<'_>, method: Strategy, cfg: &CvConfig, path: &[u64]) -> Result<Vec<MulticlassModel>> {
    let runs = if method == Strategy::BtsG { cfg.bts_runs } else { 1 };
    (0..runs)
        .map(|r| {
            let mut p = path.to_vec();
            p.extend([TAG_BTS, r as u64]);
            let opts = FitOptions {
                frac: cfg.frac,
                bound: cfg.bound,
                seed: derive(cfg.seed, &p),
                exec: cfg.exec,
            };
            MulticlassModel::fit_in(ctx, method, &opts)
        })
        .collect()
}

/// Mean accuracy and mean decision count over `rows`, averaged over runs
/// (BTS-G) or random class orders (DDAG / ADAG).
fn score_runs(
    models: &[MulticlassModel],
    features: &[Vec<f64>],
    labels: &[ClassId],
    rows: &[usize],
    method: Strategy,
    cfg: &CvConfig,
    path: &[u64],
) -> Result<(f64, f64)> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation fold".into()));
    }
    let n = rows.len() as f64;
    let mut acc_sum = 0.0;
    let mut dec_sum = 0.0;
    for model in models {
        let (correct, decisions) = match method {
            Strategy::Ddag | Strategy::Adag => {
                let pool = model.ovo_pool().expect("dag models hold a pool");
                let mut p = path.to_vec();
                p.push(TAG_ORDERS);
                let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &p));
                let orders: Vec<Vec<ClassId>> = (0..cfg.orders)
                    .map(|_| {
                        let mut o = pool.classes.clone();
                        o.shuffle(&mut rng);
                        o
                    })
                    .collect();
                let per_row = cfg.exec.map(rows, |&t| -> Result<(f64, f64)> {
                    let out = PairOutcomes::new(pool, &features[t])?;
                    let (mut hit, mut dec) = (0usize, 0usize);
                    for o in &orders {
                        let (c, d) = if method == Strategy::Ddag { out.ddag(o)? } else { out.adag(o)? };
                        hit += usize::from(c == labels[t]);
                        dec += d;
                    }
                    Ok((hit as f64 / orders.len() as f64, dec as f64 / orders.len() as f64))
                });
                per_row
                    .into_iter()
                    .try_fold((0.0, 0.0), |acc, r| r.map(|(h, d)| (acc.0 + h, acc.1 + d)))?
            }
            _ => {
                let per_row = cfg.exec.map(rows, |&t| model.predict(&features[t]));
                let mut hit = 0.0;
                let mut dec = 0.0;
                for (p, &t) in per_row.into_iter().zip(rows) {
                    let p = p?;
                    hit += f64::from(u8::from(p.class == labels[t]));
                    dec += p.decisions as f64;
                }
                (hit, dec)
            }
        };
        acc_sum += correct / n;
        dec_sum += decisions / n;
    }
    let runs = models.len() as f64;
    Ok((acc_sum / runs, dec_sum / runs))
}

/// Picks `(gamma, C)` for `method` by cross-validation over the grid on
/// an already scaled dataset, as done inside each outer fold.
pub fn select_hyperparameters(ds: &Dataset, dataset: &str, method: Strategy, cfg: &CvConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    select_params(ds, method, cfg, &[name_hash(dataset), name_hash(method.name()), u64::MAX])
}

/// Inner cross-validation over the grid; the first point (in smaller-C,
/// smaller-gamma order) reaching the best mean inner accuracy wins.
fn select_params(train: &Dataset, method: Strategy, cfg: &CvConfig, path: &[u64]) -> Result<(f64, f64)> {
    let points = cfg.grid.points();
    if points.len() == 1 {
        return Ok(points[0]);
    }
    let k = cfg.inner_folds.min(train.len());
    let mut p = path.to_vec();
    p.truncate(1);
    p.extend([path[2], TAG_INNER]);
    // inner folds depend on (dataset, outer fold) only, shared by methods
    let plan = train.make_folds(k, derive(cfg.seed, &p))?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k).map(|f| plan.split(f)).collect();

    let mut gammas: Vec<f64> = points.iter().map(|p| p.0).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut scores: Vec<((f64, f64), f64)> = Vec::with_capacity(points.len());
    for &g in &gammas {
        let kernel = KernelSpec::rbf(g)?;
        let gram = (train.len() <= FULL_GRAM_LIMIT).then(|| GramMatrix::compute(&train.features, kernel, cfg.exec));
        let at_gamma: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 == g).collect();
        let results = cfg.exec.map(&at_gamma, |&(g, c)| -> Result<f64> {
            let tcfg = TrainConfig {
                c_reg: c,
                kernel: KernelSpec::rbf(g)?,
                tolerance: cfg.tolerance,
                ..TrainConfig::default()
            };
            let mut total = 0.0;
            for (fi, (tr, te)) in splits.iter().enumerate() {
                let mut ip = path.to_vec();
                ip.extend([TAG_INNER, fi as u64]);
                let ctx = TrainingContext::from_parts(&train.features, &train.labels, tr, tcfg, gram.as_ref(), cfg.exec)?;
                if ctx.classes().len() < 2 {
                    continue;
                }
                let mut inner = cfg.clone();
                inner.bts_runs = 1;
                let models = fit_runs(&ctx, method, &inner, &ip)?;
                total += score_runs(&models, &train.features, &train.labels, te, method, &inner, &ip)?.0;
            }
            Ok(total / splits.len() as f64)
        });
        for (pt, r) in at_gamma.into_iter().zip(results) {
            scores.push((pt, r?));
        }
    }
    // restore tie-break order
    scores.sort_by_key(|(pt, _)| points.iter().position(|q| q == pt));
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(best.0)
}
