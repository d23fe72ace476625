//! Soft-margin binary SVMs and the margin / radius statistics consumed by
//! the generalization-error bound.

mod cache;
mod indexed;
mod smo;

pub use cache::{GramMatrix, FULL_GRAM_LIMIT};
pub use indexed::{IndexedModel, TrainingContext};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use cache::KernelRows;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c_reg: f64,
    pub kernel: KernelSpec,
    /// Maximal allowed KKT violation at convergence.
    pub tolerance: f64,
    /// Iteration cap, in units of the training-set size.
    pub max_passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c_reg: 1.0,
            kernel: KernelSpec::Rbf { gamma: 1.0 },
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn rbf(gamma: f64, c_reg: f64) -> Self {
        Self {
            c_reg,
            kernel: KernelSpec::Rbf { gamma },
            ..Self::default()
        }
    }

    pub fn linear(c_reg: f64) -> Self {
        Self {
            c_reg,
            kernel: KernelSpec::Linear,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c_reg > 0.0 && self.c_reg.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be > 0, got {}", self.c_reg)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be > 0".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidArgument("max_passes must be > 0".into()));
        }
        Ok(())
    }

    fn max_iter(&self, m: usize) -> usize {
        self.max_passes.saturating_mul(m.max(1))
    }
}

/// Quantities entering the generalization-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    /// Training-set size.
    pub m: usize,
    /// Training points with functional margin below 1 (beyond solver slack).
    pub l: usize,
    /// Geometric margin 1/|w| in feature space; 0 when degenerate.
    pub margin_delta: f64,
    /// Largest feature-space distance from a training point to the centroid.
    pub radius: f64,
    pub dual_objective: f64,
    /// |w| = 0: the bound is taken as infinite.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c_reg: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stats: ModelStats,
}

impl BinaryModel {
    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// `sum_i coef_i K(sv_i, x) + b`; non-negative means the positive side.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(self.decision_unchecked(x))
    }

    #[inline]
    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// `|w|^2 = sum_ij coef_i coef_j K(sv_i, sv_j)`.
    pub fn weight_norm_sq(&self) -> f64 {
        let n = self.support_vectors.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.dual_coefs[j]
                    * self.kernel.eval(&self.support_vectors[i], &self.support_vectors[j]);
            }
            acc += self.dual_coefs[i] * row;
        }
        acc
    }
}

/// Trains on explicit positive / negative example lists.
pub fn train(pos: &[&[f64]], neg: &[&[f64]], cfg: &TrainConfig) -> Result<BinaryModel> {
    cfg.validate()?;
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidArgument(
            "both positive and negative examples are required".into(),
        ));
    }
    let d = pos[0].len();
    let points: Vec<&[f64]> = pos.iter().chain(neg).copied().collect();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let y: Vec<f64> = std::iter::repeat(1.0)
        .take(pos.len())
        .chain(std::iter::repeat(-1.0).take(neg.len()))
        .collect();
    let mut rows = KernelRows::for_points(&points, cfg.kernel);
    Ok(fit(&mut rows, &points, &y, cfg).0)
}

/// Trains on rows of `features` selected by index, reading kernel values
/// from a Gram matrix precomputed over all of `features`. Gives the same
/// model as [`train`] on the gathered examples.
pub fn train_with_gram(
    gram: &GramMatrix,
    features: &[Vec<f64>],
    pos: &[usize],
    neg: &[usize],
    cfg: &TrainConfig,
) -> Result<BinaryModel> {
    cfg.validate()?;
    if gram.kernel() != cfg.kernel || gram.len() != features.len() {
        return Err(Error::InvalidArgument("Gram matrix does not match config".into()));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidArgument(
            "both positive and negative examples are required".into(),
        ));
    }
    let idx: Vec<usize> = pos.iter().chain(neg).copied().collect();
    let points: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
    let y: Vec<f64> = std::iter::repeat(1.0)
        .take(pos.len())
        .chain(std::iter::repeat(-1.0).take(neg.len()))
        .collect();
    let mut rows = KernelRows::shared(gram, &idx);
    Ok(fit(&mut rows, &points, &y, cfg).0)
}

/// Runs the solver and assembles the model; also returns the problem-local
/// indices of the support vectors.
fn fit(
    rows: &mut KernelRows<'_>,
    points: &[&[f64]],
    y: &[f64],
    cfg: &TrainConfig,
) -> (BinaryModel, Vec<usize>) {
    let m = y.len();
    let out = smo::solve(rows, y, cfg.c_reg, cfg.tolerance, cfg.max_iter(m));

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut sv_index = Vec::new();
    for t in 0..m {
        if out.alpha[t] > 0.0 {
            support_vectors.push(points[t].to_vec());
            dual_coefs.push(out.alpha[t] * y[t]);
            sv_index.push(t);
        }
    }

    let mut model = BinaryModel {
        support_vectors,
        dual_coefs,
        bias: out.bias,
        kernel: cfg.kernel,
        c_reg: cfg.c_reg,
        tolerance: cfg.tolerance,
        converged: out.converged,
        iterations: out.iterations,
        stats: ModelStats {
            m,
            l: 0,
            margin_delta: 0.0,
            radius: 0.0,
            dual_objective: out.dual_objective,
            degenerate: true,
        },
    };
    let entry = |i: usize, j: usize| rows.entry(i, j);
    let w2 = weight_norm_sq_from(&sv_index, &model.dual_coefs, entry);
    let margins = (0..m).map(|t| {
        let f = sv_index
            .iter()
            .zip(&model.dual_coefs)
            .map(|(&s, &c)| c * entry(s, t))
            .sum::<f64>()
            + model.bias;
        y[t] * f
    });
    let l = count_margin_violations(margins, cfg.tolerance);
    let radius = centroid_radius(m, entry);
    model.stats = finish_stats(m, l, w2, radius, out.dual_objective);
    (model, sv_index)
}

/// Recomputes [`ModelStats`] from a model and the data it was trained on.
pub fn compute_stats(model: &BinaryModel, pos: &[&[f64]], neg: &[&[f64]]) -> Result<ModelStats> {
    let points: Vec<&[f64]> = pos.iter().chain(neg).copied().collect();
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = points.len();
    let margins = points
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let y = if t < pos.len() { 1.0 } else { -1.0 };
            model.decision(x).map(|f| y * f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let l = count_margin_violations(margins.into_iter(), model.tolerance);
    let radius = centroid_radius(m, |i, j| model.kernel.eval(points[i], points[j]));
    Ok(finish_stats(
        m,
        l,
        model.weight_norm_sq(),
        radius,
        model.stats.dual_objective,
    ))
}

fn weight_norm_sq_from(sv: &[usize], coefs: &[f64], k: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (a, &i) in sv.iter().enumerate() {
        let mut row = 0.0;
        for (b, &j) in sv.iter().enumerate() {
            row += coefs[b] * k(i, j);
        }
        acc += coefs[a] * row;
    }
    acc
}

/// Points on the margin sit at `y f(x) = 1` only up to solver tolerance, so
/// the threshold is `1 - tol`.
fn count_margin_violations(margins: impl Iterator<Item = f64>, tol: f64) -> usize {
    margins.filter(|&yf| yf < 1.0 - tol).count()
}

/// `max_i sqrt(K_ii - 2 mean_j K_ij + mean_jk K_jk)`.
pub(crate) fn centroid_radius(m: usize, k: impl Fn(usize, usize) -> f64) -> f64 {
    let mut row_means = vec![0.0; m];
    let mut diag = vec![0.0; m];
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..m {
            s += k(i, j);
        }
        row_means[i] = s / m as f64;
        diag[i] = k(i, i);
    }
    let grand = row_means.iter().sum::<f64>() / m as f64;
    (0..m)
        .map(|i| (diag[i] - 2.0 * row_means[i] + grand).max(0.0).sqrt())
        .fold(0.0, f64::max)
}

fn finish_stats(m: usize, l: usize, w2: f64, radius: f64, dual_objective: f64) -> ModelStats {
    let degenerate = !(w2 > f64::MIN_POSITIVE);
    ModelStats {
        m,
        l,
        margin_delta: if degenerate { 0.0 } else { 1.0 / w2.sqrt() },
        radius,
        dual_objective,
        degenerate,
    }
}
