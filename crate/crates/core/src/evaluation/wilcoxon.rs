//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped (and reported as draws); tied absolute
//! differences get averaged ranks. With at most [`EXACT_LIMIT`] non-zero
//! differences the two-sided p-value comes from the exact null distribution
//! of the positive rank sum over all sign assignments; above it, from the
//! normal approximation with tie and continuity corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const EXACT_LIMIT: usize = 25;
pub const MIN_NONZERO: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `None` with fewer than [`MIN_NONZERO`] non-zero differences.
    pub p_value: Option<f64>,
    pub win: usize,
    pub lose: usize,
    pub draw: usize,
    /// Sum of ranks of the positive differences `a - b`.
    pub w_plus: f64,
    pub method: WilcoxonMethod,
}

/// Two-sided test of `a` against `b`; "win" means `a > b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, None)
}

/// As [`wilcoxon_signed_rank`] with the exact / normal choice forced.
pub fn wilcoxon_with(a: &[f64], b: &[f64], force: Option<WilcoxonMethod>) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidArgument("NaN in paired samples".into()));
    }
    let win = diffs.iter().filter(|&&d| d > 0.0).count();
    let lose = diffs.iter().filter(|&&d| d < 0.0).count();
    let draw = diffs.len() - win - lose;
    let nonzero: Vec<f64> = diffs.into_iter().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();

    let doubled = doubled_ranks(&nonzero);
    let w2: u64 = nonzero
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();
    let w_plus = w2 as f64 / 2.0;
    let method = force.unwrap_or(if n <= EXACT_LIMIT {
        WilcoxonMethod::Exact
    } else {
        WilcoxonMethod::Normal
    });
    let p_value = if n < MIN_NONZERO {
        None
    } else {
        Some(match method {
            WilcoxonMethod::Exact => exact_p(&doubled, w2),
            WilcoxonMethod::Normal => normal_p(&nonzero, w_plus),
        })
    };
    Ok(WilcoxonResult {
        p_value,
        win,
        lose,
        draw,
        w_plus,
        method,
    })
}

/// Twice the average rank of each |d|, so ties stay integral.
fn doubled_ranks(d: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut s = 0;
    while s < order.len() {
        let mut e = s;
        while e + 1 < order.len() && d[order[e + 1]].abs() == d[order[s]].abs() {
            e += 1;
        }
        // ranks s+1 ..= e+1 averaged, doubled
        let r2 = (s + 1 + e + 1) as u64;
        for &k in &order[s..=e] {
            ranks[k] = r2;
        }
        s = e + 1;
    }
    ranks
}

/// Counts sign assignments by positive doubled-rank sum.
fn exact_p(doubled: &[u64], w2: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(doubled.len() as i32);
    let w2 = w2 as usize;
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(nonzero: &[f64], w_plus: f64) -> f64 {
    let n = nonzero.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut s = 0;
    while s < abs.len() {
        let mut e = s;
        while e + 1 < abs.len() && abs[e + 1] == abs[s] {
            e += 1;
        }
        let t = (e - s + 1) as f64;
        tie_term += t * t * t - t;
        s = e + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::standard();
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}
