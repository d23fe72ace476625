//! Pairwise coordinate ascent (SMO) on the soft-margin SVM dual
//!
//!   max  W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//!   s.t. 0 <= a_i <= C,  sum a_i y_i = 0.
//!
//! Internally we minimise f = -W with gradient G = Q a - e. The first index
//! of the working pair is the maximal KKT violator; the second maximises the
//! second-order decrease among violators. Stops when the maximal violation
//! `m(a) - M(a)` drops below the tolerance.

use super::cache::KernelRows;

const TAU: f64 = 1e-12;

pub(crate) struct SmoOutput {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

#[inline]
fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

fn objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // f = 1/2 a'Qa - e'a = 1/2 sum a_i (G_i - 1); W = -f
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

pub(crate) fn solve(
    kernel: &mut KernelRows<'_>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
) -> SmoOutput {
    let m = y.len();
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let diag: Vec<f64> = (0..m).map(|t| kernel.entry(t, t)).collect();
    let mut iterations = 0;
    let mut converged = false;
    #[cfg(debug_assertions)]
    let mut last_obj: f64 = 0.0;

    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if in_up(alpha[t], y[t], c) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let gmin = (0..m)
            .filter(|&t| in_low(alpha[t], y[t], c))
            .map(|t| -y[t] * grad[t])
            .fold(f64::INFINITY, f64::min);
        if gmax - gmin < tol {
            converged = true;
            break;
        }

        // j: best second-order gain among violators in I_low
        let (ki, _) = kernel.rows(i, i);
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !in_low(alpha[t], y[t], c) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -(b * b) / a;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }

        let (ki, kj) = kernel.rows(i, j);
        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = ki[j];
        if yi != yj {
            let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * yi;
        let dj = (alpha[j] - old_j) * yj;
        for t in 0..m {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
        iterations += 1;

        #[cfg(debug_assertions)]
        {
            let obj = objective(&alpha, &grad);
            debug_assert!(
                obj >= last_obj - 1e-9 * (1.0 + last_obj.abs()),
                "dual objective decreased: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
    }

    let bias = compute_bias(&alpha, &grad, y, c);
    SmoOutput {
        dual_objective: objective(&alpha, &grad),
        alpha,
        bias,
        iterations,
        converged,
    }
}

/// Mean of `-y_t G_t` over free vectors; midpoint of the feasible interval
/// when none are free.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut n_free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += v;
            n_free += 1;
        } else {
            // at a bound, t constrains b from one side only
            let upper = (alpha[t] == 0.0) == (y[t] < 0.0);
            if upper {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        }
    }
    if n_free > 0 {
        sum / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}
