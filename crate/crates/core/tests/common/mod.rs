#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmtree::dataset::CsvOptions;
use svmtree::svm::TrainingContext;
use svmtree::{BinaryModel, Dataset, Exec, KernelSpec, TrainConfig};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn load(name: &str) -> Dataset {
    Dataset::load_csv(data_path(&format!("{name}.csv")), &CsvOptions::default()).unwrap()
}

/// Gaussian noise by Box-Muller, enough for synthetic clusters.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// `k` Gaussian clusters of `per` points in `dim` dimensions, centers drawn
/// uniformly from `[0, spread)^dim`.
pub fn blobs(k: usize, per: usize, dim: usize, spread: f64, sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..spread)).collect())
        .collect();
    let mut features = Vec::with_capacity(k * per);
    let mut labels = Vec::with_capacity(k * per);
    for (c, ctr) in centers.iter().enumerate() {
        for _ in 0..per {
            features.push(ctr.iter().map(|v| v + sd * gauss(&mut rng)).collect());
            labels.push(c + 1);
        }
    }
    Dataset::from_dense(features, labels).unwrap()
}

/// Dual objective `sum(a) - a'Qa / 2` with `Q_ij = y_i y_j K_ij`.
pub fn dual_value(k: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let m = y.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on the
/// equality multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |tau: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - tau * yi).clamp(0.0, c)).collect() };
    let g = |tau: f64| -> f64 { at(tau).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes the soft-margin dual by accelerated projected gradient ascent.
/// Slow but independent of the solver under test.
pub fn qp_dual_oracle(k: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let m = y.len();
    let q: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    // trace bounds the largest eigenvalue of a PSD matrix
    let lip: f64 = (0..m).map(|i| q[i][i]).sum::<f64>().max(1e-12);
    let step = 1.0 / lip;
    let mut a = vec![0.0; m];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = dual_value(k, y, &a);
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..m).map(|i| 1.0 - (0..m).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let next = project(&z.iter().zip(&grad).map(|(zi, gi)| zi + step * gi).collect::<Vec<_>>(), y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let val = dual_value(k, y, &next);
        if val < best {
            // adaptive restart
            z = a.clone();
            t = 1.0;
            continue;
        }
        let mom = (t - 1.0) / t_next;
        z = next.iter().zip(&a).map(|(n, p)| n + mom * (n - p)).collect();
        let gain = val - best;
        a = next;
        best = val;
        t = t_next;
        if gain.abs() < 1e-15 * (1.0 + best.abs()) && t > 50.0 {
            break;
        }
    }
    best
}

/// Points on a small 2-D grid of jitter around `center`.
pub fn cluster(center: (f64, f64), n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let dx = 0.1 * ((i % 3) as f64 - 1.0);
            let dy = 0.1 * ((i / 3 % 3) as f64 - 1.0);
            vec![center.0 + dx, center.1 + dy]
        })
        .collect()
}

/// Three classes: 1 on the left, 2 in the middle, 3 further right, so the
/// 1-vs-2 classifier puts class 3 on class 2's side.
pub fn three_class_chain() -> Vec<(usize, Vec<Vec<f64>>)> {
    vec![
        (1, cluster((-2.0, 0.0), 9)),
        (2, cluster((2.0, 0.0), 9)),
        (3, cluster((5.0, 0.5), 9)),
    ]
}

/// Six classes around a boundary between 2 (right) and 1 (left): 3 and 5
/// lie right of it, 4 and 6 left.
pub fn six_class_ring() -> Vec<(usize, Vec<Vec<f64>>)> {
    vec![
        (1, cluster((-1.5, 0.0), 9)),
        (2, cluster((1.5, 0.0), 9)),
        (3, cluster((3.0, 3.0), 9)),
        (4, cluster((-3.0, 3.0), 9)),
        (5, cluster((3.0, -3.0), 9)),
        (6, cluster((-3.0, -3.0), 9)),
    ]
}

pub fn class_rows(data: &[(usize, Vec<Vec<f64>>)], c: usize) -> Vec<&[f64]> {
    data.iter()
        .filter(|(k, _)| *k == c)
        .flat_map(|(_, xs)| xs.iter().map(Vec::as_slice))
        .collect()
}

/// Two-sided exact signed-rank p-value by enumerating all `2^n` sign
/// assignments of the non-zero differences (ties get averaged ranks).
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n < 5 {
        return None;
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let same = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    Some((2.0 * le.min(ge) as f64 / total).min(1.0))
}

pub struct Problem {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub cfg: TrainConfig,
}

impl Problem {
    pub fn y(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.x.iter().map(|a| self.x.iter().map(|b| self.cfg.kernel.eval(a, b)).collect()).collect()
    }
}

pub fn random_problem(rng: &mut ChaCha8Rng, max_m: usize) -> Problem {
    let m = rng.random_range(4..=max_m);
    let dim = rng.random_range(1..=5);
    let shift = rng.random_range(0.0..3.0);
    let mut x = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label = if i % 2 == 0 { 1 } else { 2 };
        let s = if label == 1 { shift } else { -shift };
        x.push((0..dim).map(|_| s / (dim as f64).sqrt() + gauss(rng)).collect());
        labels.push(label);
    }
    let c_reg = [0.1, 1.0, 10.0, 100.0][rng.random_range(0..4)];
    let kernel = if rng.random_bool(0.7) {
        KernelSpec::rbf([0.1, 0.5, 1.0, 5.0][rng.random_range(0..4)]).unwrap()
    } else {
        KernelSpec::Linear
    };
    Problem {
        x,
        labels,
        cfg: TrainConfig {
            c_reg,
            kernel,
            ..TrainConfig::default()
        },
    }
}

/// Trains and returns every alpha (zero for non-support vectors) and every
/// training decision value.
pub fn solve(p: &Problem) -> (Vec<f64>, Vec<f64>, BinaryModel) {
    let all: Vec<usize> = (0..p.x.len()).collect();
    let ctx = TrainingContext::from_parts(&p.x, &p.labels, &all, p.cfg, None, Exec::Sequential).unwrap();
    let m = ctx.train_classes(&[1], &[2]).unwrap();
    let mut alpha = vec![0.0; p.x.len()];
    for (&t, &coef) in m.sv_index.iter().zip(&m.model.dual_coefs) {
        alpha[t] = coef.abs();
    }
    let f = (0..p.x.len()).map(|t| ctx.decision_at(&m, t)).collect();
    (alpha, f, m.model)
}

pub fn kkt_violation(alpha: &[f64], f: &[f64], y: &[f64], c: f64) -> f64 {
    let eps = 1e-12 * c.max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..y.len() {
        let yf = y[i] * f[i];
        let v = if alpha[i] <= eps {
            (1.0 - yf).max(0.0)
        } else if alpha[i] >= c - eps {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

