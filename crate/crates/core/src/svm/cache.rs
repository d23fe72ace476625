//! Kernel row providers for the SMO solver.
//!
//! Problems with at most [`FULL_GRAM_LIMIT`] points get the whole Gram matrix
//! up front; larger ones use an LRU row cache. A [`GramMatrix`] computed once
//! over a dataset can also be shared by every binary sub-problem drawn from
//! it (pairwise pools, tree nodes, grid points with the same gamma).

use std::collections::HashMap;

use crate::exec::Exec;
use crate::kernel::KernelSpec;

pub const FULL_GRAM_LIMIT: usize = 4000;

/// Row budget of the LRU cache, in f64 entries (~256 MiB).
const LRU_BUDGET: usize = 32 << 20;

/// Dense symmetric kernel matrix over a point set.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    n: usize,
    kernel: KernelSpec,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn compute(points: &[Vec<f64>], kernel: KernelSpec, exec: Exec) -> Self {
        let n = points.len();
        let rows = exec.map_range(n, |i| {
            (0..n)
                .map(|j| kernel.eval(&points[i], &points[j]))
                .collect::<Vec<f64>>()
        });
        Self {
            n,
            kernel,
            data: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub(crate) enum KernelRows<'a> {
    Full {
        m: usize,
        data: Vec<f64>,
    },
    Shared {
        gram: &'a GramMatrix,
        idx: &'a [usize],
        bi: Vec<f64>,
        bj: Vec<f64>,
    },
    Lru {
        points: &'a [&'a [f64]],
        kernel: KernelSpec,
        capacity: usize,
        rows: HashMap<usize, (Vec<f64>, u64)>,
        tick: u64,
    },
}

impl<'a> KernelRows<'a> {
    pub fn for_points(points: &'a [&'a [f64]], kernel: KernelSpec) -> Self {
        let m = points.len();
        if m <= FULL_GRAM_LIMIT {
            let mut data = vec![0.0; m * m];
            for i in 0..m {
                for j in i..m {
                    let v = kernel.eval(points[i], points[j]);
                    data[i * m + j] = v;
                    data[j * m + i] = v;
                }
            }
            KernelRows::Full { m, data }
        } else {
            KernelRows::Lru {
                points,
                kernel,
                capacity: (LRU_BUDGET / m).max(2),
                rows: HashMap::new(),
                tick: 0,
            }
        }
    }

    pub fn shared(gram: &'a GramMatrix, idx: &'a [usize]) -> Self {
        KernelRows::Shared {
            gram,
            idx,
            bi: Vec::with_capacity(idx.len()),
            bj: Vec::with_capacity(idx.len()),
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            KernelRows::Full { m, data } => data[i * m + j],
            KernelRows::Shared { gram, idx, .. } => gram.get(idx[i], idx[j]),
            KernelRows::Lru { points, kernel, .. } => kernel.eval(points[i], points[j]),
        }
    }

    /// Rows `i` and `j` of the kernel matrix restricted to the problem.
    pub fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        match self {
            KernelRows::Full { m, data } => {
                let m = *m;
                (&data[i * m..(i + 1) * m], &data[j * m..(j + 1) * m])
            }
            KernelRows::Shared { gram, idx, bi, bj } => {
                let (ri, rj) = (gram.row(idx[i]), gram.row(idx[j]));
                bi.clear();
                bj.clear();
                bi.extend(idx.iter().map(|&k| ri[k]));
                bj.extend(idx.iter().map(|&k| rj[k]));
                (bi.as_slice(), bj.as_slice())
            }
            KernelRows::Lru {
                points,
                kernel,
                capacity,
                rows,
                tick,
            } => {
                for r in [i, j] {
                    *tick += 1;
                    if let Some(e) = rows.get_mut(&r) {
                        e.1 = *tick;
                        continue;
                    }
                    if rows.len() >= *capacity {
                        let keep = if r == j { i } else { usize::MAX };
                        let victim = rows
                            .iter()
                            .filter(|(&k, _)| k != keep)
                            .min_by_key(|(_, v)| v.1)
                            .map(|(&k, _)| k);
                        if let Some(v) = victim {
                            rows.remove(&v);
                        }
                    }
                    let row = points.iter().map(|p| kernel.eval(points[r], p)).collect();
                    rows.insert(r, (row, *tick));
                }
                (rows[&i].0.as_slice(), rows[&j].0.as_slice())
            }
        }
    }
}
