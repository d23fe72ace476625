//! Flat reductions: one-versus-one with Max-Wins voting, one-versus-all,
//! DDAG and ADAG.

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::svm::{BinaryModel, TrainConfig, TrainingContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassifier {
    pub pos_class: ClassId,
    pub neg_class: ClassId,
    pub model: BinaryModel,
}

/// One classifier per class pair `(i, j)`, `i < j`, positive side `i`,
/// stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoPool {
    pub classes: Vec<ClassId>,
    pub classifiers: Vec<PairClassifier>,
}

impl OvoPool {
    pub fn train(ds: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<Self> {
        Self::train_in(&TrainingContext::new(ds, *cfg, exec)?)
    }

    pub fn train_in(ctx: &TrainingContext<'_>) -> Result<Self> {
        let classes = ctx.classes();
        if classes.len() < 2 {
            return Err(Error::InvalidArgument("OVO needs at least two classes".into()));
        }
        let mut pairs = Vec::new();
        for (a, &i) in classes.iter().enumerate() {
            for &j in &classes[a + 1..] {
                pairs.push((i, j));
            }
        }
        let classifiers = ctx
            .exec
            .map(&pairs, |&(i, j)| {
                ctx.train(ctx.examples_of(i), ctx.examples_of(j))
                    .map(|m| PairClassifier {
                        pos_class: i,
                        neg_class: j,
                        model: m.model,
                    })
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes, classifiers })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, i: ClassId, j: ClassId) -> Option<&BinaryModel> {
        let (a, b) = (i.min(j), i.max(j));
        let pa = self.classes.binary_search(&a).ok()?;
        let pb = self.classes.binary_search(&b).ok()?;
        if pa == pb {
            return None;
        }
        // lexicographic index of (pa, pb)
        let n = self.classes.len();
        let k = pa * (2 * n - pa - 1) / 2 + (pb - pa - 1);
        self.classifiers.get(k).map(|c| &c.model)
    }

    /// Winner of the `(i, j)` match on `x`.
    pub fn winner(&self, i: ClassId, j: ClassId, x: &[f64]) -> Result<ClassId> {
        let (a, b) = (i.min(j), i.max(j));
        let h = self
            .get(a, b)
            .ok_or_else(|| Error::InvalidArgument(format!("no classifier for pair ({a}, {b})")))?;
        Ok(if h.decision(x)? >= 0.0 { a } else { b })
    }
}

/// One classifier per class, positive = that class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaPool {
    pub classes: Vec<ClassId>,
    pub classifiers: Vec<BinaryModel>,
}

impl OvaPool {
    pub fn train(ds: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<Self> {
        Self::train_in(&TrainingContext::new(ds, *cfg, exec)?)
    }

    pub fn train_in(ctx: &TrainingContext<'_>) -> Result<Self> {
        let classes = ctx.classes();
        if classes.len() < 2 {
            return Err(Error::InvalidArgument("OVA needs at least two classes".into()));
        }
        let classifiers = ctx
            .exec
            .map(&classes, |&c| {
                let rest: Vec<ClassId> = classes.iter().copied().filter(|&o| o != c).collect();
                ctx.train_classes(&[c], &rest).map(|m| m.model)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { classes, classifiers })
    }
}

/// Max-Wins voting over all pairs; vote ties go to the lowest class id.
pub fn classify_ovo_maxwins(pool: &OvoPool, x: &[f64]) -> Result<(ClassId, usize)> {
    let mut votes = vec![0usize; pool.classes.len()];
    let pos_of = |c: ClassId| pool.classes.binary_search(&c).expect("pool class");
    for pc in &pool.classifiers {
        let w = if pc.model.decision(x)? >= 0.0 {
            pc.pos_class
        } else {
            pc.neg_class
        };
        votes[pos_of(w)] += 1;
    }
    let mut best = 0;
    for (k, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = k;
        }
    }
    Ok((pool.classes[best], pool.classifiers.len()))
}

/// Highest decision value wins; ties go to the lowest class id.
pub fn classify_ova(pool: &OvaPool, x: &[f64]) -> Result<(ClassId, usize)> {
    let mut best = (f64::NEG_INFINITY, pool.classes[0]);
    for (&c, h) in pool.classes.iter().zip(&pool.classifiers) {
        let v = h.decision(x)?;
        if v > best.0 {
            best = (v, c);
        }
    }
    Ok((best.1, pool.classifiers.len()))
}

fn check_order(pool: &OvoPool, order: &[ClassId]) -> Result<()> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != pool.classes {
        return Err(Error::InvalidArgument(format!(
            "order {order:?} is not a permutation of {:?}",
            pool.classes
        )));
    }
    Ok(())
}

/// Candidate list elimination: test the first against the last class and
/// drop the loser until one class remains.
pub fn ddag_with<F>(order: &[ClassId], mut beats: F) -> Result<(ClassId, usize)>
where
    F: FnMut(ClassId, ClassId) -> Result<ClassId>,
{
    let mut list: std::collections::VecDeque<ClassId> = order.iter().copied().collect();
    let mut decisions = 0;
    while list.len() > 1 {
        let (a, b) = (list[0], list[list.len() - 1]);
        decisions += 1;
        if beats(a, b)? == a {
            list.pop_back();
        } else {
            list.pop_front();
        }
    }
    list.front()
        .map(|&c| (c, decisions))
        .ok_or_else(|| Error::InvalidArgument("empty class order".into()))
}

/// Single-elimination rounds pairing neighbours; with an odd count the last
/// class gets a bye into the next round.
pub fn adag_with<F>(order: &[ClassId], mut beats: F) -> Result<(ClassId, usize)>
where
    F: FnMut(ClassId, ClassId) -> Result<ClassId>,
{
    let mut round: Vec<ClassId> = order.to_vec();
    let mut decisions = 0;
    while round.len() > 1 {
        let mut next = Vec::with_capacity(round.len().div_ceil(2));
        for pair in round.chunks(2) {
            match *pair {
                [a, b] => {
                    decisions += 1;
                    next.push(beats(a, b)?);
                }
                [a] => next.push(a),
                _ => unreachable!(),
            }
        }
        round = next;
    }
    round
        .first()
        .map(|&c| (c, decisions))
        .ok_or_else(|| Error::InvalidArgument("empty class order".into()))
}

pub fn classify_ddag(pool: &OvoPool, order: &[ClassId], x: &[f64]) -> Result<(ClassId, usize)> {
    check_order(pool, order)?;
    ddag_with(order, |a, b| pool.winner(a, b, x))
}

pub fn classify_adag(pool: &OvoPool, order: &[ClassId], x: &[f64]) -> Result<(ClassId, usize)> {
    check_order(pool, order)?;
    adag_with(order, |a, b| pool.winner(a, b, x))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::svm::ModelStats;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    pub(crate) fn constant(bias: f64) -> BinaryModel {
        BinaryModel {
            support_vectors: vec![],
            dual_coefs: vec![],
            bias,
            kernel: KernelSpec::Linear,
            c_reg: 1.0,
            tolerance: 1e-3,
            converged: true,
            iterations: 0,
            stats: ModelStats {
                m: 1,
                l: 0,
                margin_delta: 1.0,
                radius: 0.0,
                dual_objective: 0.0,
                degenerate: false,
            },
        }
    }

    /// Pool in which `i` beats `j` iff `rank(i) > rank(j)`.
    pub(crate) fn ordered_pool(rank: &[usize]) -> OvoPool {
        let n = rank.len();
        let classes: Vec<ClassId> = (1..=n).collect();
        let mut classifiers = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                let b = if rank[i - 1] > rank[j - 1] { 1.0 } else { -1.0 };
                classifiers.push(PairClassifier {
                    pos_class: i,
                    neg_class: j,
                    model: constant(b),
                });
            }
        }
        OvoPool { classes, classifiers }
    }

    #[test]
    fn pair_lookup() {
        let pool = ordered_pool(&[0, 1, 2, 3, 4]);
        for i in 1..=5 {
            for j in 1..=5 {
                if i != j {
                    let c = &pool.classifiers[pool
                        .classifiers
                        .iter()
                        .position(|c| c.pos_class == i.min(j) && c.neg_class == i.max(j))
                        .unwrap()];
                    assert_eq!(pool.get(i, j), Some(&c.model));
                }
            }
        }
        assert!(pool.get(2, 2).is_none());
        assert!(pool.get(2, 9).is_none());
    }

    #[test]
    fn decision_counts() {
        for n in [2usize, 3, 7, 26] {
            let pool = ordered_pool(&(0..n).collect::<Vec<_>>());
            let order: Vec<ClassId> = (1..=n).collect();
            assert_eq!(classify_ovo_maxwins(&pool, &[0.0]).unwrap().1, n * (n - 1) / 2);
            assert_eq!(classify_ddag(&pool, &order, &[0.0]).unwrap().1, n - 1);
            assert_eq!(classify_adag(&pool, &order, &[0.0]).unwrap().1, n - 1);
        }
    }

    #[test]
    fn cyclic_three_way_tie_goes_to_class_one() {
        // 1 beats 2, 2 beats 3, 3 beats 1
        let pool = OvoPool {
            classes: vec![1, 2, 3],
            classifiers: vec![
                PairClassifier { pos_class: 1, neg_class: 2, model: constant(1.0) },
                PairClassifier { pos_class: 1, neg_class: 3, model: constant(-1.0) },
                PairClassifier { pos_class: 2, neg_class: 3, model: constant(1.0) },
            ],
        };
        let mut votes = [0; 3];
        for pc in &pool.classifiers {
            let w = if pc.model.bias >= 0.0 { pc.pos_class } else { pc.neg_class };
            votes[w - 1] += 1;
        }
        assert_eq!(votes, [1, 1, 1]);
        assert_eq!(classify_ovo_maxwins(&pool, &[0.0]).unwrap(), (1, 3));
    }

    #[test]
    fn ova_argmax_and_ties() {
        let pool = OvaPool {
            classes: vec![1, 2, 3, 4, 5],
            classifiers: vec![constant(-1.0), constant(-1.0), constant(10.0), constant(-1.0), constant(-1.0)],
        };
        assert_eq!(classify_ova(&pool, &[0.0]).unwrap(), (3, 5));
        let tie = OvaPool {
            classes: vec![1, 2, 3],
            classifiers: vec![constant(-1.0), constant(2.0), constant(2.0)],
        };
        assert_eq!(classify_ova(&tie, &[0.0]).unwrap().0, 2);
    }

    #[test]
    fn adag_bracket_shape() {
        let mut played = Vec::new();
        let (_, d) = adag_with(&[1, 2, 3, 4], |a, b| {
            played.push((a, b));
            Ok(a.min(b))
        })
        .unwrap();
        assert_eq!(d, 3);
        assert_eq!(played, vec![(1, 2), (3, 4), (1, 3)]);

        played.clear();
        let (_, d) = adag_with(&[1, 2, 3, 4, 5, 6, 7], |a, b| {
            played.push((a, b));
            Ok(a.max(b))
        })
        .unwrap();
        assert_eq!(d, 6);
        assert_eq!(played[..3], [(1, 2), (3, 4), (5, 6)]);
        // 7 had the bye
        assert_eq!(played[3..], [(2, 4), (6, 7), (4, 7)]);
    }

    #[test]
    fn total_order_pools_agree_on_every_permutation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in 2..=6 {
            let mut rank: Vec<usize> = (0..n).collect();
            rank.shuffle(&mut rng);
            let pool = ordered_pool(&rank);
            let top = 1 + rank.iter().position(|&r| r == n - 1).unwrap();
            assert_eq!(classify_ovo_maxwins(&pool, &[0.0]).unwrap().0, top);
            let mut order: Vec<ClassId> = (1..=n).collect();
            // all permutations by Heap's algorithm
            let mut c = vec![0usize; n];
            let check = |o: &[ClassId]| {
                assert_eq!(classify_ddag(&pool, o, &[0.0]).unwrap().0, top);
                assert_eq!(classify_adag(&pool, o, &[0.0]).unwrap().0, top);
            };
            check(&order);
            let mut i = 0;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 { order.swap(0, i) } else { order.swap(c[i], i) }
                    check(&order);
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
        }
    }

    #[test]
    fn bad_order_rejected() {
        let pool = ordered_pool(&[0, 1, 2]);
        assert!(classify_ddag(&pool, &[1, 2], &[0.0]).is_err());
        assert!(classify_adag(&pool, &[1, 1, 2], &[0.0]).is_err());
    }
}
