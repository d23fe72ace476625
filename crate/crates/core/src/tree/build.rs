//! Top-down tree construction.
//!
//! All builders share one node procedure: rank initial pairwise classifiers
//! over the node's candidate classes, group classes by majority under the
//! best-ranked one, train the final node classifier on the two groups, and
//! recurse on each group. They differ only in how the initial classifiers
//! are ranked (entropy, a generalization bound over a shortlist, a seeded
//! shuffle, centroid distances).
//!
//! Initial classifiers come from one pool of pairwise models trained on all
//! training data; at deeper nodes they are scored on the examples of the
//! node's candidate classes only. Final classifiers are trained per node.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grouping::assign_sides;
use super::{InternalNode, TreeNode};
use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{entropy, generalization_error_bound, GenErrorParams, SplitCounts};
use crate::svm::{IndexedModel, TrainConfig, TrainingContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeKind {
    /// Minimum-entropy initial classifier.
    IbDtree,
    /// Shortlist the `frac` lowest-entropy pairs, keep the grouped classifier
    /// with the smallest generalization bound.
    IbgeDtree { frac: f64, params: GenErrorParams },
    /// Uniformly random initial classifier.
    BtsG { seed: u64 },
    /// Pair of classes whose centroids lie nearest the overall centroid.
    CbtsG,
}

impl TreeKind {
    pub fn ibge(frac: f64) -> Self {
        TreeKind::IbgeDtree {
            frac,
            params: GenErrorParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let TreeKind::IbgeDtree { frac, params } = self {
            if !(*frac > 0.0 && *frac <= 1.0) {
                return Err(Error::InvalidArgument(format!("frac must lie in (0, 1], got {frac}")));
            }
            params.validate()?;
        }
        Ok(())
    }
}

/// Shortlist size: `max(1, round_half_up(frac * k (k - 1) / 2))`.
pub fn n_candidates(num_classes: usize, frac: f64) -> usize {
    let pairs = (num_classes * num_classes.saturating_sub(1) / 2) as f64;
    ((frac * pairs + 0.5).floor() as usize).max(1)
}

pub fn build_ib_dtree(ds: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<TreeNode> {
    build_tree(ds, cfg, TreeKind::IbDtree, exec)
}

pub fn build_ibge_dtree(ds: &Dataset, cfg: &TrainConfig, frac: f64, exec: Exec) -> Result<TreeNode> {
    build_tree(ds, cfg, TreeKind::ibge(frac), exec)
}

pub fn build_bts_g(ds: &Dataset, cfg: &TrainConfig, seed: u64, exec: Exec) -> Result<TreeNode> {
    build_tree(ds, cfg, TreeKind::BtsG { seed }, exec)
}

pub fn build_cbts_g(ds: &Dataset, cfg: &TrainConfig, exec: Exec) -> Result<TreeNode> {
    build_tree(ds, cfg, TreeKind::CbtsG, exec)
}

pub fn build_tree(ds: &Dataset, cfg: &TrainConfig, kind: TreeKind, exec: Exec) -> Result<TreeNode> {
    let ctx = TrainingContext::new(ds, *cfg, exec)?;
    build_tree_in(&ctx, kind)
}

/// Builds over the examples of a prepared [`TrainingContext`].
pub fn build_tree_in(ctx: &TrainingContext<'_>, kind: TreeKind) -> Result<TreeNode> {
    kind.validate()?;
    let classes = ctx.classes();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "tree needs at least two classes, got {}",
            classes.len()
        )));
    }
    let mut builder = Builder {
        ctx,
        kind,
        pool: BTreeMap::new(),
        rng: ChaCha8Rng::seed_from_u64(match kind {
            TreeKind::BtsG { seed } => seed,
            _ => 0,
        }),
    };
    if matches!(kind, TreeKind::IbDtree | TreeKind::IbgeDtree { .. }) {
        builder.ensure_pairs(&all_pairs(&classes))?;
    }
    builder.node(classes)
}

fn all_pairs(classes: &[ClassId]) -> Vec<(ClassId, ClassId)> {
    let mut out = Vec::with_capacity(classes.len() * classes.len().saturating_sub(1) / 2);
    for (a, &i) in classes.iter().enumerate() {
        for &j in &classes[a + 1..] {
            out.push((i, j));
        }
    }
    out
}

/// Side of each base example under a pooled pairwise classifier (positive =
/// lower class id).
struct PairEntry {
    sides: Vec<bool>,
}

struct Candidate {
    pos: Vec<ClassId>,
    neg: Vec<ClassId>,
    model: IndexedModel,
}

struct Builder<'c, 'a> {
    ctx: &'c TrainingContext<'a>,
    kind: TreeKind,
    pool: BTreeMap<(ClassId, ClassId), PairEntry>,
    rng: ChaCha8Rng,
}

impl Builder<'_, '_> {
    fn ensure_pairs(&mut self, pairs: &[(ClassId, ClassId)]) -> Result<()> {
        let missing: Vec<_> = pairs.iter().copied().filter(|p| !self.pool.contains_key(p)).collect();
        let ctx = self.ctx;
        let n = ctx.features.len();
        let trained = ctx.exec.map(&missing, |&(i, j)| -> Result<PairEntry> {
            let m = ctx.train(ctx.examples_of(i), ctx.examples_of(j))?;
            let mut sides = vec![false; n];
            for idx in ctx.by_class.values() {
                for &t in idx {
                    sides[t] = ctx.decision_at(&m, t) >= 0.0;
                }
            }
            Ok(PairEntry { sides })
        });
        for (p, e) in missing.into_iter().zip(trained) {
            self.pool.insert(p, e?);
        }
        Ok(())
    }

    fn counts(&self, pair: (ClassId, ClassId), classes: &[ClassId]) -> SplitCounts {
        let sides = &self.pool[&pair].sides;
        let mut pos = Vec::with_capacity(classes.len());
        let mut neg = Vec::with_capacity(classes.len());
        for &c in classes {
            let ex = self.ctx.examples_of(c);
            let p = ex.iter().filter(|&&t| sides[t]).count();
            pos.push(p);
            neg.push(ex.len() - p);
        }
        SplitCounts {
            classes: classes.to_vec(),
            pos,
            neg,
        }
    }

    fn node(&mut self, classes: Vec<ClassId>) -> Result<TreeNode> {
        if classes.len() == 1 {
            return Ok(TreeNode::Leaf(classes[0]));
        }
        let chosen = self.choose(&classes)?;
        let left = self.node(chosen.pos.clone())?;
        let right = self.node(chosen.neg.clone())?;
        Ok(TreeNode::Internal(Box::new(InternalNode {
            classifier: chosen.model.model,
            pos_classes: chosen.pos,
            neg_classes: chosen.neg,
            left,
            right,
        })))
    }

    /// Initial pairs in preference order.
    fn rank(&mut self, classes: &[ClassId]) -> Result<Vec<(ClassId, ClassId)>> {
        let pairs = all_pairs(classes);
        match self.kind {
            TreeKind::IbDtree | TreeKind::IbgeDtree { .. } => {
                let scores = self.ctx.exec.map(&pairs, |&p| entropy(&self.counts(p, classes)));
                let mut scored = pairs
                    .into_iter()
                    .zip(scores)
                    .map(|(p, e)| e.map(|e| (e, p)))
                    .collect::<Result<Vec<_>>>()?;
                // stable: equal entropies keep lexicographic pair order
                scored.sort_by(|a, b| a.0.total_cmp(&b.0));
                Ok(scored.into_iter().map(|(_, p)| p).collect())
            }
            TreeKind::BtsG { .. } => {
                let mut pairs = pairs;
                pairs.shuffle(&mut self.rng);
                Ok(pairs)
            }
            TreeKind::CbtsG => Ok(self.centroid_ranking(classes)),
        }
    }

    /// Classes ordered by distance of their centroid to the centroid of all
    /// candidate examples (ties by id); pairs ranked by the farther member's
    /// position, then the nearer's.
    fn centroid_ranking(&self, classes: &[ClassId]) -> Vec<(ClassId, ClassId)> {
        let d = self.ctx.features[self.ctx.examples_of(classes[0])[0]].len();
        let mut total = vec![0.0; d];
        let mut count = 0usize;
        let mut dist = Vec::with_capacity(classes.len());
        let mut centroids = Vec::with_capacity(classes.len());
        for &c in classes {
            let mut cen = vec![0.0; d];
            let ex = self.ctx.examples_of(c);
            for &t in ex {
                for (s, v) in cen.iter_mut().zip(&self.ctx.features[t]) {
                    *s += v;
                }
            }
            for (tot, s) in total.iter_mut().zip(&cen) {
                *tot += s;
            }
            count += ex.len();
            cen.iter_mut().for_each(|s| *s /= ex.len() as f64);
            centroids.push(cen);
        }
        total.iter_mut().for_each(|s| *s /= count as f64);
        for (k, &c) in classes.iter().enumerate() {
            let d2: f64 = centroids[k].iter().zip(&total).map(|(a, b)| (a - b) * (a - b)).sum();
            dist.push((d2.sqrt(), c));
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let order: Vec<ClassId> = dist.into_iter().map(|(_, c)| c).collect();
        let mut pairs = Vec::new();
        for hi in 1..order.len() {
            for lo in 0..hi {
                let (a, b) = (order[lo], order[hi]);
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs
    }

    fn grouped(&self, pair: (ClassId, ClassId), classes: &[ClassId]) -> (Vec<ClassId>, Vec<ClassId>) {
        assign_sides(&self.counts(pair, classes), pair)
    }

    /// Whether the final classifier sends at least one candidate example to
    /// each side; otherwise one subtree would be unreachable.
    fn separates(&self, m: &IndexedModel, classes: &[ClassId]) -> bool {
        let (mut p, mut n) = (false, false);
        for &c in classes {
            for &t in self.ctx.examples_of(c) {
                if self.ctx.decision_at(m, t) >= 0.0 {
                    p = true;
                } else {
                    n = true;
                }
                if p && n {
                    return true;
                }
            }
        }
        false
    }

    fn train_grouping(&self, pos: &[ClassId], neg: &[ClassId], classes: &[ClassId]) -> Result<IndexedModel> {
        self.ctx.train_classes(pos, neg).map_err(|e| Error::BuildFailure {
            classes: classes.to_vec(),
            msg: e.to_string(),
        })
    }

    fn choose(&mut self, classes: &[ClassId]) -> Result<Candidate> {
        let ranked = self.rank(classes)?;
        let mut start = 0;
        if let TreeKind::IbgeDtree { frac, params } = self.kind {
            let n = n_candidates(classes.len(), frac).min(ranked.len());
            if let Some(c) = self.best_by_bound(&ranked[..n], classes, &params)? {
                return Ok(c);
            }
            start = n;
        }
        // first candidate whose final classifier separates; else the first
        let mut fallback = None;
        for &pair in &ranked[start..] {
            self.ensure_pairs(&[pair])?;
            let (pos, neg) = self.grouped(pair, classes);
            let model = self.train_grouping(&pos, &neg, classes)?;
            if self.separates(&model, classes) {
                return Ok(Candidate { pos, neg, model });
            }
            fallback.get_or_insert(Candidate { pos, neg, model });
        }
        if fallback.is_none() {
            if let Some(&pair) = ranked.first() {
                let (pos, neg) = self.grouped(pair, classes);
                let model = self.train_grouping(&pos, &neg, classes)?;
                fallback = Some(Candidate { pos, neg, model });
            }
        }
        match fallback {
            Some(c) => Ok(c),
            None => Err(Error::BuildFailure {
                classes: classes.to_vec(),
                msg: "no candidate classifier".into(),
            }),
        }
    }

    /// Trains the grouped classifier for each distinct grouping induced by
    /// `shortlist` and returns the one with the smallest bound (earliest in
    /// rank order on ties). `None` if none of them separates.
    fn best_by_bound(
        &mut self,
        shortlist: &[(ClassId, ClassId)],
        classes: &[ClassId],
        params: &GenErrorParams,
    ) -> Result<Option<Candidate>> {
        let mut groupings: Vec<(Vec<ClassId>, Vec<ClassId>)> = Vec::new();
        for &pair in shortlist {
            let g = self.grouped(pair, classes);
            if !groupings.contains(&g) {
                groupings.push(g);
            }
        }
        let this = &*self;
        let scored = this.ctx.exec.map(&groupings, |(pos, neg)| -> Result<Option<(f64, IndexedModel)>> {
            let model = this.train_grouping(pos, neg, classes)?;
            if !this.separates(&model, classes) {
                return Ok(None);
            }
            let bound = generalization_error_bound(&model.model.stats, params)?;
            Ok(Some((bound, model)))
        });
        let mut best: Option<(f64, Candidate)> = None;
        for ((pos, neg), s) in groupings.into_iter().zip(scored) {
            if let Some((bound, model)) = s? {
                if best.as_ref().is_none_or(|(b, _)| bound < *b) {
                    best = Some((bound, Candidate { pos, neg, model }));
                }
            }
        }
        Ok(best.map(|(_, c)| c))
    }
}
