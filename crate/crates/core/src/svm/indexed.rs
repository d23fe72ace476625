//! Training on index subsets of a shared point set.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::cache::{GramMatrix, KernelRows, FULL_GRAM_LIMIT};
use super::{fit, BinaryModel, TrainConfig};
use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// A model together with the base-set indices of its support vectors, so
/// decisions on training points can be read from the Gram matrix.
#[derive(Debug, Clone)]
pub struct IndexedModel {
    pub model: BinaryModel,
    pub sv_index: Vec<usize>,
}

/// Training data for every binary sub-problem of one multi-class build:
/// a base point set, the subset of it in use, and (for sets up to
/// [`FULL_GRAM_LIMIT`] points) its Gram matrix.
pub struct TrainingContext<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [ClassId],
    /// Base indices of the examples in use, grouped by class.
    pub by_class: BTreeMap<ClassId, Vec<usize>>,
    pub cfg: TrainConfig,
    pub exec: Exec,
    gram: Option<Cow<'a, GramMatrix>>,
}

impl<'a> TrainingContext<'a> {
    pub fn new(ds: &'a Dataset, cfg: TrainConfig, exec: Exec) -> Result<Self> {
        let all: Vec<usize> = (0..ds.len()).collect();
        Self::from_parts(&ds.features, &ds.labels, &all, cfg, None, exec)
    }

    /// `gram`, when given, must be computed over all of `features` with
    /// `cfg.kernel`; otherwise one is computed if the base set is small.
    pub fn from_parts(
        features: &'a [Vec<f64>],
        labels: &'a [ClassId],
        subset: &[usize],
        cfg: TrainConfig,
        gram: Option<&'a GramMatrix>,
        exec: Exec,
    ) -> Result<Self> {
        cfg.validate()?;
        if subset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for &i in subset {
            by_class.entry(labels[i]).or_default().push(i);
        }
        let gram = match gram {
            Some(g) => {
                if g.kernel() != cfg.kernel || g.len() != features.len() {
                    return Err(Error::InvalidArgument("Gram matrix does not match".into()));
                }
                Some(Cow::Borrowed(g))
            }
            None if features.len() <= FULL_GRAM_LIMIT => {
                Some(Cow::Owned(GramMatrix::compute(features, cfg.kernel, exec)))
            }
            None => None,
        };
        Ok(Self {
            features,
            labels,
            by_class,
            cfg,
            exec,
            gram,
        })
    }

    pub fn classes(&self) -> Vec<ClassId> {
        self.by_class.keys().copied().collect()
    }

    pub fn examples_of(&self, class: ClassId) -> &[usize] {
        self.by_class.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn gather(&self, classes: &[ClassId]) -> Vec<usize> {
        classes.iter().flat_map(|&c| self.examples_of(c).iter().copied()).collect()
    }

    pub fn train(&self, pos: &[usize], neg: &[usize]) -> Result<IndexedModel> {
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::InvalidArgument(
                "both positive and negative examples are required".into(),
            ));
        }
        let idx: Vec<usize> = pos.iter().chain(neg).copied().collect();
        let points: Vec<&[f64]> = idx.iter().map(|&i| self.features[i].as_slice()).collect();
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        let y: Vec<f64> = std::iter::repeat(1.0)
            .take(pos.len())
            .chain(std::iter::repeat(-1.0).take(neg.len()))
            .collect();
        let (model, local_sv) = match &self.gram {
            Some(g) => fit(&mut KernelRows::shared(g, &idx), &points, &y, &self.cfg),
            None => fit(&mut KernelRows::for_points(&points, self.cfg.kernel), &points, &y, &self.cfg),
        };
        Ok(IndexedModel {
            model,
            sv_index: local_sv.into_iter().map(|t| idx[t]).collect(),
        })
    }

    /// Trains all examples of `pos_classes` against all of `neg_classes`.
    pub fn train_classes(&self, pos_classes: &[ClassId], neg_classes: &[ClassId]) -> Result<IndexedModel> {
        self.train(&self.gather(pos_classes), &self.gather(neg_classes))
    }

    /// Decision value of `m` on base example `t`.
    #[inline]
    pub fn decision_at(&self, m: &IndexedModel, t: usize) -> f64 {
        match &self.gram {
            Some(g) => {
                m.sv_index
                    .iter()
                    .zip(&m.model.dual_coefs)
                    .map(|(&s, &c)| c * g.get(s, t))
                    .sum::<f64>()
                    + m.model.bias
            }
            None => m.model.decision_unchecked(&self.features[t]),
        }
    }
}
