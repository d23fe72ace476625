//! The eight strategies behind one model type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    adag_with, classify_adag, classify_ddag, classify_ova, classify_ovo_maxwins, ddag_with, OvaPool,
    OvoPool,
};
use crate::dataset::{ClassId, Dataset, Normalization};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::GenErrorParams;
use crate::svm::{TrainConfig, TrainingContext};
use crate::tree::{build_tree_in, TreeKind, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Ovo,
    Ova,
    Ddag,
    Adag,
    BtsG,
    CbtsG,
    IbDtree,
    IbgeDtree,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Ovo,
        Strategy::Ova,
        Strategy::Ddag,
        Strategy::Adag,
        Strategy::BtsG,
        Strategy::CbtsG,
        Strategy::IbDtree,
        Strategy::IbgeDtree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ovo => "ovo",
            Strategy::Ova => "ova",
            Strategy::Ddag => "ddag",
            Strategy::Adag => "adag",
            Strategy::BtsG => "bts_g",
            Strategy::CbtsG => "cbts_g",
            Strategy::IbDtree => "ib_dtree",
            Strategy::IbgeDtree => "ibge_dtree",
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(
            self,
            Strategy::BtsG | Strategy::CbtsG | Strategy::IbDtree | Strategy::IbgeDtree
        )
    }

    /// Per-example decision count for the flat reductions.
    pub fn fixed_decisions(self, n: usize) -> Option<usize> {
        match self {
            Strategy::Ovo => Some(n * (n - 1) / 2),
            Strategy::Ova => Some(n),
            Strategy::Ddag | Strategy::Adag => Some(n - 1),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

/// Strategy-specific build options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// IBGE-DTree shortlist fraction.
    pub frac: f64,
    pub bound: GenErrorParams,
    /// BTS-G seed.
    pub seed: u64,
    pub exec: Exec,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            frac: 0.2,
            bound: GenErrorParams::default(),
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ClassId,
    pub decisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum MulticlassModel {
    Ovo { pool: OvoPool },
    Ova { pool: OvaPool },
    Ddag { pool: OvoPool, order: Vec<ClassId> },
    Adag { pool: OvoPool, order: Vec<ClassId> },
    BtsG { root: TreeNode },
    CbtsG { root: TreeNode },
    IbDtree { root: TreeNode },
    IbgeDtree { root: TreeNode },
}

impl MulticlassModel {
    pub fn fit(ds: &Dataset, strategy: Strategy, cfg: &TrainConfig, opts: &FitOptions) -> Result<Self> {
        let ctx = TrainingContext::new(ds, *cfg, opts.exec)?;
        Self::fit_in(&ctx, strategy, opts)
    }

    pub fn fit_in(ctx: &TrainingContext<'_>, strategy: Strategy, opts: &FitOptions) -> Result<Self> {
        let classes = ctx.classes();
        Ok(match strategy {
            Strategy::Ovo => MulticlassModel::Ovo {
                pool: OvoPool::train_in(ctx)?,
            },
            Strategy::Ova => MulticlassModel::Ova {
                pool: OvaPool::train_in(ctx)?,
            },
            Strategy::Ddag => MulticlassModel::Ddag {
                pool: OvoPool::train_in(ctx)?,
                order: classes,
            },
            Strategy::Adag => MulticlassModel::Adag {
                pool: OvoPool::train_in(ctx)?,
                order: classes,
            },
            Strategy::BtsG => MulticlassModel::BtsG {
                root: build_tree_in(ctx, TreeKind::BtsG { seed: opts.seed })?,
            },
            Strategy::CbtsG => MulticlassModel::CbtsG {
                root: build_tree_in(ctx, TreeKind::CbtsG)?,
            },
            Strategy::IbDtree => MulticlassModel::IbDtree {
                root: build_tree_in(ctx, TreeKind::IbDtree)?,
            },
            Strategy::IbgeDtree => MulticlassModel::IbgeDtree {
                root: build_tree_in(
                    ctx,
                    TreeKind::IbgeDtree {
                        frac: opts.frac,
                        params: opts.bound,
                    },
                )?,
            },
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            MulticlassModel::Ovo { .. } => Strategy::Ovo,
            MulticlassModel::Ova { .. } => Strategy::Ova,
            MulticlassModel::Ddag { .. } => Strategy::Ddag,
            MulticlassModel::Adag { .. } => Strategy::Adag,
            MulticlassModel::BtsG { .. } => Strategy::BtsG,
            MulticlassModel::CbtsG { .. } => Strategy::CbtsG,
            MulticlassModel::IbDtree { .. } => Strategy::IbDtree,
            MulticlassModel::IbgeDtree { .. } => Strategy::IbgeDtree,
        }
    }

    pub fn tree(&self) -> Option<&TreeNode> {
        match self {
            MulticlassModel::BtsG { root }
            | MulticlassModel::CbtsG { root }
            | MulticlassModel::IbDtree { root }
            | MulticlassModel::IbgeDtree { root } => Some(root),
            _ => None,
        }
    }

    pub fn ovo_pool(&self) -> Option<&OvoPool> {
        match self {
            MulticlassModel::Ovo { pool }
            | MulticlassModel::Ddag { pool, .. }
            | MulticlassModel::Adag { pool, .. } => Some(pool),
            _ => None,
        }
    }

    pub fn classes(&self) -> Vec<ClassId> {
        match self {
            MulticlassModel::Ova { pool } => pool.classes.clone(),
            _ => match (self.ovo_pool(), self.tree()) {
                (Some(p), _) => p.classes.clone(),
                (_, Some(t)) => {
                    let mut l = t.leaves();
                    l.sort_unstable();
                    l
                }
                _ => unreachable!(),
            },
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (class, decisions) = match self {
            MulticlassModel::Ovo { pool } => classify_ovo_maxwins(pool, x)?,
            MulticlassModel::Ova { pool } => classify_ova(pool, x)?,
            MulticlassModel::Ddag { pool, order } => classify_ddag(pool, order, x)?,
            MulticlassModel::Adag { pool, order } => classify_adag(pool, order, x)?,
            MulticlassModel::BtsG { root }
            | MulticlassModel::CbtsG { root }
            | MulticlassModel::IbDtree { root }
            | MulticlassModel::IbgeDtree { root } => root.classify(x)?,
        };
        Ok(Prediction { class, decisions })
    }

    /// DDAG / ADAG prediction under an explicit class order.
    pub fn predict_with_order(&self, order: &[ClassId], x: &[f64]) -> Result<Prediction> {
        let (class, decisions) = match self {
            MulticlassModel::Ddag { pool, .. } => classify_ddag(pool, order, x)?,
            MulticlassModel::Adag { pool, .. } => classify_adag(pool, order, x)?,
            _ => return self.predict(x),
        };
        Ok(Prediction { class, decisions })
    }
}

/// Winners of every pairwise match for one input, so that many DDAG / ADAG
/// orders can be evaluated without re-running classifiers.
pub struct PairOutcomes {
    classes: Vec<ClassId>,
    winners: Vec<ClassId>,
}

impl PairOutcomes {
    pub fn new(pool: &OvoPool, x: &[f64]) -> Result<Self> {
        let winners = pool
            .classifiers
            .iter()
            .map(|pc| {
                pc.model
                    .decision(x)
                    .map(|v| if v >= 0.0 { pc.pos_class } else { pc.neg_class })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classes: pool.classes.clone(),
            winners,
        })
    }

    fn beats(&self, i: ClassId, j: ClassId) -> Result<ClassId> {
        let pa = self.classes.binary_search(&i.min(j));
        let pb = self.classes.binary_search(&i.max(j));
        match (pa, pb) {
            (Ok(pa), Ok(pb)) if pa != pb => {
                let n = self.classes.len();
                Ok(self.winners[pa * (2 * n - pa - 1) / 2 + (pb - pa - 1)])
            }
            _ => Err(Error::InvalidArgument(format!("no match ({i}, {j})"))),
        }
    }

    pub fn ddag(&self, order: &[ClassId]) -> Result<(ClassId, usize)> {
        ddag_with(order, |a, b| self.beats(a, b))
    }

    pub fn adag(&self, order: &[ClassId]) -> Result<(ClassId, usize)> {
        adag_with(order, |a, b| self.beats(a, b))
    }
}

/// What a model file holds: the model plus what is needed to apply it to
/// raw inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub feature_dim: usize,
    pub class_names: Vec<String>,
    pub normalization: Option<Normalization>,
    pub train_config: TrainConfig,
    pub model: MulticlassModel,
}

impl ModelFile {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("format_version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if version != Self::VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        Ok(serde_json::from_value(v)?)
    }

    /// Normalizes a raw input (if the model was trained on scaled data) and
    /// predicts.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        match &self.normalization {
            Some(n) => self.model.predict(&n.apply(x)?),
            None => self.model.predict(x),
        }
    }

    pub fn class_name(&self, c: ClassId) -> &str {
        &self.class_names[c - 1]
    }
}
