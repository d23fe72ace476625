//! Multi-class classification by reduction to binary soft-margin SVMs.
//!
//! The crate provides:
//!
//! * a kernel SMO solver with the margin / radius statistics used to rank
//!   classifiers ([`svm`]),
//! * entropy and generalization-bound scoring of candidate classifiers
//!   ([`metrics`]),
//! * decision-tree builders that group whole classes onto one side of a node
//!   classifier ([`tree`]): IB-DTree, IBGE-DTree, BTS-G and c-BTS-G,
//! * the flat reductions OVO (Max-Wins), OVA, DDAG and ADAG ([`baselines`]),
//! * a stratified cross-validation harness with grid search and Wilcoxon
//!   signed-rank comparison ([`evaluation`]).
//!
//! Data-parallel loops (pairwise pool training, candidate scoring, folds and
//! grid points) run on rayon when the `parallel` feature is enabled. Every
//! parallel loop has a sequential twin selected through [`Exec`], and both
//! produce identical results.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod kernel;
pub mod metrics;
pub mod multiclass;
pub mod seed;
pub mod svm;
pub mod tree;

pub use dataset::{ClassId, Dataset, FoldPlan, Normalization};
pub use error::{Error, Result};
pub use exec::Exec;
pub use kernel::KernelSpec;
pub use multiclass::{FitOptions, ModelFile, MulticlassModel, Prediction, Strategy};

pub use svm::{BinaryModel, ModelStats, TrainConfig};
