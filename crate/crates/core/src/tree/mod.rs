//! Decision trees of binary classifiers in which every class reaches exactly
//! one leaf.

mod build;
mod grouping;

pub use build::{
    build_bts_g, build_cbts_g, build_ib_dtree, build_ibge_dtree, build_tree, build_tree_in,
    n_candidates, TreeKind,
};
pub use grouping::{assign_sides, group_by_majority, GroupingResult};


use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::svm::BinaryModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf(ClassId),
    Internal(Box<InternalNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalNode {
    pub classifier: BinaryModel,
    pub pos_classes: Vec<ClassId>,
    pub neg_classes: Vec<ClassId>,
    /// Positive side.
    pub left: TreeNode,
    /// Negative side.
    pub right: TreeNode,
}

impl TreeNode {
    /// Walks from the root; returns the leaf class and the number of
    /// classifiers evaluated.
    pub fn classify(&self, x: &[f64]) -> Result<(ClassId, usize)> {
        let mut node = self;
        let mut decisions = 0;
        loop {
            match node {
                TreeNode::Leaf(c) => return Ok((*c, decisions)),
                TreeNode::Internal(n) => {
                    decisions += 1;
                    node = if n.classifier.decision(x)? >= 0.0 {
                        &n.left
                    } else {
                        &n.right
                    };
                }
            }
        }
    }

    /// Leaf classes, left to right.
    pub fn leaves(&self) -> Vec<ClassId> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let TreeNode::Leaf(c) = n {
                out.push(*c);
            }
        });
        out
    }

    pub fn internal_count(&self) -> usize {
        let mut k = 0;
        self.visit(&mut |n| {
            if matches!(n, TreeNode::Internal(_)) {
                k += 1;
            }
        });
        k
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Internal(n) => 1 + n.left.depth().max(n.right.depth()),
        }
    }

    fn visit<F: FnMut(&TreeNode)>(&self, f: &mut F) {
        f(self);
        if let TreeNode::Internal(n) = self {
            n.left.visit(f);
            n.right.visit(f);
        }
    }

    /// Checks the structural invariants: at every internal node P and N are
    /// disjoint and non-empty, the left subtree's leaves are exactly P and
    /// the right's exactly N, and no class occupies two leaves.
    pub fn check_structure(&self) -> Result<Vec<ClassId>> {
        let fail = |msg: String| Error::BuildFailure {
            classes: self.leaves(),
            msg,
        };
        match self {
            TreeNode::Leaf(c) => Ok(vec![*c]),
            TreeNode::Internal(n) => {
                if n.pos_classes.is_empty() || n.neg_classes.is_empty() {
                    return Err(fail("empty side".into()));
                }
                let mut left = n.left.check_structure()?;
                let mut right = n.right.check_structure()?;
                left.sort_unstable();
                right.sort_unstable();
                let mut p = n.pos_classes.clone();
                let mut q = n.neg_classes.clone();
                p.sort_unstable();
                q.sort_unstable();
                if left != p || right != q {
                    return Err(fail(format!(
                        "children {left:?} / {right:?} do not match P={p:?} N={q:?}"
                    )));
                }
                let mut all = left;
                all.extend(right);
                all.sort_unstable();
                if all.windows(2).any(|w| w[0] == w[1]) {
                    return Err(fail("class duplicated across leaves".into()));
                }
                Ok(all)
            }
        }
    }
}
