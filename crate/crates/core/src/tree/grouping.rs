//! Class-grouping by majority: every candidate class is sent wholly to the
//! side of the initial classifier that holds most of its examples, and the
//! node classifier is retrained on the two resulting super-classes.

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::metrics::{split_counts, SplitCounts};
use crate::svm::{self, BinaryModel, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingResult {
    pub final_classifier: BinaryModel,
    pub pos_classes: Vec<ClassId>,
    pub neg_classes: Vec<ClassId>,
}

/// Majority assignment: class `i` goes positive iff strictly more of its
/// examples fall on the positive side; ties go negative.
///
/// If that leaves one side empty, the pair `(positive class, negative
/// class)` that generated the initial classifier is forced apart and the
/// majority rule is applied to the remaining classes only.
pub fn assign_sides(counts: &SplitCounts, pair: (ClassId, ClassId)) -> (Vec<ClassId>, Vec<ClassId>) {
    let majority = |k: usize| counts.pos[k] > counts.neg[k];
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (k, &c) in counts.classes.iter().enumerate() {
        if majority(k) {
            pos.push(c);
        } else {
            neg.push(c);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        pos.clear();
        neg.clear();
        for (k, &c) in counts.classes.iter().enumerate() {
            if c == pair.0 || (c != pair.1 && majority(k)) {
                pos.push(c);
            } else {
                neg.push(c);
            }
        }
    }
    (pos, neg)
}

/// Groups the classes in `data` by the majority side of `h` and trains the
/// final classifier `P vs N`. `pair` names the classes `h` was trained on
/// (positive first); it is only used when the majority vote leaves a side
/// empty.
pub fn group_by_majority(
    h: &BinaryModel,
    pair: (ClassId, ClassId),
    data: &[(ClassId, Vec<Vec<f64>>)],
    cfg: &TrainConfig,
) -> Result<GroupingResult> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument("grouping needs at least two classes".into()));
    }
    let classes: Vec<ClassId> = data.iter().map(|d| d.0).collect();
    if !classes.contains(&pair.0) || !classes.contains(&pair.1) || pair.0 == pair.1 {
        return Err(Error::InvalidArgument(format!(
            "initial pair {pair:?} is not a pair of candidate classes {classes:?}"
        )));
    }
    let counts = split_counts(h, data.iter().map(|(c, xs)| (*c, xs.as_slice())))?;
    let (pos_classes, neg_classes) = assign_sides(&counts, pair);
    let gather = |side: &[ClassId]| -> Vec<&[f64]> {
        data.iter()
            .filter(|(c, _)| side.contains(c))
            .flat_map(|(_, xs)| xs.iter().map(Vec::as_slice))
            .collect()
    };
    let final_classifier = svm::train(&gather(&pos_classes), &gather(&neg_classes), cfg).map_err(|e| {
        Error::BuildFailure {
            classes: classes.clone(),
            msg: e.to_string(),
        }
    })?;
    Ok(GroupingResult {
        final_classifier,
        pos_classes,
        neg_classes,
    })
}
