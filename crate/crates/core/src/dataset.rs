//! Labeled multi-class datasets: CSV loading, [-1, 1] scaling and stratified
//! fold assignment.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense class identifier, `1..=N`.
pub type ClassId = usize;

/// Per-feature `(min, max)` recorded from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalization {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        let first = features.first().ok_or(Error::EmptyDataset)?;
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for row in &features[1..] {
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    /// Affine map of one value of feature `j`. Not clipped; constant
    /// features map to 0.
    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.mins[j], self.maxs[j]);
        if hi > lo {
            2.0 * (v - lo) / (hi - lo) - 1.0
        } else {
            0.0
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect())
    }
}

/// CSV parsing options.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Label column; `None` means the last column.
    pub label_column: Option<usize>,
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<ClassId>,
    /// Classes present, ascending.
    pub class_ids: Vec<ClassId>,
    /// Original label text, indexed by `class id - 1`.
    pub class_names: Vec<String>,
    pub feature_dim: usize,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    /// Builds a dataset from dense labels in `1..=class_names.len()`.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<ClassId>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let feature_dim = features[0].len();
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("zero feature columns".into()));
        }
        for (row, x) in features.iter().enumerate() {
            if x.len() != feature_dim {
                return Err(Error::MalformedRow {
                    row: row + 1,
                    msg: format!("expected {feature_dim} features, got {}", x.len()),
                });
            }
        }
        let mut present = vec![false; class_names.len()];
        for &y in &labels {
            if y == 0 || y > class_names.len() {
                return Err(Error::InvalidArgument(format!("label {y} out of range")));
            }
            present[y - 1] = true;
        }
        let class_ids = (1..=class_names.len()).filter(|&c| present[c - 1]).collect();
        Ok(Self {
            features,
            labels,
            class_ids,
            class_names,
            feature_dim,
            normalization: None,
        })
    }

    /// Convenience constructor for labels that are already dense ids.
    pub fn from_dense(features: Vec<Vec<f64>>, labels: Vec<ClassId>) -> Result<Self> {
        let n = labels.iter().copied().max().unwrap_or(0);
        let names = (1..=n).map(|c| c.to_string()).collect();
        Self::new(features, labels, names)
    }

    pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, opts)
    }

    /// Parses CSV rows; labels are remapped to `1..=N` in order of first
    /// appearance.
    pub fn from_csv_reader<R: Read>(reader: R, opts: &CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(opts.header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut ids: HashMap<String, ClassId> = HashMap::new();
        let mut arity = None;

        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::MalformedRow {
                row,
                msg: e.to_string(),
            })?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let n = *arity.get_or_insert(rec.len());
            if rec.len() != n {
                return Err(Error::MalformedRow {
                    row,
                    msg: format!("expected {n} columns, got {}", rec.len()),
                });
            }
            if n < 2 {
                return Err(Error::MalformedRow {
                    row,
                    msg: "need at least one feature and a label".into(),
                });
            }
            let label_col = opts.label_column.unwrap_or(n - 1);
            if label_col >= n {
                return Err(Error::InvalidArgument(format!(
                    "label column {label_col} out of range for {n} columns"
                )));
            }
            let mut x = Vec::with_capacity(n - 1);
            for (j, cell) in rec.iter().enumerate() {
                if j == label_col {
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| Error::MalformedRow {
                    row,
                    msg: format!("non-numeric feature {cell:?} in column {}", j + 1),
                })?;
                x.push(v);
            }
            let name = rec[label_col].to_string();
            let id = *ids.entry(name.clone()).or_insert_with(|| {
                names.push(name);
                names.len()
            });
            features.push(x);
            labels.push(id);
        }
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::new(features, labels, names)
    }

    /// Reads unlabeled rows, dropping `skip_column` if given. Empty input
    /// yields no rows.
    pub fn read_features<R: Read>(reader: R, skip_column: Option<usize>, header: bool) -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::MalformedRow {
                row,
                msg: e.to_string(),
            })?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if let Some(c) = skip_column {
                if c >= rec.len() {
                    return Err(Error::InvalidArgument(format!(
                        "column {c} out of range for {} columns",
                        rec.len()
                    )));
                }
            }
            let x = rec
                .iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != skip_column)
                .map(|(j, cell)| {
                    cell.parse::<f64>().map_err(|_| Error::MalformedRow {
                        row,
                        msg: format!("non-numeric feature {cell:?} in column {}", j + 1),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(x);
        }
        Ok(rows)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    /// Example indices grouped by class, for classes present.
    pub fn by_class(&self) -> BTreeMap<ClassId, Vec<usize>> {
        let mut map: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for (i, &y) in self.labels.iter().enumerate() {
            map.entry(y).or_default().push(i);
        }
        map
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        self.by_class()
            .into_iter()
            .map(|(c, v)| (c, v.len()))
            .collect()
    }

    pub fn class_name(&self, c: ClassId) -> &str {
        &self.class_names[c - 1]
    }

    /// Fits per-feature (min, max) on this data and maps it to [-1, 1].
    pub fn normalize(&self) -> Result<Dataset> {
        if self.normalization.is_some() {
            return Err(Error::InvalidArgument("dataset is already normalized".into()));
        }
        let norm = Normalization::fit(&self.features)?;
        self.normalize_with(&norm)
    }

    /// Applies previously recorded statistics (e.g. from a training fold).
    pub fn normalize_with(&self, norm: &Normalization) -> Result<Dataset> {
        if self.normalization.is_some() {
            return Err(Error::InvalidArgument("dataset is already normalized".into()));
        }
        let features = self
            .features
            .iter()
            .map(|x| norm.apply(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            features,
            normalization: Some(norm.clone()),
            ..self.clone()
        })
    }

    /// Rows at `indices`, keeping the parent's class naming.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features: Vec<_> = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels: Vec<_> = indices.iter().map(|&i| self.labels[i]).collect();
        let mut class_ids: Vec<ClassId> = labels.clone();
        class_ids.sort_unstable();
        class_ids.dedup();
        Dataset {
            features,
            labels,
            class_ids,
            class_names: self.class_names.clone(),
            feature_dim: self.feature_dim,
            normalization: self.normalization.clone(),
        }
    }

    /// Concatenates datasets with the same feature dimension; labels are
    /// merged by original name.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let mut names: Vec<String> = Vec::new();
        let mut ids: HashMap<String, ClassId> = HashMap::new();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for ds in parts {
            if ds.feature_dim != first.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: first.feature_dim,
                    got: ds.feature_dim,
                });
            }
            for (x, &y) in ds.features.iter().zip(&ds.labels) {
                let name = ds.class_name(y).to_string();
                let id = *ids.entry(name.clone()).or_insert_with(|| {
                    names.push(name);
                    names.len()
                });
                features.push(x.clone());
                labels.push(id);
            }
        }
        Dataset::new(features, labels, names)
    }

    /// Stratified k-fold assignment, deterministic in `seed`.
    ///
    /// Each class is shuffled and dealt round-robin, continuing from where
    /// the previous class stopped, so per-class fold counts differ by at most
    /// one and total fold sizes stay balanced.
    pub fn make_folds(&self, k: usize, seed: u64) -> Result<FoldPlan> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2 folds, got {k}")));
        }
        if k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "{k} folds for {} examples",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignments = vec![0usize; self.len()];
        let mut offset = 0usize;
        for (_, mut idx) in self.by_class() {
            idx.shuffle(&mut rng);
            for (t, &i) in idx.iter().enumerate() {
                assignments[i] = (offset + t) % k;
            }
            offset = (offset + idx.len()) % k;
        }
        Ok(FoldPlan {
            k,
            assignments,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` indices for fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}
