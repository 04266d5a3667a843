//! Sparse dataset loading, feature scaling, splitting, and label encoding.
//!
//! Datasets arrive in the plain-text sparse format used by LIBSVM: one
//! instance per line, a numeric label followed by `index:value` pairs with
//! 1-based, strictly increasing feature indices. Rows are kept sparse until a
//! dense design matrix is actually needed.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::Rng;

/// A labelled sparse dataset.
///
/// `rows[i]` holds the non-zero features of instance `i` as `(index, value)`
/// pairs with 0-based indices in strictly increasing order; absent features
/// are implicitly zero. `labels[i]` is the raw label as it appeared in the
/// file.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
    pub n_features: usize,
}

impl SparseDataset {
    /// Number of instances.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<f64> {
        let mut c: Vec<f64> = Vec::new();
        for &y in &self.labels {
            if !c.iter().any(|&v| v == y) {
                c.push(y);
            }
        }
        c.sort_by(|a, b| a.partial_cmp(b).expect("labels must not be NaN"));
        c
    }

    /// Dense `l x n_features` design matrix (row per instance).
    pub fn to_dense(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.len(), self.n_features));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                x[[i, j]] = v;
            }
        }
        x
    }

    /// New dataset holding the given instances, in the order given.
    pub fn subset(&self, idx: &[usize]) -> SparseDataset {
        SparseDataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
        }
    }
}

fn parse_err(line: usize, msg: impl fmt::Display) -> CoreError {
    CoreError::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Parses sparse-format text. Blank lines are skipped; a line consisting of
/// just a label is a valid all-zero row. `n_features` is the maximum of
/// `min_features` and the largest index seen, so train and test files can be
/// forced onto a common width.
pub fn parse_sparse_text<R: BufRead>(reader: R, min_features: usize) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut n_features = min_features;
    for (lineno0, line) in reader.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let label_tok = match tokens.next() {
            Some(t) => t,
            None => continue, // blank line
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid label `{label_tok}`")))?;
        if label.is_nan() {
            return Err(parse_err(lineno, "label is NaN"));
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize; // valid 1-based indices start at 1
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid feature index `{idx_s}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based; got 0"));
            }
            if idx <= prev_index {
                return Err(parse_err(
                    lineno,
                    format!("feature indices must be strictly increasing; {idx} after {prev_index}"),
                ));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid feature value `{val_s}`")))?;
            prev_index = idx;
            row.push((idx - 1, val));
        }
        n_features = n_features.max(prev_index);
        rows.push(row);
        labels.push(label);
    }
    Ok(SparseDataset {
        rows,
        labels,
        n_features,
    })
}

/// Loads a sparse-format text file.
pub fn load_sparse_text(path: &Path, min_features: usize) -> Result<SparseDataset> {
    let file = File::open(path)?;
    parse_sparse_text(BufReader::new(file), min_features)
}

/// Writes a dataset back out in sparse text format (1-based indices).
pub fn save_sparse_text(ds: &SparseDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        write!(w, "{label}")?;
        for &(j, v) in row {
            write!(w, " {}:{}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Feature scaling recipe selected in a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Use features as-is.
    #[default]
    None,
    /// Linearly map each feature to [-1, 1] using its own min/max.
    PerFeature,
    /// Divide every value by 255 (byte-valued image data).
    Div255,
    /// Linearly map all values to [0, 1] using the global min/max.
    GlobalMinMax,
}

/// Fitted scaling parameters. Fitting and applying are separate so that
/// parameters learned from training data can be applied unchanged to test
/// data.
///
/// Scaling touches only stored entries; implicitly-zero features of a sparse
/// row stay zero, as with the standard LIBSVM tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalingSpec {
    Identity,
    DivideBy(f64),
    /// Per-feature affine maps `x -> -1 + 2 (x - lo) / (hi - lo)`.
    PerFeature { lo: Vec<f64>, hi: Vec<f64> },
    /// Global affine map `x -> (x - min) / (max - min)`.
    Global { min: f64, max: f64 },
}

/// Fits scaling parameters on the given datasets (normally just the training
/// set). Errors if an affine mode sees a degenerate range.
pub fn fit_scaling(mode: ScalingMode, datasets: &[&SparseDataset]) -> Result<ScalingSpec> {
    match mode {
        ScalingMode::None => Ok(ScalingSpec::Identity),
        ScalingMode::Div255 => Ok(ScalingSpec::DivideBy(255.0)),
        ScalingMode::PerFeature => {
            let n = datasets
                .iter()
                .map(|d| d.n_features)
                .max()
                .ok_or_else(|| CoreError::InvalidConfig("no dataset to fit scaling on".into()))?;
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for ds in datasets {
                for row in &ds.rows {
                    for &(j, v) in row {
                        lo[j] = lo[j].min(v);
                        hi[j] = hi[j].max(v);
                    }
                }
            }
            // Features never observed scale as identity.
            for j in 0..n {
                if lo[j] > hi[j] {
                    lo[j] = 0.0;
                    hi[j] = 0.0;
                }
            }
            Ok(ScalingSpec::PerFeature { lo, hi })
        }
        ScalingMode::GlobalMinMax => {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for ds in datasets {
                for row in &ds.rows {
                    for &(_, v) in row {
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
            }
            if !min.is_finite() || !max.is_finite() {
                return Err(CoreError::InvalidConfig(
                    "global min-max scaling needs at least one stored value".into(),
                ));
            }
            if min == max {
                return Err(CoreError::InvalidConfig(format!(
                    "global min-max scaling is degenerate: min == max == {min}"
                )));
            }
            Ok(ScalingSpec::Global { min, max })
        }
    }
}

/// Applies fitted scaling in place.
pub fn apply_scaling(ds: &mut SparseDataset, spec: &ScalingSpec) {
    match spec {
        ScalingSpec::Identity => {}
        ScalingSpec::DivideBy(d) => {
            for row in &mut ds.rows {
                for e in row {
                    e.1 /= d;
                }
            }
        }
        ScalingSpec::PerFeature { lo, hi } => {
            for row in &mut ds.rows {
                for e in row {
                    let (l, h) = (lo[e.0], hi[e.0]);
                    e.1 = if h > l {
                        -1.0 + 2.0 * (e.1 - l) / (h - l)
                    } else {
                        // constant or unseen feature: leave as-is
                        e.1
                    };
                }
            }
        }
        ScalingSpec::Global { min, max } => {
            for row in &mut ds.rows {
                for e in row {
                    e.1 = (e.1 - min) / (max - min);
                }
            }
        }
    }
}

/// Splits off `test_count` instances, stratified by class: each class
/// contributes a share proportional to its frequency (largest-remainder
/// rounding, so every class is within one instance of exact proportionality).
/// Instance choice within a class is seeded and deterministic; both halves
/// preserve the original instance order. Errors if a class would lose all of
/// its training instances.
pub fn stratified_split(
    ds: &SparseDataset,
    test_count: usize,
    seed: u64,
) -> Result<(SparseDataset, SparseDataset)> {
    let l = ds.len();
    if test_count >= l {
        return Err(CoreError::InvalidConfig(format!(
            "test count {test_count} must be smaller than the dataset ({l} instances)"
        )));
    }
    let classes = ds.classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &y) in ds.labels.iter().enumerate() {
        let c = classes.iter().position(|&v| v == y).unwrap();
        members[c].push(i);
    }
    // Largest-remainder apportionment of test_count across classes.
    let mut take: Vec<usize> = Vec::with_capacity(classes.len());
    let mut rem: Vec<(f64, usize)> = Vec::with_capacity(classes.len());
    let mut assigned = 0usize;
    for (c, m) in members.iter().enumerate() {
        let quota = test_count as f64 * m.len() as f64 / l as f64;
        let base = quota.floor() as usize;
        take.push(base);
        assigned += base;
        rem.push((quota - base as f64, c));
    }
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in rem.iter().take(test_count - assigned) {
        take[c] += 1;
    }
    let mut rng = Rng::for_purpose(seed, "split/stratified", 0);
    let mut test_idx: Vec<usize> = Vec::with_capacity(test_count);
    for (c, m) in members.iter().enumerate() {
        if take[c] >= m.len() {
            return Err(CoreError::InvalidConfig(format!(
                "stratified split leaves class {} with no training instances",
                classes[c]
            )));
        }
        let chosen = rng.sample_indices(m.len(), take[c]);
        test_idx.extend(chosen.into_iter().map(|k| m[k]));
    }
    test_idx.sort_unstable();
    let mut in_test = vec![false; l];
    for &i in &test_idx {
        in_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..l).filter(|&i| !in_test[i]).collect();
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

/// Splits instances into a `fraction` part and its complement by a seeded
/// shuffle (no stratification). Both halves preserve the original order.
pub fn ratio_split(
    ds: &SparseDataset,
    fraction: f64,
    seed: u64,
) -> Result<(SparseDataset, SparseDataset)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CoreError::InvalidConfig(format!(
            "split fraction {fraction} must lie in [0, 1]"
        )));
    }
    let l = ds.len();
    let n_first = (fraction * l as f64).round() as usize;
    let mut rng = Rng::for_purpose(seed, "split/ratio", 0);
    let mut first_idx = rng.sample_indices(l, n_first);
    first_idx.sort_unstable();
    let mut in_first = vec![false; l];
    for &i in &first_idx {
        in_first[i] = true;
    }
    let second_idx: Vec<usize> = (0..l).filter(|&i| !in_first[i]).collect();
    Ok((ds.subset(&first_idx), ds.subset(&second_idx)))
}

/// Mapping between raw labels and network targets.
///
/// With `n_L > 1` outputs, the K distinct labels sorted ascending map to
/// one-hot rows (k-th smallest label -> 1 in position k). With a single
/// output and two classes, the larger label maps to target +1 and the smaller
/// to -1, and a prediction `z >= 0` means the larger label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    classes: Vec<f64>,
    binary: bool,
}

impl LabelMap {
    /// Learns the label set from training labels. `n_out` is the network's
    /// output dimension: 1 selects the scalar +-1 encoding (requires exactly
    /// two classes); otherwise the class count must equal `n_out`.
    pub fn fit(labels: &[f64], n_out: usize) -> Result<LabelMap> {
        let mut classes: Vec<f64> = Vec::new();
        for &y in labels {
            if y.is_nan() {
                return Err(CoreError::InvalidConfig("labels must not be NaN".into()));
            }
            if !classes.iter().any(|&v| v == y) {
                classes.push(y);
            }
        }
        classes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if n_out == 1 {
            if classes.len() != 2 {
                return Err(CoreError::InvalidConfig(format!(
                    "scalar output needs exactly 2 classes, found {}",
                    classes.len()
                )));
            }
            Ok(LabelMap {
                classes,
                binary: true,
            })
        } else {
            if classes.len() != n_out {
                return Err(CoreError::InvalidConfig(format!(
                    "{} classes do not match {n_out} network outputs",
                    classes.len()
                )));
            }
            Ok(LabelMap {
                classes,
                binary: false,
            })
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    /// Network output dimension this map encodes for.
    pub fn n_out(&self) -> usize {
        if self.binary {
            1
        } else {
            self.classes.len()
        }
    }

    fn class_index(&self, label: f64) -> Result<usize> {
        self.classes
            .iter()
            .position(|&v| v == label)
            .ok_or_else(|| {
                CoreError::InvalidConfig(format!("label {label} was not seen during fitting"))
            })
    }

    /// Encodes labels as an `l x n_out` target matrix.
    pub fn targets(&self, labels: &[f64]) -> Result<Array2<f64>> {
        let mut y = Array2::zeros((labels.len(), self.n_out()));
        for (i, &lab) in labels.iter().enumerate() {
            let k = self.class_index(lab)?;
            if self.binary {
                y[[i, 0]] = if k == 1 { 1.0 } else { -1.0 };
            } else {
                y[[i, k]] = 1.0;
            }
        }
        Ok(y)
    }

    /// Decodes one network output row to a raw label: argmax for one-hot
    /// (first maximum on ties), sign for the scalar encoding (`z >= 0` means
    /// the larger label).
    pub fn predict(&self, z_row: &[f64]) -> f64 {
        if self.binary {
            if z_row[0] >= 0.0 {
                self.classes[1]
            } else {
                self.classes[0]
            }
        } else {
            let mut best = 0usize;
            for (k, &v) in z_row.iter().enumerate() {
                if v > z_row[best] {
                    best = k;
                }
            }
            self.classes[best]
        }
    }
}
