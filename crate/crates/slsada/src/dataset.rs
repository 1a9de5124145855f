//! Data model for a source/target domain pair.
//!
//! Feature matrices store samples as columns (`m` feature rows by `n`
//! sample columns). A [`DomainPair`] keeps the source columns ordered
//! labeled-first so that downstream graph blocks are index-contiguous,
//! and records the permutation so callers can map results back to the
//! original sample order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real feature matrix, features as rows and samples as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    /// Wraps a dense matrix, rejecting empty shapes and non-finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "feature matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature value {v} at ({i}, {j})"
            )));
        }
        Ok(FeatureMatrix { values })
    }

    /// Builds from a row-major buffer of `feature_dim * sample_count` values.
    pub fn from_row_major(
        feature_dim: usize,
        sample_count: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let values = Array2::from_shape_vec((feature_dim, sample_count), data)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        FeatureMatrix::new(values)
    }

    /// Feature dimension `m`.
    pub fn feature_dim(&self) -> usize {
        self.values.nrows()
    }

    /// Sample count `n`.
    pub fn sample_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Returns a copy with the given column order; `order[new] = old`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.sample_count() {
            return Err(Error::Dimension(format!(
                "permutation length {} does not match sample count {}",
                order.len(),
                self.sample_count()
            )));
        }
        let mut out = Array2::zeros(self.values.raw_dim());
        for (new, &old) in order.iter().enumerate() {
            if old >= self.sample_count() {
                return Err(Error::InvalidData(format!(
                    "permutation entry {old} out of range"
                )));
            }
            out.column_mut(new).assign(&self.values.column(old));
        }
        Ok(FeatureMatrix { values: out })
    }

    /// Scales every column to unit Euclidean norm (zero columns are kept).
    pub fn normalized_samples(&self) -> Self {
        let mut out = self.values.clone();
        for mut col in out.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
        FeatureMatrix { values: out }
    }
}

/// Subtracts each feature row's mean, so every row of the result has mean 0.
pub fn center_features(x: &FeatureMatrix) -> FeatureMatrix {
    let mut values = x.values.clone();
    let n = values.ncols() as f64;
    for mut row in values.rows_mut() {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
    }
    FeatureMatrix { values }
}

/// Nonnegative soft label matrix, one row per sample, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    values: Array2<f64>,
}

impl LabelMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::InvalidData("label matrix needs >= 1 class".into()));
        }
        if let Some(((i, j), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidData(format!(
                "label matrix entry {v} at ({i}, {j}) is negative or non-finite"
            )));
        }
        Ok(LabelMatrix { values })
    }

    /// One-hot encodes hard class ids.
    pub fn from_hard_labels(labels: &[usize], class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::InvalidData("class_count must be >= 1".into()));
        }
        let mut values = Array2::zeros((labels.len(), class_count));
        for (i, &c) in labels.iter().enumerate() {
            if c >= class_count {
                return Err(Error::InvalidData(format!(
                    "label {c} at row {i} exceeds class count {class_count}"
                )));
            }
            values[(i, c)] = 1.0;
        }
        Ok(LabelMatrix { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn class_count(&self) -> usize {
        self.values.ncols()
    }

    /// Row-wise argmax; ties break toward the lowest class index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.values
            .rows()
            .into_iter()
            .map(|row| row_argmax(&row))
            .collect()
    }

    pub fn row_is_one_hot(&self, i: usize) -> bool {
        let row = self.values.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        ones == 1 && ones + zeros == row.len()
    }
}

pub(crate) fn row_argmax(row: &ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in row.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = j;
        }
    }
    best
}

/// A source/target pair with a labeled-first source column ordering.
///
/// Invariants: both domains share the feature dimension, the first
/// `labeled_count` source columns carry the one-hot labels in
/// `source_labels`, and `source_order` maps reordered column positions
/// back to the caller's original order (`source_order[new] = old`).
#[derive(Debug, Clone)]
pub struct DomainPair {
    source: FeatureMatrix,
    target: FeatureMatrix,
    labeled_count: usize,
    source_labels: LabelMatrix,
    class_count: usize,
    true_source: Option<Vec<usize>>,
    true_target: Option<Vec<usize>>,
    source_order: Vec<usize>,
}

impl DomainPair {
    /// Builds a pair from raw domains plus the labeled subset of the source.
    ///
    /// `labeled_indices` refer to columns of `source` in the caller's order;
    /// `labeled_labels[i]` is the class of `labeled_indices[i]`. True label
    /// vectors are optional and used for evaluation only.
    pub fn new(
        source: FeatureMatrix,
        target: FeatureMatrix,
        labeled_indices: &[usize],
        labeled_labels: &[usize],
        class_count: usize,
        true_source: Option<Vec<usize>>,
        true_target: Option<Vec<usize>>,
    ) -> Result<Self> {
        if source.feature_dim() != target.feature_dim() {
            return Err(Error::Dimension(format!(
                "source has {} feature rows, target has {}",
                source.feature_dim(),
                target.feature_dim()
            )));
        }
        let n_s = source.sample_count();
        if labeled_indices.len() != labeled_labels.len() {
            return Err(Error::InvalidData(format!(
                "{} labeled indices but {} labels",
                labeled_indices.len(),
                labeled_labels.len()
            )));
        }
        if labeled_indices.len() > n_s {
            return Err(Error::InvalidData(format!(
                "{} labeled indices exceed {} source samples",
                labeled_indices.len(),
                n_s
            )));
        }
        let mut seen = vec![false; n_s];
        for &idx in labeled_indices {
            if idx >= n_s {
                return Err(Error::InvalidData(format!(
                    "labeled index {idx} out of range for {n_s} source samples"
                )));
            }
            if seen[idx] {
                return Err(Error::InvalidData(format!("duplicate labeled index {idx}")));
            }
            seen[idx] = true;
        }
        if let Some(t) = &true_source {
            if t.len() != n_s {
                return Err(Error::Dimension(format!(
                    "true source labels: {} entries for {} samples",
                    t.len(),
                    n_s
                )));
            }
        }
        if let Some(t) = &true_target {
            if t.len() != target.sample_count() {
                return Err(Error::Dimension(format!(
                    "true target labels: {} entries for {} samples",
                    t.len(),
                    target.sample_count()
                )));
            }
        }

        // Labeled columns first, unlabeled after in original relative order.
        let mut source_order = Vec::with_capacity(n_s);
        source_order.extend_from_slice(labeled_indices);
        source_order.extend((0..n_s).filter(|i| !seen[*i]));

        let source = source.reordered(&source_order)?;
        let true_source = true_source.map(|t| source_order.iter().map(|&i| t[i]).collect());
        let source_labels = LabelMatrix::from_hard_labels(labeled_labels, class_count)?;

        Ok(DomainPair {
            source,
            target,
            labeled_count: labeled_indices.len(),
            source_labels,
            class_count,
            true_source,
            true_target,
            source_order,
        })
    }

    pub fn source(&self) -> &FeatureMatrix {
        &self.source
    }

    pub fn target(&self) -> &FeatureMatrix {
        &self.target
    }

    pub fn feature_dim(&self) -> usize {
        self.source.feature_dim()
    }

    pub fn source_count(&self) -> usize {
        self.source.sample_count()
    }

    pub fn target_count(&self) -> usize {
        self.target.sample_count()
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_count
    }

    pub fn unlabeled_source_count(&self) -> usize {
        self.source_count() - self.labeled_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// One-hot labels of the labeled source block (rows `0..labeled_count`).
    pub fn source_labels(&self) -> &LabelMatrix {
        &self.source_labels
    }

    /// True source labels in the pair's (labeled-first) column order.
    pub fn true_source(&self) -> Option<&[usize]> {
        self.true_source.as_deref()
    }

    pub fn true_target(&self) -> Option<&[usize]> {
        self.true_target.as_deref()
    }

    /// Maps reordered source positions to original columns.
    pub fn source_order(&self) -> &[usize] {
        &self.source_order
    }

    /// Restores per-source-sample values to the caller's original order.
    pub fn restore_source_order<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.source_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} source samples",
                values.len(),
                self.source_count()
            )));
        }
        let mut out = values.to_vec();
        for (new, &old) in self.source_order.iter().enumerate() {
            out[old] = values[new].clone();
        }
        Ok(out)
    }

    /// Jointly centers source and target: row means of the concatenated
    /// matrix are removed, then the halves are split back.
    pub fn center_jointly(&self) -> Self {
        let joint = concatenate![Axis(1), self.source.values.view(), self.target.values.view()];
        let centered = center_features(&FeatureMatrix { values: joint });
        let n_s = self.source_count();
        let source = FeatureMatrix {
            values: centered.values.slice(s![.., ..n_s]).to_owned(),
        };
        let target = FeatureMatrix {
            values: centered.values.slice(s![.., n_s..]).to_owned(),
        };
        DomainPair {
            source,
            target,
            ..self.clone()
        }
    }

    /// Applies per-sample L2 normalization to both domains.
    pub fn normalized_samples(&self) -> Self {
        DomainPair {
            source: self.source.normalized_samples(),
            target: self.target.normalized_samples(),
            ..self.clone()
        }
    }

    /// Hard class ids of the labeled block.
    pub fn labeled_classes(&self) -> Vec<usize> {
        self.source_labels.hard_labels()
    }
}

/// On-disk feature layouts understood by [`load_features`]/[`save_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureFormat {
    /// Header line `m,n`, then `m` lines of `n` comma-separated decimals.
    Csv,
    /// 8-byte LE unsigned `m`, then `n`, then `m*n` LE f64 in row-major order.
    RawBinary,
}

pub fn load_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix> {
    match format {
        FeatureFormat::Csv => load_features_csv(path),
        FeatureFormat::RawBinary => load_features_raw(path),
    }
}

pub fn save_features(x: &FeatureMatrix, path: &Path, format: FeatureFormat) -> Result<()> {
    match format {
        FeatureFormat::Csv => save_features_csv(x, path),
        FeatureFormat::RawBinary => save_features_raw(x, path),
    }
}

fn load_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file, expected `m,n` header"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let dims: Vec<&str> = header.trim().split(',').collect();
    if dims.len() != 2 {
        return Err(Error::parse(path, 1, "header must be `m,n`"));
    }
    let m: usize = dims[0]
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, 1, format!("bad row count {:?}", dims[0])))?;
    let n: usize = dims[1]
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, 1, format!("bad column count {:?}", dims[1])))?;

    let mut values = Array2::zeros((m, n));
    let mut rows_read = 0;
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if rows_read == m {
            return Err(Error::parse(
                path,
                line_no,
                format!("more than the declared {m} data rows"),
            ));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(Error::parse(
                path,
                line_no,
                format!("row {rows_read} has {} values, expected {n}", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    line_no,
                    format!("unparseable value {:?} at (row {rows_read}, col {j})", cell),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("non-finite value at (row {rows_read}, col {j})"),
                ));
            }
            values[(rows_read, j)] = v;
        }
        rows_read += 1;
    }
    if rows_read != m {
        return Err(Error::parse(
            path,
            rows_read + 1,
            format!("expected {m} data rows, found {rows_read}"),
        ));
    }
    FeatureMatrix::new(values)
}

fn save_features_csv(x: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, s: &str| {
        w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    write(&mut w, &format!("{},{}\n", x.feature_dim(), x.sample_count()))?;
    for row in x.values().rows() {
        // `{}` prints the shortest representation that round-trips exactly.
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        write(&mut w, &line.join(","))?;
        write(&mut w, "\n")?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_features_raw(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut u64_buf = [0u8; 8];
    r.read_exact(&mut u64_buf)
        .map_err(|e| Error::io(path, e))?;
    let m = u64::from_le_bytes(u64_buf) as usize;
    r.read_exact(&mut u64_buf)
        .map_err(|e| Error::io(path, e))?;
    let n = u64::from_le_bytes(u64_buf) as usize;

    let total = m
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidData(format!("declared size {m}x{n} overflows")))?;
    let mut data = Vec::with_capacity(total);
    let mut f64_buf = [0u8; 8];
    for idx in 0..total {
        r.read_exact(&mut f64_buf).map_err(|e| {
            Error::InvalidData(format!(
                "{}: truncated payload at element {idx} of {total}: {e}",
                path.display()
            ))
        })?;
        let v = f64::from_le_bytes(f64_buf);
        if !v.is_finite() {
            return Err(Error::InvalidData(format!(
                "{}: non-finite value at (row {}, col {})",
                path.display(),
                idx / n,
                idx % n
            )));
        }
        data.push(v);
    }
    let values = Array2::from_shape_vec((m, n), data)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    FeatureMatrix::new(values)
}

fn save_features_raw(x: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&(x.feature_dim() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&(x.sample_count() as u64).to_le_bytes())
        .map_err(io)?;
    for v in x.values().iter() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads one integer class id per line (`0..C-1`).
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: usize = t
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad class id {t:?}")))?;
        labels.push(v);
    }
    Ok(labels)
}

pub fn save_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads one sample index per line (a labeled-subset file).
pub fn load_indices(path: &Path) -> Result<Vec<usize>> {
    load_labels(path)
}

pub fn save_indices(indices: &[usize], path: &Path) -> Result<()> {
    save_labels(indices, path)
}

/// Draws `per_class` indices per class uniformly without replacement.
///
/// Returned indices are grouped by class (class 0 first) and sorted within
/// each class; the draw is deterministic for a fixed seed.
pub fn sample_labeled_subset(labels: &[usize], per_class: usize, seed: u64) -> Result<Vec<usize>> {
    if per_class == 0 {
        return Err(Error::InvalidData("per_class must be >= 1".into()));
    }
    let class_count = match labels.iter().max() {
        Some(&c) => c + 1,
        None => return Err(Error::InvalidData("empty label vector".into())),
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(per_class * class_count);
    for (c, idxs) in members.iter().enumerate() {
        if idxs.len() < per_class {
            return Err(Error::InvalidData(format!(
                "class {c} has {} samples, cannot draw {per_class}",
                idxs.len()
            )));
        }
        let mut pick: Vec<usize> = idxs
            .choose_multiple(&mut rng, per_class)
            .copied()
            .collect();
        pick.sort_unstable();
        chosen.extend(pick);
    }
    Ok(chosen)
}

/// Class-conditional Gaussian generator with a rigid-motion target shift.
///
/// Source samples are drawn from per-class Gaussians; target samples come
/// from the same Gaussians rotated by `rotation_angle_deg` (applied as
/// plane rotations over consecutive coordinate pairs) and shifted by a
/// vector of norm `mean_offset`, giving both marginal and conditional shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub feature_dim: usize,
    pub per_class_source: usize,
    pub per_class_target: usize,
    /// Standard deviation of the within-class noise.
    pub covariance_scale: f64,
    pub rotation_angle_deg: f64,
    /// Euclidean norm of the target-domain translation.
    pub mean_offset: f64,
    /// Standard deviation used when placing class means.
    pub class_mean_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            class_count: 3,
            feature_dim: 10,
            per_class_source: 50,
            per_class_target: 50,
            covariance_scale: 1.0,
            rotation_angle_deg: 15.0,
            mean_offset: 1.0,
            class_mean_scale: 2.0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidData("need at least 2 classes".into()));
        }
        if self.feature_dim < 2 {
            return Err(Error::InvalidData("need feature_dim >= 2".into()));
        }
        if self.per_class_source < 2 || self.per_class_target < 2 {
            return Err(Error::InvalidData("need >= 2 samples per class".into()));
        }
        if !(self.covariance_scale > 0.0) {
            return Err(Error::InvalidData(format!(
                "covariance scale must be positive, got {}",
                self.covariance_scale
            )));
        }
        Ok(())
    }
}

/// Raw synthetic draw: both domains with their true labels.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
    pub labels_source: Vec<usize>,
    pub labels_target: Vec<usize>,
    pub class_count: usize,
}

impl SyntheticData {
    /// Samples a labeled subset and assembles the evaluation-ready pair.
    pub fn into_pair(self, per_class_labels: usize, subset_seed: u64) -> Result<DomainPair> {
        let idx = sample_labeled_subset(&self.labels_source, per_class_labels, subset_seed)?;
        let labels: Vec<usize> = idx.iter().map(|&i| self.labels_source[i]).collect();
        DomainPair::new(
            self.source,
            self.target,
            &idx,
            &labels,
            self.class_count,
            Some(self.labels_source),
            Some(self.labels_target),
        )
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let m = spec.feature_dim;
    let c = spec.class_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let draw = |rng: &mut ChaCha8Rng| -> f64 { normal.sample(rng) };

    let mut means = Array2::zeros((c, m));
    for mut row in means.rows_mut() {
        for v in row.iter_mut() {
            *v = spec.class_mean_scale * draw(&mut rng);
        }
    }

    // Unit offset direction, scaled to the requested norm.
    let mut offset = Array1::zeros(m);
    for v in offset.iter_mut() {
        *v = draw(&mut rng);
    }
    let norm = offset.dot(&offset).sqrt();
    if norm > 0.0 {
        offset.mapv_inplace(|v| v / norm * spec.mean_offset);
    }

    let theta = spec.rotation_angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let rotate = |x: &mut Array1<f64>| {
        for p in 0..m / 2 {
            let (i, j) = (2 * p, 2 * p + 1);
            let (a, b) = (x[i], x[j]);
            x[i] = cos * a - sin * b;
            x[j] = sin * a + cos * b;
        }
    };

    let n_s = c * spec.per_class_source;
    let n_t = c * spec.per_class_target;
    let mut source = Array2::zeros((m, n_s));
    let mut target = Array2::zeros((m, n_t));
    let mut labels_source = Vec::with_capacity(n_s);
    let mut labels_target = Vec::with_capacity(n_t);

    let mut col = 0;
    for class in 0..c {
        for _ in 0..spec.per_class_source {
            for (i, v) in source.column_mut(col).iter_mut().enumerate() {
                *v = means[(class, i)] + spec.covariance_scale * draw(&mut rng);
            }
            labels_source.push(class);
            col += 1;
        }
    }
    col = 0;
    for class in 0..c {
        for _ in 0..spec.per_class_target {
            let mut x = Array1::zeros(m);
            for (i, v) in x.iter_mut().enumerate() {
                *v = means[(class, i)] + spec.covariance_scale * draw(&mut rng);
            }
            rotate(&mut x);
            x += &offset;
            target.column_mut(col).assign(&x);
            labels_target.push(class);
            col += 1;
        }
    }

    Ok(SyntheticData {
        source: FeatureMatrix::new(source)?,
        target: FeatureMatrix::new(target)?,
        labels_source,
        labels_target,
        class_count: c,
    })
}

/// Convenience wrapper: draw the data and a labeled subset in one call.
pub fn generate_synthetic_pair(
    spec: &SyntheticSpec,
    seed: u64,
    per_class_labels: usize,
    subset_seed: u64,
) -> Result<DomainPair> {
    generate_synthetic(spec, seed)?.into_pair(per_class_labels, subset_seed)
}
