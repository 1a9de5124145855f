//! Alignment quantities: the marginal MMD matrix, class-wise MMD matrices,
//! their projected trace losses, centroid maps, intra-class scatter, and the
//! projected-clustering loss.
//!
//! Every MMD matrix here is rank one: `M = v v^T` for a coefficient vector
//! `v` holding `1/n_s` (or `1/n_s^c`) on source members and `-1/n_t` (or
//! `-1/n_t^c`) on target members. Matrices are stored as the sparse `v`,
//! which keeps the per-class memory at the class size instead of `n^2`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

/// Which distribution difference an [`MmdMatrix`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmdKind {
    /// Whole-domain means (the marginal matrix).
    Marginal,
    /// Means of one class under the current pseudo-labels (0-based id).
    Class(usize),
}

/// Sparse rank-one MMD matrix over the concatenated source-then-target
/// sample ordering.
#[derive(Debug, Clone)]
pub struct MmdMatrix {
    kind: MmdKind,
    n: usize,
    /// Nonzero entries of the coefficient vector `v` with `M = v v^T`.
    coeffs: Vec<(usize, f64)>,
}

impl MmdMatrix {
    /// Marginal MMD matrix: `1/(n_s n_s)` on source pairs, `1/(n_t n_t)` on
    /// target pairs, `-1/(n_s n_t)` across.
    pub fn marginal(n_s: usize, n_t: usize) -> Result<Self> {
        if n_s == 0 || n_t == 0 {
            return Err(Error::InvalidData(
                "both domains need at least one sample".into(),
            ));
        }
        let mut coeffs = Vec::with_capacity(n_s + n_t);
        for i in 0..n_s {
            coeffs.push((i, 1.0 / n_s as f64));
        }
        for j in 0..n_t {
            coeffs.push((n_s + j, -1.0 / n_t as f64));
        }
        Ok(MmdMatrix {
            kind: MmdKind::Marginal,
            n: n_s + n_t,
            coeffs,
        })
    }

    /// Class-wise MMD matrix for `class` under the given pseudo-labels.
    ///
    /// When the class is empty in either domain the matrix is all-zero and
    /// the class is skipped for this round.
    pub fn class_wise(
        pseudo_source: &[usize],
        pseudo_target: &[usize],
        class: usize,
    ) -> Self {
        let n_s = pseudo_source.len();
        let n = n_s + pseudo_target.len();
        let src: Vec<usize> = pseudo_source
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i)
            .collect();
        let tgt: Vec<usize> = pseudo_target
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(j, _)| n_s + j)
            .collect();
        if src.is_empty() || tgt.is_empty() {
            return MmdMatrix {
                kind: MmdKind::Class(class),
                n,
                coeffs: Vec::new(),
            };
        }
        let mut coeffs = Vec::with_capacity(src.len() + tgt.len());
        for i in src.iter() {
            coeffs.push((*i, 1.0 / src.len() as f64));
        }
        for j in tgt.iter() {
            coeffs.push((*j, -1.0 / tgt.len() as f64));
        }
        MmdMatrix {
            kind: MmdKind::Class(class),
            n,
            coeffs,
        }
    }

    pub fn kind(&self) -> MmdKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when the class was skipped (empty in one domain).
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coeffs
    }

    /// Dense `v` with `M = v v^T`.
    pub fn coefficient_vector(&self) -> Array1<f64> {
        let mut v = Array1::zeros(self.n);
        for &(i, c) in &self.coeffs {
            v[i] = c;
        }
        v
    }

    /// Materializes the full `n x n` matrix (tests and small problems only).
    pub fn to_dense(&self) -> Array2<f64> {
        let v = self.coefficient_vector();
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            if v[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                m[(i, j)] = v[i] * v[j];
            }
        }
        m
    }

    /// `tr(A^T X M X^T A) = ||A^T X v||^2` for the embedding `Z = A^T X`.
    pub fn projected_trace(&self, embedded: ArrayView2<'_, f64>) -> f64 {
        if embedded.ncols() != self.n {
            return f64::NAN;
        }
        let zv = self.apply_to_columns(embedded);
        zv.dot(&zv)
    }

    /// `X M X^T` as the rank-one outer product `(X v)(X v)^T`.
    pub fn lifted(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let xv = self.apply_to_columns(x);
        let m = x.nrows();
        let mut out = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = xv[i] * xv[j];
            }
        }
        out
    }

    /// `X v` without materializing `v` densely.
    fn apply_to_columns(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let mut out = Array1::zeros(x.nrows());
        for &(j, c) in &self.coeffs {
            out.scaled_add(c, &x.column(j));
        }
        out
    }
}

/// Builds the marginal matrix plus one class-wise matrix per class.
pub fn mmd_family(
    pseudo_source: &[usize],
    pseudo_target: &[usize],
    class_count: usize,
) -> Result<Vec<MmdMatrix>> {
    let mut out = Vec::with_capacity(class_count + 1);
    out.push(MmdMatrix::marginal(pseudo_source.len(), pseudo_target.len())?);
    for c in 0..class_count {
        out.push(MmdMatrix::class_wise(pseudo_source, pseudo_target, c));
    }
    Ok(out)
}

/// Nonnegative map `G` from samples to cluster centroids; `X G` lists the
/// centroid of each class when `G` is built from hard labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidMap {
    values: Array2<f64>,
}

impl CentroidMap {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidData(format!(
                "centroid map entry {v} at ({i}, {j}) is negative or non-finite"
            )));
        }
        Ok(CentroidMap { values })
    }

    /// `G = F (F^T F)^{-1}` for a hard label matrix: column `c` holds
    /// `1/n_c` on the members of class `c`. Empty classes get a zero column.
    pub fn from_hard_labels(f: &LabelMatrix) -> Self {
        let hard = f.hard_labels();
        let c = f.class_count();
        let mut counts = vec![0usize; c];
        // Rows that are entirely zero belong to no class.
        let mut assigned = vec![false; f.len()];
        for (i, row) in f.values().rows().into_iter().enumerate() {
            if row.iter().any(|&v| v > 0.0) {
                assigned[i] = true;
                counts[hard[i]] += 1;
            }
        }
        let mut values = Array2::zeros((f.len(), c));
        for i in 0..f.len() {
            if assigned[i] && counts[hard[i]] > 0 {
                values[(i, hard[i])] = 1.0 / counts[hard[i]] as f64;
            }
        }
        CentroidMap { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn class_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Symmetric positive semidefinite within-class scatter.
#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    values: Array2<f64>,
}

impl ScatterMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn zeros(dim: usize) -> Self {
        ScatterMatrix {
            values: Array2::zeros((dim, dim)),
        }
    }
}

/// Within-class scatter `S_w = sum_c sum_{i in c} (x_i - m_c)(x_i - m_c)^T`,
/// computed through the matrix form `(X - X G F^T)(X - X G F^T)^T` with `G`
/// the hard-label centroid map. Empty classes contribute nothing.
pub fn intra_class_scatter(x: ArrayView2<'_, f64>, f: &LabelMatrix) -> Result<ScatterMatrix> {
    if x.ncols() != f.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} label rows",
            x.ncols(),
            f.len()
        )));
    }
    let g = CentroidMap::from_hard_labels(f);
    let centroids = x.dot(g.values()); // m x C
    let residual = &x - &centroids.dot(&f.values().t());
    let mut values = residual.dot(&residual.t());
    // Exact symmetry despite accumulation order.
    let transposed = values.t().to_owned();
    values += &transposed;
    values.mapv_inplace(|v| 0.5 * v);
    Ok(ScatterMatrix { values })
}

/// Projected-clustering loss `||A^T X - A^T X G F^T||_F^2`.
pub fn projected_clustering_loss(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    g: &CentroidMap,
    f: &LabelMatrix,
) -> f64 {
    let z = a.t().dot(&x);
    let centroids = z.dot(g.values());
    let residual = &z - &centroids.dot(&f.values().t());
    residual.iter().map(|v| v * v).sum()
}

/// Conditional MMD in centroid form: `||A^T X_s G_s - A^T X_t G_t||_F^2`.
pub fn conditional_mmd_centroid_form(
    a: ArrayView2<'_, f64>,
    x_s: ArrayView2<'_, f64>,
    x_t: ArrayView2<'_, f64>,
    g_s: &CentroidMap,
    g_t: &CentroidMap,
) -> f64 {
    let cs = a.t().dot(&x_s).dot(g_s.values());
    let ct = a.t().dot(&x_t).dot(g_t.values());
    let diff = &cs - &ct;
    diff.iter().map(|v| v * v).sum()
}
