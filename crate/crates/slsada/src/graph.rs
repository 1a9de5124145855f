//! k-nearest-neighbor similarity graph over embedded samples, the
//! block-partitioned graph Laplacian, and closed-form harmonic label
//! propagation.
//!
//! Nodes are ordered source-first (labeled source columns before unlabeled
//! ones), then target, matching the column ordering of [`crate::dataset::DomainPair`].

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Factorize, Solve};

use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

/// Symmetric nonnegative kNN affinity graph with heat-kernel weights.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    /// Per-node neighbor list, sorted by neighbor index; stores each
    /// undirected edge on both endpoints.
    adjacency: Vec<Vec<(usize, f64)>>,
    neighbor_count: usize,
    bandwidth: f64,
}

impl SimilarityGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbor_count(&self) -> usize {
        self.neighbor_count
    }

    /// Heat-kernel scale chosen when the graph was built.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.adjacency[i].binary_search_by_key(&j, |&(n, _)| n) {
            Ok(pos) => self.adjacency[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut w = Array2::zeros((n, n));
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &(j, v) in nbrs {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Builds a graph from an explicit symmetric weight matrix (used by
    /// tests and by callers that precompute affinities).
    pub fn from_dense(w: &Array2<f64>, neighbor_count: usize, bandwidth: f64) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Dimension(format!(
                "weight matrix must be square, got {}x{}",
                n,
                w.ncols()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::InvalidData(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidData(format!(
                        "weight at ({i}, {j}) is negative or non-finite"
                    )));
                }
                if (v - w[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidData(format!(
                        "asymmetric weights at ({i}, {j})"
                    )));
                }
                if v > 0.0 {
                    adjacency[i].push((j, v));
                }
            }
        }
        Ok(SimilarityGraph {
            adjacency,
            neighbor_count,
            bandwidth,
        })
    }

    /// Debug dump of the dense weight matrix as CSV.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let w = self.to_dense();
        let mut out = String::new();
        for row in w.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Connects each sample to its `neighbor_count` nearest neighbors by
/// Euclidean distance in the embedding (columns of `embedded`), weights
/// `exp(-d^2 / (2 sigma^2))` with `sigma` the median neighbor distance,
/// symmetrized by elementwise max.
pub fn build_knn_graph(embedded: ArrayView2<'_, f64>, neighbor_count: usize) -> Result<SimilarityGraph> {
    let n = embedded.ncols();
    if neighbor_count == 0 {
        return Err(Error::InvalidData("neighbor_count must be >= 1".into()));
    }
    if n <= neighbor_count {
        return Err(Error::InvalidData(format!(
            "need more samples ({n}) than neighbors ({neighbor_count})"
        )));
    }

    // Exact all-pairs distances; desk scale keeps n small.
    let gram: Vec<f64> = (0..n)
        .map(|j| embedded.column(j).dot(&embedded.column(j)))
        .collect();
    let mut dist2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = (gram[i] + gram[j] - 2.0 * embedded.column(i).dot(&embedded.column(j))).max(0.0);
            dist2[(i, j)] = d2;
            dist2[(j, i)] = d2;
        }
    }

    let mut knn: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut neighbor_dists: Vec<f64> = Vec::with_capacity(n * neighbor_count);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist2[(i, a)]
                .partial_cmp(&dist2[(i, b)])
                .unwrap()
                .then(a.cmp(&b))
        });
        order.truncate(neighbor_count);
        for &j in &order {
            neighbor_dists.push(dist2[(i, j)].sqrt());
        }
        knn.push(order);
    }

    neighbor_dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = neighbor_dists.len() / 2;
    let median = if neighbor_dists.len() % 2 == 1 {
        neighbor_dists[mid]
    } else {
        0.5 * (neighbor_dists[mid - 1] + neighbor_dists[mid])
    };
    // Duplicate-heavy clouds can drive the median to 0; any positive scale
    // keeps exp(-0) = 1 for the coincident pairs.
    let bandwidth = if median > 0.0 { median } else { 1.0 };

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let denom = 2.0 * bandwidth * bandwidth;
    for (i, nbrs) in knn.iter().enumerate() {
        for &j in nbrs {
            let w = (-dist2[(i, j)] / denom).exp();
            upsert_max(&mut adjacency[i], j, w);
            upsert_max(&mut adjacency[j], i, w);
        }
    }
    for nbrs in &mut adjacency {
        nbrs.sort_by_key(|&(j, _)| j);
    }

    Ok(SimilarityGraph {
        adjacency,
        neighbor_count,
        bandwidth,
    })
}

fn upsert_max(list: &mut Vec<(usize, f64)>, j: usize, w: f64) {
    match list.iter_mut().find(|(n, _)| *n == j) {
        Some((_, existing)) => *existing = existing.max(w),
        None => list.push((j, w)),
    }
}

/// Graph Laplacian `L = D - W` with named views of the source/target and
/// labeled/unlabeled blocks.
#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    full: Array2<f64>,
    n_s: usize,
    n_sl: usize,
}

impl GraphLaplacian {
    pub fn full(&self) -> &Array2<f64> {
        &self.full
    }

    pub fn node_count(&self) -> usize {
        self.full.nrows()
    }

    pub fn source_count(&self) -> usize {
        self.n_s
    }

    pub fn labeled_count(&self) -> usize {
        self.n_sl
    }

    pub fn unlabeled_source_count(&self) -> usize {
        self.n_s - self.n_sl
    }

    pub fn target_count(&self) -> usize {
        self.node_count() - self.n_s
    }

    /// L_ss: source x source.
    pub fn source_block(&self) -> ArrayView2<'_, f64> {
        self.full.slice(ndarray::s![..self.n_s, ..self.n_s])
    }

    /// L_st: source x target.
    pub fn source_target_block(&self) -> ArrayView2<'_, f64> {
        self.full.slice(ndarray::s![..self.n_s, self.n_s..])
    }

    /// L_ts: target x source.
    pub fn target_source_block(&self) -> ArrayView2<'_, f64> {
        self.full.slice(ndarray::s![self.n_s.., ..self.n_s])
    }

    /// L_tt: target x target.
    pub fn target_block(&self) -> ArrayView2<'_, f64> {
        self.full.slice(ndarray::s![self.n_s.., self.n_s..])
    }

    /// L_ss^ll: labeled x labeled corner of the source block.
    pub fn source_labeled_block(&self) -> ArrayView2<'_, f64> {
        self.full.slice(ndarray::s![..self.n_sl, ..self.n_sl])
    }

    /// L_ss^lu: labeled x unlabeled.
    pub fn source_labeled_unlabeled_block(&self) -> ArrayView2<'_, f64> {
        self.full
            .slice(ndarray::s![..self.n_sl, self.n_sl..self.n_s])
    }

    /// L_ss^ul: unlabeled x labeled.
    pub fn source_unlabeled_labeled_block(&self) -> ArrayView2<'_, f64> {
        self.full
            .slice(ndarray::s![self.n_sl..self.n_s, ..self.n_sl])
    }

    /// L_ss^uu: unlabeled x unlabeled corner of the source block.
    pub fn source_unlabeled_block(&self) -> ArrayView2<'_, f64> {
        self.full
            .slice(ndarray::s![self.n_sl..self.n_s, self.n_sl..self.n_s])
    }
}

/// Assembles `L = D - W` where `D` holds the column sums of `W`.
pub fn build_laplacian(graph: &SimilarityGraph, n_s: usize, n_sl: usize) -> Result<GraphLaplacian> {
    let n = graph.node_count();
    if n_s > n || n_sl > n_s {
        return Err(Error::Dimension(format!(
            "partition n_sl={n_sl} <= n_s={n_s} <= n={n} violated"
        )));
    }
    let mut full = Array2::zeros((n, n));
    for i in 0..n {
        let mut degree = 0.0;
        for &(j, w) in graph.neighbors(i) {
            full[(i, j)] = -w;
            degree += w;
        }
        full[(i, i)] = degree;
    }
    Ok(GraphLaplacian { full, n_s, n_sl })
}

/// Harmonic label propagation: solves the clamped minimizer
/// `F_u = -(L_uu)^-1 L_ul Y_l` of the Laplacian quadratic form.
///
/// A small ridge (`1e-10 * trace(L_uu) / n_u`) keeps disconnected unlabeled
/// components solvable while staying below the harmonic-residual tolerance;
/// a system that stays singular is surfaced as an error.
pub fn propagate_labels(
    l_uu: ArrayView2<'_, f64>,
    l_ul: ArrayView2<'_, f64>,
    labeled: &LabelMatrix,
) -> Result<LabelMatrix> {
    let n_u = l_uu.nrows();
    if l_uu.ncols() != n_u {
        return Err(Error::Dimension("L_uu must be square".into()));
    }
    if l_ul.nrows() != n_u || l_ul.ncols() != labeled.len() {
        return Err(Error::Dimension(format!(
            "L_ul is {}x{}, expected {}x{}",
            l_ul.nrows(),
            l_ul.ncols(),
            n_u,
            labeled.len()
        )));
    }
    if n_u == 0 {
        return LabelMatrix::new(Array2::zeros((0, labeled.class_count())));
    }
    crate::solver::pin_blas_threads();

    let trace: f64 = l_uu.diag().sum();
    let ridge = 1e-10 * trace / n_u as f64;
    let mut system = l_uu.to_owned();
    for i in 0..n_u {
        system[(i, i)] += ridge;
    }

    let rhs = -l_ul.dot(labeled.values());
    let factorized = system.factorize().map_err(|e| {
        Error::Numerical(format!(
            "label propagation system is singular even with ridge {ridge:.3e} \
             (unlabeled nodes may be disconnected; increase the ridge or check \
             graph connectivity): {e}"
        ))
    })?;

    let c = labeled.class_count();
    let mut f_u = Array2::zeros((n_u, c));
    for k in 0..c {
        let col: Array1<f64> = rhs.column(k).to_owned();
        let sol = factorized.solve(&col).map_err(|e| {
            Error::Numerical(format!(
                "label propagation solve failed for class {k} (ridge {ridge:.3e}): {e}"
            ))
        })?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "label propagation produced non-finite values for class {k}; \
                 increase the ridge or check graph connectivity"
            )));
        }
        f_u.column_mut(k).assign(&sol);
    }
    // Harmonic soft labels are convex combinations of one-hot rows up to
    // ridge-sized error; clip the inevitable -1e-16 noise.
    f_u.mapv_inplace(|v| v.max(0.0));
    LabelMatrix::new(f_u)
}
