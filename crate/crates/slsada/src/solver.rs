//! Alternating optimization: a constrained eigen-step for the shared
//! projection, multiplicative updates for the centroid maps and soft label
//! matrices, and the outer loop tying them together with graph label
//! propagation for initialization.
//!
//! Update-rule sign convention: every multiplicative rule is the standard
//! KKT-derived split `X <- X .* sqrt(negative-gradient-part /
//! positive-gradient-part)`, where a matrix `T` with mixed signs contributes
//! its entrywise positive part `[T]+` and the magnitude of its negative part
//! `[T]-`. Each rule keeps its variable entrywise nonnegative and does not
//! increase its own sub-objective; the descent property is enforced by tests
//! rather than assumed.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Eigh, SolveTriangular, UPLO};
use ndarray_linalg::triangular::Diag;
use serde::{Deserialize, Serialize};

use crate::alignment::{intra_class_scatter, mmd_family, CentroidMap, MmdMatrix, ScatterMatrix};
use crate::dataset::{DomainPair, LabelMatrix};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, build_laplacian, propagate_labels, GraphLaplacian, SimilarityGraph};

/// Projection `A` mapping features into the shared `k`-dimensional subspace.
///
/// After every eigen-step `A^T X X^T A = I_k` holds to working precision
/// (the generalized-orthogonality constraint; `X` is the jointly centered
/// concatenation of both domains).
#[derive(Debug, Clone)]
pub struct Projection {
    values: Array2<f64>,
}

impl Projection {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("projection has non-finite entries".into()));
        }
        Ok(Projection { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn feature_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.values.ncols()
    }

    /// Embeds samples: `Z = A^T X`.
    pub fn embed(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.values.t().dot(&x)
    }
}

/// When the similarity graph is refreshed from the current embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSchedule {
    /// Rebuild from the new embedding every outer iteration (default).
    Rebuild,
    /// Keep the initialization graph for the whole run.
    Frozen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Subspace dimension `k`.
    pub subspace_dim: usize,
    /// Weight of the projected-clustering term.
    pub clustering_weight: f64,
    /// Scale regularizer on the projection.
    pub scale_regularizer: f64,
    /// Outer iterations `T`.
    pub iterations: usize,
    /// Multiplicative-update passes per outer iteration.
    pub inner_updates: usize,
    pub neighbor_count: usize,
    /// Guard added to every multiplicative denominator.
    pub epsilon: f64,
    pub graph_schedule: GraphSchedule,
    pub seed: u64,
    /// Ablation switch: include the class-wise alignment terms.
    pub conditional_alignment: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::small_preset()
    }
}

impl SolverConfig {
    /// Defaults for small benchmarks: k=20, lambda=0.05, gamma=0.01, T=5,
    /// 20-nearest-neighbor graph.
    pub fn small_preset() -> Self {
        SolverConfig {
            subspace_dim: 20,
            clustering_weight: 0.01,
            scale_regularizer: 0.05,
            iterations: 5,
            inner_updates: 1,
            neighbor_count: 20,
            epsilon: 1e-12,
            graph_schedule: GraphSchedule::Rebuild,
            seed: 0,
            conditional_alignment: true,
        }
    }

    /// Defaults for larger corpora with more categories: k=100, lambda=0.1.
    pub fn large_preset() -> Self {
        SolverConfig {
            subspace_dim: 100,
            scale_regularizer: 0.1,
            ..SolverConfig::small_preset()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subspace_dim == 0 {
            return Err(Error::InvalidData("subspace_dim must be >= 1".into()));
        }
        if !(self.clustering_weight >= 0.0) {
            return Err(Error::InvalidData(format!(
                "clustering weight must be >= 0, got {}",
                self.clustering_weight
            )));
        }
        if !(self.scale_regularizer > 0.0) {
            return Err(Error::InvalidData(format!(
                "scale regularizer must be > 0, got {}",
                self.scale_regularizer
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidData("iterations must be >= 1".into()));
        }
        if self.inner_updates == 0 {
            return Err(Error::InvalidData("inner_updates must be >= 1".into()));
        }
        if self.neighbor_count == 0 {
            return Err(Error::InvalidData("neighbor_count must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidData("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Entries below this after an initialization step are raised to it, so the
/// multiplicative rules are not locked at exact zeros.
const ZERO_FLOOR: f64 = 1e-15;

extern "C" {
    fn openblas_set_num_threads(n: core::ffi::c_int);
}

static BLAS_PIN: std::sync::Once = std::sync::Once::new();

/// Runs BLAS single-threaded unless the caller configured it explicitly.
///
/// Threaded BLAS inside concurrent experiment repeats oversubscribes cores
/// and its worker stacks overflow; one thread also keeps reductions
/// deterministic.
pub(crate) fn pin_blas_threads() {
    BLAS_PIN.call_once(|| {
        if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
            unsafe { openblas_set_num_threads(1) };
        }
    });
}

/// Bundle of all optimization variables plus the recorded objective trace.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    pub projection: Projection,
    pub g_s: CentroidMap,
    pub g_t: CentroidMap,
    /// Soft source labels; rows `0..n_sl` stay bit-equal to the given
    /// one-hot labels through every update.
    pub f_s: LabelMatrix,
    pub f_t: LabelMatrix,
    pub objective_trace: Vec<f64>,
    pub iteration: usize,
}

/// One line of the per-iteration diagnostic log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `||A^T X X^T A - I_k||_F` after the eigen-step.
    pub constraint_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_accuracy: Option<f64>,
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: AdaptationState,
    /// Hard labels for the unlabeled source block, in the pair's
    /// (labeled-first) column order.
    pub source_unlabeled_predictions: Vec<usize>,
    pub target_predictions: Vec<usize>,
    pub iteration_log: Vec<IterationRecord>,
    /// Which multiplicative-rule variants ran, for the run report.
    pub update_rule_variant: String,
}

impl RunOutput {
    /// Hard labels for every source sample (clamped labels first).
    pub fn source_full_predictions(&self, pair: &DomainPair) -> Vec<usize> {
        let mut out = pair.labeled_classes();
        out.extend_from_slice(&self.source_unlabeled_predictions);
        out
    }
}

pub fn positive_part(t: &Array2<f64>) -> Array2<f64> {
    t.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Keeps the nonpositive entries, so `positive_part(t) + negative_part(t) == t`.
pub fn negative_part(t: &Array2<f64>) -> Array2<f64> {
    t.mapv(|v| if v < 0.0 { v } else { 0.0 })
}

fn negative_magnitude(t: &Array2<f64>) -> Array2<f64> {
    t.mapv(|v| if v < 0.0 { -v } else { 0.0 })
}

/// `K_ms`: the lifted MMD terms plus the weighted scatter matrices and the
/// scale regularizer, `sum_c X M_c X^T + gamma (S_w_s + S_w_t) + lambda I`.
pub fn assemble_kms(
    x: ArrayView2<'_, f64>,
    mmd: &[MmdMatrix],
    scatters: Option<(&ScatterMatrix, &ScatterMatrix)>,
    gamma: f64,
    lambda: f64,
) -> Result<Array2<f64>> {
    let m = x.nrows();
    let mut k_ms = Array2::zeros((m, m));
    for matrix in mmd {
        if matrix.is_zero() {
            continue;
        }
        if matrix.dim() != x.ncols() {
            return Err(Error::Dimension(format!(
                "MMD matrix over {} samples but X has {} columns",
                matrix.dim(),
                x.ncols()
            )));
        }
        let mut xv = Array1::<f64>::zeros(m);
        for &(j, c) in matrix.coefficients() {
            xv.scaled_add(c, &x.column(j));
        }
        for i in 0..m {
            let vi = xv[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..m {
                k_ms[(i, j)] += vi * xv[j];
            }
        }
    }
    if let Some((s_w_s, s_w_t)) = scatters {
        if s_w_s.dim() != m || s_w_t.dim() != m {
            return Err(Error::Dimension(format!(
                "scatter matrices are {}x{} and {}x{}, expected {m}x{m}",
                s_w_s.dim(),
                s_w_s.dim(),
                s_w_t.dim(),
                s_w_t.dim()
            )));
        }
        k_ms.scaled_add(gamma, s_w_s.values());
        k_ms.scaled_add(gamma, s_w_t.values());
    }
    for i in 0..m {
        k_ms[(i, i)] += lambda;
    }
    Ok(k_ms)
}

/// Solves the constrained eigen-step: the `k` generalized eigenvectors of
/// `K_ms a = mu (X X^T + ridge I) a` with the smallest eigenvalues,
/// normalized so `A^T (X X^T + ridge I) A = I_k`.
///
/// The ridge starts at `1e-10 * trace(X X^T) / m` and escalates up to
/// `1e-6 * trace / m` if the Cholesky factorization of the pencil fails
/// (rank-deficient `X X^T` when `m > n`).
pub fn solve_projection(
    k_ms: &Array2<f64>,
    x: ArrayView2<'_, f64>,
    k: usize,
) -> Result<(Projection, Vec<f64>)> {
    pin_blas_threads();
    let m = x.nrows();
    if k_ms.nrows() != m || k_ms.ncols() != m {
        return Err(Error::Dimension(format!(
            "K_ms is {}x{}, expected {m}x{m}",
            k_ms.nrows(),
            k_ms.ncols()
        )));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidData(format!(
            "subspace dimension k={k} must satisfy 1 <= k <= m={m}"
        )));
    }

    let xxt = x.dot(&x.t());
    let trace: f64 = xxt.diag().sum();
    let ridge_base = if trace > 0.0 { trace / m as f64 } else { 1.0 };

    let mut cholesky = None;
    let mut last_err = String::new();
    for factor in [1e-10, 1e-8, 1e-6] {
        let mut b = xxt.clone();
        for i in 0..m {
            b[(i, i)] += factor * ridge_base;
        }
        match b.cholesky(UPLO::Lower) {
            Ok(l) => {
                cholesky = Some(l);
                break;
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    let l = cholesky.ok_or_else(|| {
        let dmax = xxt.diag().fold(f64::MIN, |a, &b| a.max(b));
        let dmin = xxt.diag().fold(f64::MAX, |a, &b| a.min(b));
        Error::Numerical(format!(
            "pencil factorization failed even with ridge 1e-6*trace/m \
             (diagonal range [{dmin:.3e}, {dmax:.3e}]): {last_err}"
        ))
    })?;

    // C = L^-1 K L^-T, then a standard symmetric eigenproblem.
    let y = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, k_ms)
        .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
    let w = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &y.t().to_owned())
        .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
    let mut c = w.t().to_owned();
    let ct = c.t().to_owned();
    c += &ct;
    c.mapv_inplace(|v| 0.5 * v);

    let (eigenvalues, eigenvectors) = c.eigh(UPLO::Lower).map_err(|e| {
        let dmax = c.diag().fold(f64::MIN, |a, &b| a.max(b));
        let dmin = c.diag().fold(f64::MAX, |a, &b| a.min(b));
        Error::Numerical(format!(
            "eigendecomposition failed (reduced diagonal range [{dmin:.3e}, {dmax:.3e}]): {e}"
        ))
    })?;

    let selected = eigenvectors.slice(s![.., ..k]).to_owned();
    let lt = l.t().to_owned();
    let a = lt
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &selected)
        .map_err(|e| Error::Numerical(format!("back-substitution failed: {e}")))?;

    Ok((Projection::new(a)?, eigenvalues.slice(s![..k]).to_vec()))
}

/// `||A^T X X^T A - I_k||_F`, the generalized-orthogonality residual.
pub fn projection_constraint_residual(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> f64 {
    let z = a.t().dot(&x);
    let mut gram = z.dot(&z.t());
    for i in 0..gram.nrows() {
        gram[(i, i)] -= 1.0;
    }
    gram.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_finite(name: &str, values: &Array2<f64>, epsilon: f64) -> Result<()> {
    if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "{name} update produced {v} at ({i}, {j}); current epsilon {epsilon:.1e}"
        )));
    }
    Ok(())
}

/// Shared core of the centroid-map rules: one KKT-split multiplicative step
/// for `G` of the domain whose gram matrices are supplied.
fn centroid_update_core(
    g: &Array2<f64>,
    other_g: &Array2<f64>,
    f: &Array2<f64>,
    self_gram: &Array2<f64>,
    cross_gram: &Array2<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    let t1p = positive_part(self_gram);
    let t1n = negative_magnitude(self_gram);
    let t2p = positive_part(cross_gram);
    let t2n = negative_magnitude(cross_gram);
    let t3 = f.t().dot(f);

    let t1n_g = t1n.dot(g);
    let t1p_g = t1p.dot(g);
    let mut numerator = t2p.dot(other_g) + &t1n_g;
    numerator.scaled_add(gamma, &t1p.dot(f));
    numerator.scaled_add(gamma, &t1n_g.dot(&t3));
    let mut denominator = t2n.dot(other_g) + &t1p_g;
    denominator.scaled_add(gamma, &t1n.dot(f));
    denominator.scaled_add(gamma, &t1p_g.dot(&t3));

    let mut out = g.clone();
    ndarray::Zip::from(&mut out)
        .and(&numerator)
        .and(&denominator)
        .for_each(|g_ij, &n, &d| {
            *g_ij *= (n / (d + epsilon)).sqrt();
        });
    check_finite("centroid map", &out, epsilon)?;
    Ok(out)
}

/// Multiplicative update of the source centroid map.
pub fn update_gs(
    g_s: &Array2<f64>,
    g_t: &Array2<f64>,
    f_s: &Array2<f64>,
    source_gram: &Array2<f64>,
    cross_gram: &Array2<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    centroid_update_core(g_s, g_t, f_s, source_gram, cross_gram, gamma, epsilon)
}

/// Multiplicative update of the target centroid map (source rule with the
/// domain roles swapped).
pub fn update_gt(
    g_t: &Array2<f64>,
    g_s: &Array2<f64>,
    f_t: &Array2<f64>,
    target_gram: &Array2<f64>,
    cross_gram: &Array2<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    centroid_update_core(g_t, g_s, f_t, target_gram, cross_gram, gamma, epsilon)
}

/// Shared core of the label rules: one KKT-split multiplicative step for a
/// soft label block coupled to the graph through `l_self` and `l_cross`.
fn label_update_core(
    f: &Array2<f64>,
    anchor: &Array2<f64>,
    k1: &Array2<f64>,
    k2: &Array2<f64>,
    l_self: ArrayView2<'_, f64>,
    l_cross: ArrayView2<'_, f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    let l_self_owned = l_self.to_owned();
    let l_cross_owned = l_cross.to_owned();
    let lsp = positive_part(&l_self_owned);
    let lsn = negative_magnitude(&l_self_owned);
    let lcp = positive_part(&l_cross_owned);
    let lcn = negative_magnitude(&l_cross_owned);
    let k1p = positive_part(k1);
    let k1n = negative_magnitude(k1);
    let k2p = positive_part(k2);
    let k2n = negative_magnitude(k2);

    let mut numerator = lsn.dot(f) + lcn.dot(anchor);
    numerator.scaled_add(gamma, &k1p);
    numerator.scaled_add(gamma, &f.dot(&k2n));
    let mut denominator = lsp.dot(f) + lcp.dot(anchor);
    denominator.scaled_add(gamma, &k1n);
    denominator.scaled_add(gamma, &f.dot(&k2p));

    let mut out = f.clone();
    ndarray::Zip::from(&mut out)
        .and(&numerator)
        .and(&denominator)
        .for_each(|f_ij, &n, &d| {
            *f_ij *= (n / (d + epsilon)).sqrt();
        });
    check_finite("label matrix", &out, epsilon)?;
    Ok(out)
}

/// Multiplicative update of the unlabeled source label block.
///
/// `k1 = X_s^u^T A A^T X_s G_s`, `k2 = G_s^T X_s^T A A^T X_s G_s`; the
/// labeled block is excluded and stays clamped.
pub fn update_fsu(
    f_su: &Array2<f64>,
    y_l: &Array2<f64>,
    k1: &Array2<f64>,
    k2: &Array2<f64>,
    l_uu: ArrayView2<'_, f64>,
    l_ul: ArrayView2<'_, f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    label_update_core(f_su, y_l, k1, k2, l_uu, l_ul, gamma, epsilon)
}

/// Multiplicative update of the target label matrix, derived from the KKT
/// stationarity of the target-label terms by exact analogy with the source
/// rule. The printed form of this rule has identical numerator and
/// denominator and is kept as [`update_ft_literal_printed`] for reference.
pub fn update_ft(
    f_t: &Array2<f64>,
    f_s: &Array2<f64>,
    k3: &Array2<f64>,
    k4: &Array2<f64>,
    l_tt: ArrayView2<'_, f64>,
    l_ts: ArrayView2<'_, f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array2<f64>> {
    label_update_core(f_t, f_s, k3, k4, l_tt, l_ts, gamma, epsilon)
}

/// The target-label rule exactly as printed: numerator and denominator are
/// the same expression, so the step is an elementwise no-op. Kept (and
/// tested) to document why the derived rule above is used instead.
pub fn update_ft_literal_printed(
    f_t: &Array2<f64>,
    f_s: &Array2<f64>,
    k3: &Array2<f64>,
    k4: &Array2<f64>,
    l_tt: ArrayView2<'_, f64>,
    l_ts: ArrayView2<'_, f64>,
    gamma: f64,
) -> Array2<f64> {
    let expression = |f: &Array2<f64>| -> Array2<f64> {
        let mut e = negative_magnitude(&l_tt.to_owned()).dot(f)
            + negative_magnitude(&l_ts.to_owned()).dot(f_s);
        e.scaled_add(gamma, &positive_part(k3));
        e.scaled_add(gamma, &f.dot(&negative_magnitude(k4)));
        e
    };
    let numerator = expression(f_t);
    let denominator = expression(f_t);
    let mut out = f_t.clone();
    ndarray::Zip::from(&mut out)
        .and(&numerator)
        .and(&denominator)
        .for_each(|f_ij, &n, &d| {
            if d != 0.0 {
                *f_ij *= (n / d).sqrt();
            }
            // 0/0 cells keep their value: still a no-op.
        });
    out
}

/// Sub-objective minimized by a centroid-map update: centroid calibration
/// plus the weighted reconstruction term of the same domain.
pub fn centroid_objective(
    z_own: ArrayView2<'_, f64>,
    z_other: ArrayView2<'_, f64>,
    g_own: &Array2<f64>,
    g_other: &Array2<f64>,
    f_own: &Array2<f64>,
    gamma: f64,
) -> f64 {
    let own_centroids = z_own.dot(g_own);
    let diff = &own_centroids - &z_other.dot(g_other);
    let calibration: f64 = diff.iter().map(|v| v * v).sum();
    let residual = &z_own - &own_centroids.dot(&f_own.t());
    calibration + gamma * residual.iter().map(|v| v * v).sum::<f64>()
}

/// Sub-objective minimized by a label update: weighted reconstruction plus
/// the graph coupling terms.
pub fn label_objective(
    z_block: ArrayView2<'_, f64>,
    centroids: &Array2<f64>,
    f: &Array2<f64>,
    anchor: &Array2<f64>,
    l_self: ArrayView2<'_, f64>,
    l_cross: ArrayView2<'_, f64>,
    gamma: f64,
) -> f64 {
    let residual = &z_block - &centroids.dot(&f.t());
    let recon: f64 = residual.iter().map(|v| v * v).sum();
    let self_term = (&l_self.dot(f) * f).sum();
    let cross_term = (&l_cross.dot(anchor) * f).sum();
    gamma * recon + self_term + 2.0 * cross_term
}

fn floor_matrix(mut values: Array2<f64>) -> Array2<f64> {
    values.mapv_inplace(|v| if v < ZERO_FLOOR { ZERO_FLOOR } else { v });
    values
}

/// Everything the initialization phase produces: the marginal-only
/// projection, its embedding and graph, and the propagated hard labels.
pub struct InitState {
    /// Jointly centered source features (labeled-first order).
    pub x_s: Array2<f64>,
    /// Jointly centered target features.
    pub x_t: Array2<f64>,
    pub projection: Projection,
    pub embedding: Array2<f64>,
    pub graph: SimilarityGraph,
    pub laplacian: GraphLaplacian,
    /// One-hot (floored) source labels: clamped block then propagated block.
    pub f_s: LabelMatrix,
    /// One-hot (floored) propagated target labels.
    pub f_t: LabelMatrix,
    /// Hard propagated labels for the unlabeled source block.
    pub source_unlabeled_labels: Vec<usize>,
    pub target_labels: Vec<usize>,
}

/// Initialization: marginal-only eigen-step, then graph label propagation
/// from the labeled source block to the unlabeled source block, then from
/// the whole source to the target.
pub fn initialize(pair: &DomainPair, config: &SolverConfig) -> Result<InitState> {
    config.validate()?;
    let centered = pair.center_jointly();
    let m = centered.feature_dim();
    if config.subspace_dim > m {
        return Err(Error::InvalidData(format!(
            "subspace dimension k={} exceeds feature dimension m={m}",
            config.subspace_dim
        )));
    }
    let n_s = centered.source_count();
    let n_sl = centered.labeled_count();
    let class_count = centered.class_count();

    let x_s = centered.source().values().clone();
    let x_t = centered.target().values().clone();
    let x = concatenate![Axis(1), x_s.view(), x_t.view()];

    let m0 = MmdMatrix::marginal(n_s, centered.target_count())?;
    let k_init = assemble_kms(
        x.view(),
        std::slice::from_ref(&m0),
        None,
        0.0,
        config.scale_regularizer,
    )?;
    let (projection, _) = solve_projection(&k_init, x.view(), config.subspace_dim)?;
    let embedding = projection.embed(x.view());

    let graph = build_knn_graph(embedding.view(), config.neighbor_count)?;
    let laplacian = build_laplacian(&graph, n_s, n_sl)?;

    let y_l = centered.source_labels().clone();
    let propagated_source = propagate_labels(
        laplacian.source_unlabeled_block(),
        laplacian.source_unlabeled_labeled_block(),
        &y_l,
    )?;
    let source_unlabeled_labels = propagated_source.hard_labels();

    let mut source_classes = centered.labeled_classes();
    source_classes.extend_from_slice(&source_unlabeled_labels);
    let f_s_hard = LabelMatrix::from_hard_labels(&source_classes, class_count)?;

    let propagated_target = propagate_labels(
        laplacian.target_block(),
        laplacian.target_source_block(),
        &f_s_hard,
    )?;
    let target_labels = propagated_target.hard_labels();

    // The optimization variables start at the soft harmonic values (their
    // label-subproblem minimizers), not at the hardened labels: one-hot
    // starting points are far from harmonic and a single multiplicative
    // pass per iteration cannot recover the mass they lock at zero.
    let f_s_soft = concatenate![
        Axis(0),
        y_l.values().view(),
        propagated_source.values().view()
    ];
    let f_s = clamp_labeled_rows(LabelMatrix::new(floor_matrix(f_s_soft))?, &y_l)?;
    let f_t = LabelMatrix::new(floor_matrix(propagated_target.values().clone()))?;

    Ok(InitState {
        x_s,
        x_t,
        projection,
        embedding,
        graph,
        laplacian,
        f_s,
        f_t,
        source_unlabeled_labels,
        target_labels,
    })
}

/// Restores the labeled block of `f_s` to the exact one-hot labels.
fn clamp_labeled_rows(f_s: LabelMatrix, y_l: &LabelMatrix) -> Result<LabelMatrix> {
    let mut values = f_s.values().clone();
    values
        .slice_mut(s![..y_l.len(), ..])
        .assign(y_l.values());
    LabelMatrix::new(values)
}

fn accuracy_against(truth: &[usize], predicted: &[usize]) -> f64 {
    let correct = truth
        .iter()
        .zip(predicted.iter())
        .filter(|(a, b)| a == b)
        .count();
    correct as f64 / truth.len() as f64
}

/// Runs the full alternating optimization and returns the final state plus
/// hard labels for the unlabeled source block and the target domain.
///
/// The pair is jointly centered internally; the input is not modified.
pub fn run_slsada(pair: &DomainPair, config: &SolverConfig) -> Result<RunOutput> {
    config.validate()?;
    let init = initialize(pair, config)?;

    let n_s = pair.source_count();
    let n_sl = pair.labeled_count();
    let n_t = pair.target_count();
    let class_count = pair.class_count();
    let gamma = config.clustering_weight;
    let lambda = config.scale_regularizer;
    let eps = config.epsilon;

    let x_s = init.x_s;
    let x_t = init.x_t;
    let x = concatenate![Axis(1), x_s.view(), x_t.view()];
    let y_l = pair.source_labels().clone();

    let mut projection = init.projection;
    let mut laplacian = init.laplacian;
    let mut f_s = init.f_s;
    let mut f_t = init.f_t;
    let mut g_s = CentroidMap::from_hard_labels(&f_s);
    let mut g_t = CentroidMap::from_hard_labels(&f_t);

    let mut objective_trace = Vec::with_capacity(config.iterations + 1);
    let mut iteration_log = Vec::with_capacity(config.iterations + 1);

    let record = |iteration: usize,
                  objective: f64,
                  residual: f64,
                  f_s: &LabelMatrix,
                  f_t: &LabelMatrix|
     -> IterationRecord {
        let source_accuracy = pair
            .true_source()
            .map(|truth| accuracy_against(truth, &f_s.hard_labels()));
        let target_accuracy = pair
            .true_target()
            .map(|truth| accuracy_against(truth, &f_t.hard_labels()));
        IterationRecord {
            iteration,
            objective,
            constraint_residual: residual,
            source_accuracy,
            target_accuracy,
        }
    };

    // Trace entry 0: the state right after initialization.
    {
        let hard_s = f_s.hard_labels();
        let hard_t = f_t.hard_labels();
        let mmd = family_for(&hard_s, &hard_t, class_count, config)?;
        let objective = full_objective(
            &projection, &x, &x_s, &x_t, &g_s, &g_t, &f_s, &f_t, &mmd, &laplacian, n_sl, gamma,
            lambda,
        );
        objective_trace.push(objective);
        let residual = projection_constraint_residual(projection.values().view(), x.view());
        iteration_log.push(record(0, objective, residual, &f_s, &f_t));
    }

    for iteration in 1..=config.iterations {
        let step_result: Result<(f64, f64)> = (|| {
            let hard_s = f_s.hard_labels();
            let hard_t = f_t.hard_labels();

            // Scatter and MMD terms from the current hard labels.
            let f_s_hard = LabelMatrix::from_hard_labels(&hard_s, class_count)?;
            let f_t_hard = LabelMatrix::from_hard_labels(&hard_t, class_count)?;
            let s_w_s = intra_class_scatter(x_s.view(), &f_s_hard)?;
            let s_w_t = intra_class_scatter(x_t.view(), &f_t_hard)?;
            let mmd = family_for(&hard_s, &hard_t, class_count, config)?;

            // Eigen-step.
            let k_ms = assemble_kms(x.view(), &mmd, Some((&s_w_s, &s_w_t)), gamma, lambda)?;
            let (new_projection, _) = solve_projection(&k_ms, x.view(), config.subspace_dim)?;
            projection = new_projection;
            let z = projection.embed(x.view());

            if config.graph_schedule == GraphSchedule::Rebuild {
                let graph = build_knn_graph(z.view(), config.neighbor_count)?;
                laplacian = build_laplacian(&graph, n_s, n_sl)?;
            }

            let z_s = z.slice(s![.., ..n_s]);
            let z_t = z.slice(s![.., n_s..]);

            // Centroid maps restart from the current hard labels, then move
            // by multiplicative steps.
            g_s = CentroidMap::new(floor_matrix(
                CentroidMap::from_hard_labels(&f_s).values().clone(),
            ))?;
            g_t = CentroidMap::new(floor_matrix(
                CentroidMap::from_hard_labels(&f_t).values().clone(),
            ))?;

            let source_gram = z_s.t().dot(&z_s);
            let target_gram = z_t.t().dot(&z_t);
            let cross_gram = z_s.t().dot(&z_t);
            let cross_gram_t = cross_gram.t().to_owned();

            for _ in 0..config.inner_updates {
                let new_gs = update_gs(
                    g_s.values(),
                    g_t.values(),
                    f_s.values(),
                    &source_gram,
                    &cross_gram,
                    gamma,
                    eps,
                )?;
                g_s = CentroidMap::new(new_gs)?;
                let new_gt = update_gt(
                    g_t.values(),
                    g_s.values(),
                    f_t.values(),
                    &target_gram,
                    &cross_gram_t,
                    gamma,
                    eps,
                )?;
                g_t = CentroidMap::new(new_gt)?;
            }

            for _ in 0..config.inner_updates {
                let source_centroids = z_s.dot(g_s.values());
                let z_su = z_s.slice(s![.., n_sl..]);
                let k1 = z_su.t().dot(&source_centroids);
                let k2 = source_centroids.t().dot(&source_centroids);
                let f_su = f_s.values().slice(s![n_sl.., ..]).to_owned();
                let new_f_su = update_fsu(
                    &f_su,
                    y_l.values(),
                    &k1,
                    &k2,
                    laplacian.source_unlabeled_block(),
                    laplacian.source_unlabeled_labeled_block(),
                    gamma,
                    eps,
                )?;
                let stacked = concatenate![Axis(0), y_l.values().view(), new_f_su.view()];
                f_s = LabelMatrix::new(stacked)?;

                let target_centroids = z_t.dot(g_t.values());
                let k3 = z_t.t().dot(&target_centroids);
                let k4 = target_centroids.t().dot(&target_centroids);
                let new_f_t = update_ft(
                    f_t.values(),
                    f_s.values(),
                    &k3,
                    &k4,
                    laplacian.target_block(),
                    laplacian.target_source_block(),
                    gamma,
                    eps,
                )?;
                f_t = LabelMatrix::new(new_f_t)?;
            }

            let objective = full_objective(
                &projection, &x, &x_s, &x_t, &g_s, &g_t, &f_s, &f_t, &mmd, &laplacian, n_sl,
                gamma, lambda,
            );
            let residual = projection_constraint_residual(projection.values().view(), x.view());
            Ok((objective, residual))
        })();
        let (objective, residual) = step_result.map_err(|e| e.at_iteration(iteration))?;
        objective_trace.push(objective);
        iteration_log.push(record(iteration, objective, residual, &f_s, &f_t));
    }

    let mut all_source = f_s.hard_labels();
    let source_unlabeled_predictions = all_source.split_off(n_sl);
    let target_predictions = f_t.hard_labels();
    debug_assert_eq!(target_predictions.len(), n_t);

    let state = AdaptationState {
        projection,
        g_s,
        g_t,
        f_s,
        f_t,
        objective_trace,
        iteration: config.iterations,
    };

    Ok(RunOutput {
        state,
        source_unlabeled_predictions,
        target_predictions,
        iteration_log,
        update_rule_variant: UPDATE_RULE_VARIANT.to_string(),
    })
}

/// Human-readable description of the multiplicative-rule variants in use,
/// echoed into run reports.
pub const UPDATE_RULE_VARIANT: &str = "kkt-split (centroid rules as printed; \
target-label rule re-derived from stationarity, printed form is a no-op)";

fn family_for(
    hard_s: &[usize],
    hard_t: &[usize],
    class_count: usize,
    config: &SolverConfig,
) -> Result<Vec<MmdMatrix>> {
    if config.conditional_alignment {
        mmd_family(hard_s, hard_t, class_count)
    } else {
        Ok(vec![MmdMatrix::marginal(hard_s.len(), hard_t.len())?])
    }
}

/// Full objective: weighted clustering terms, marginal and class-wise
/// alignment traces, graph coupling terms, and the projection scale penalty.
#[allow(clippy::too_many_arguments)]
fn full_objective(
    projection: &Projection,
    x: &Array2<f64>,
    x_s: &Array2<f64>,
    x_t: &Array2<f64>,
    g_s: &CentroidMap,
    g_t: &CentroidMap,
    f_s: &LabelMatrix,
    f_t: &LabelMatrix,
    mmd: &[MmdMatrix],
    laplacian: &GraphLaplacian,
    n_sl: usize,
    gamma: f64,
    lambda: f64,
) -> f64 {
    let a = projection.values();
    let z = projection.embed(x.view());
    let z_s = projection.embed(x_s.view());
    let z_t = projection.embed(x_t.view());

    let pc_s = {
        let r = &z_s - &z_s.dot(g_s.values()).dot(&f_s.values().t());
        r.iter().map(|v| v * v).sum::<f64>()
    };
    let pc_t = {
        let r = &z_t - &z_t.dot(g_t.values()).dot(&f_t.values().t());
        r.iter().map(|v| v * v).sum::<f64>()
    };

    let alignment: f64 = mmd.iter().map(|m| m.projected_trace(z.view())).sum();

    let f_su = f_s.values().slice(s![n_sl.., ..]).to_owned();
    let y_l = f_s.values().slice(s![..n_sl, ..]).to_owned();
    let lp = (&laplacian.source_unlabeled_block().dot(&f_su) * &f_su).sum()
        + 2.0 * (&laplacian.source_unlabeled_labeled_block().dot(&y_l) * &f_su).sum()
        + (&laplacian.target_block().dot(f_t.values()) * f_t.values()).sum()
        + 2.0 * (&laplacian.target_source_block().dot(f_s.values()) * f_t.values()).sum();

    let scale: f64 = a.iter().map(|v| v * v).sum();

    gamma * (pc_s + pc_t) + alignment + lp + lambda * scale
}
