//! Built-in oracle checks runnable from the CLI.
//!
//! Each check compares a library computation against an independent
//! brute-force oracle computed here (explicit sums, dense solves, direct
//! mean differences), so a regression in the optimized paths cannot hide.

use ndarray::{concatenate, Array1, Array2, Axis};
use ndarray_linalg::{Factorize, Solve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{
    conditional_mmd_centroid_form, intra_class_scatter, projected_clustering_loss, CentroidMap,
    MmdMatrix,
};
use crate::dataset::LabelMatrix;
use crate::graph::{build_knn_graph, build_laplacian, propagate_labels};
use crate::solver::{
    centroid_objective, label_objective, update_fsu, update_gs,
};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: false,
            detail,
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 - 1.0)
}

fn random_nonneg(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() + 0.05)
}

/// Reconstruction-vs-scatter identity on random hard labelings.
fn check_clustering_scatter_identity() -> CheckResult {
    const NAME: &str = "projected-clustering equals scatter trace";
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m, k, n, classes) = (
            rng.random_range(2..=12),
            rng.random_range(1..=4),
            rng.random_range(6..=30),
            rng.random_range(2..=5),
        );
        let a = random_matrix(&mut rng, m, k);
        let x = random_matrix(&mut rng, m, n);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let f = match LabelMatrix::from_hard_labels(&labels, classes) {
            Ok(f) => f,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let g = CentroidMap::from_hard_labels(&f);
        let loss = projected_clustering_loss(a.view(), x.view(), &g, &f);
        let s_w = match intra_class_scatter(x.view(), &f) {
            Ok(s) => s,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let trace = a.t().dot(s_w.values()).dot(&a).diag().sum();
        let rel = (loss - trace).abs() / loss.abs().max(1.0);
        worst = worst.max(rel);
    }
    if worst < 1e-8 {
        CheckResult::pass(NAME, format!("max relative error {worst:.2e}"))
    } else {
        CheckResult::fail(NAME, format!("max relative error {worst:.2e} >= 1e-8"))
    }
}

/// Marginal MMD trace against the direct mean-difference oracle, plus row
/// sums and the rank-1 structure.
fn check_mmd_matrix() -> CheckResult {
    const NAME: &str = "MMD matrix row sums, rank, and mean-difference oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst_trace = 0.0f64;
    let mut worst_row = 0.0f64;
    for _ in 0..50 {
        let (m, k) = (rng.random_range(2..=10), rng.random_range(1..=4));
        let n_s = rng.random_range(2..=15);
        let n_t = rng.random_range(2..=15);
        let a = random_matrix(&mut rng, m, k);
        let x_s = random_matrix(&mut rng, m, n_s);
        let x_t = random_matrix(&mut rng, m, n_t);
        let x = concatenate![Axis(1), x_s.view(), x_t.view()];
        let z = a.t().dot(&x);

        let m0 = match MmdMatrix::marginal(n_s, n_t) {
            Ok(m) => m,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let got = m0.projected_trace(z.view());

        // Oracle: mean difference computed column by column.
        let mut mean_s = Array1::<f64>::zeros(k);
        for j in 0..n_s {
            mean_s += &z.column(j);
        }
        mean_s /= n_s as f64;
        let mut mean_t = Array1::<f64>::zeros(k);
        for j in 0..n_t {
            mean_t += &z.column(n_s + j);
        }
        mean_t /= n_t as f64;
        let diff = &mean_s - &mean_t;
        worst_trace = worst_trace.max((got - diff.dot(&diff)).abs());

        for row in m0.to_dense().rows() {
            worst_row = worst_row.max(row.sum().abs());
        }
    }
    if worst_trace < 1e-10 && worst_row < 1e-12 {
        CheckResult::pass(
            NAME,
            format!("trace error {worst_trace:.2e}, row-sum error {worst_row:.2e}"),
        )
    } else {
        CheckResult::fail(
            NAME,
            format!("trace error {worst_trace:.2e}, row-sum error {worst_row:.2e}"),
        )
    }
}

/// Class-wise sum against the centroid-difference form.
fn check_centroid_form_identity() -> CheckResult {
    const NAME: &str = "conditional MMD centroid-form identity";
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m, k, classes) = (
            rng.random_range(3..=10),
            rng.random_range(1..=4),
            rng.random_range(2..=4),
        );
        let n_s = classes * rng.random_range(2..=5);
        let n_t = classes * rng.random_range(2..=5);
        let a = random_matrix(&mut rng, m, k);
        let x_s = random_matrix(&mut rng, m, n_s);
        let x_t = random_matrix(&mut rng, m, n_t);
        let ps: Vec<usize> = (0..n_s).map(|i| i % classes).collect();
        let pt: Vec<usize> = (0..n_t).map(|j| j % classes).collect();
        let f_s = LabelMatrix::from_hard_labels(&ps, classes).unwrap();
        let f_t = LabelMatrix::from_hard_labels(&pt, classes).unwrap();
        let g_s = CentroidMap::from_hard_labels(&f_s);
        let g_t = CentroidMap::from_hard_labels(&f_t);

        let centroid = conditional_mmd_centroid_form(a.view(), x_s.view(), x_t.view(), &g_s, &g_t);
        let x = concatenate![Axis(1), x_s.view(), x_t.view()];
        let z = a.t().dot(&x);
        let class_sum: f64 = (0..classes)
            .map(|c| MmdMatrix::class_wise(&ps, &pt, c).projected_trace(z.view()))
            .sum();
        worst = worst.max((centroid - class_sum).abs() / centroid.abs().max(1.0));
    }
    if worst < 1e-8 {
        CheckResult::pass(NAME, format!("max relative error {worst:.2e}"))
    } else {
        CheckResult::fail(NAME, format!("max relative error {worst:.2e} >= 1e-8"))
    }
}

/// Propagation against an independent dense solve, plus the harmonic
/// residual bound.
fn check_harmonic_propagation() -> CheckResult {
    const NAME: &str = "harmonic propagation matches dense solve";
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst_residual = 0.0f64;
    let mut worst_match = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(30..=80);
        let n_l = rng.random_range(4..=n / 3);
        let classes = rng.random_range(2..=4);
        let z = random_matrix(&mut rng, 3, n);
        let graph = match build_knn_graph(z.view(), 6) {
            Ok(g) => g,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let lap = match build_laplacian(&graph, n, n_l) {
            Ok(l) => l,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let labels: Vec<usize> = (0..n_l).map(|i| i % classes).collect();
        let y_l = LabelMatrix::from_hard_labels(&labels, classes).unwrap();
        let f_u = match propagate_labels(
            lap.source_unlabeled_block(),
            lap.source_unlabeled_labeled_block(),
            &y_l,
        ) {
            Ok(f) => f,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };

        let residual = lap.source_unlabeled_block().dot(f_u.values())
            + lap.source_unlabeled_labeled_block().dot(y_l.values());
        worst_residual = worst_residual.max(
            residual.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())),
        );

        // Independent oracle: LU solve of the unridged system.
        let l_uu = lap.source_unlabeled_block().to_owned();
        let rhs = -lap.source_unlabeled_labeled_block().dot(y_l.values());
        let factorized = match l_uu.factorize() {
            Ok(f) => f,
            Err(e) => return CheckResult::fail(NAME, format!("oracle solve failed: {e}")),
        };
        for c in 0..classes {
            let col = rhs.column(c).to_owned();
            let sol = match factorized.solve(&col) {
                Ok(s) => s,
                Err(e) => return CheckResult::fail(NAME, format!("oracle solve failed: {e}")),
            };
            for (i, v) in sol.iter().enumerate() {
                worst_match = worst_match.max((f_u.values()[(i, c)] - v).abs());
            }
        }
    }
    if worst_residual < 1e-8 && worst_match < 1e-8 {
        CheckResult::pass(
            NAME,
            format!("residual {worst_residual:.2e}, solve mismatch {worst_match:.2e}"),
        )
    } else {
        CheckResult::fail(
            NAME,
            format!("residual {worst_residual:.2e}, solve mismatch {worst_match:.2e}"),
        )
    }
}

/// Monotone descent of the centroid and label updates on random instances.
fn check_multiplicative_descent() -> CheckResult {
    const NAME: &str = "multiplicative updates descend their objectives";
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for trial in 0..25 {
        let k = 3;
        let (n_s, n_t, c) = (9, 7, 3);
        let z_s = random_matrix(&mut rng, k, n_s);
        let z_t = random_matrix(&mut rng, k, n_t);
        let mut g_s = random_nonneg(&mut rng, n_s, c);
        let g_t = random_nonneg(&mut rng, n_t, c);
        let f_s = random_nonneg(&mut rng, n_s, c);
        let gram = z_s.t().dot(&z_s);
        let cross = z_s.t().dot(&z_t);
        let gamma = 0.2;
        let mut prev = centroid_objective(z_s.view(), z_t.view(), &g_s, &g_t, &f_s, gamma);
        for step in 0..30 {
            g_s = match update_gs(&g_s, &g_t, &f_s, &gram, &cross, gamma, 1e-12) {
                Ok(g) => g,
                Err(e) => return CheckResult::fail(NAME, e.to_string()),
            };
            let next = centroid_objective(z_s.view(), z_t.view(), &g_s, &g_t, &f_s, gamma);
            if next > prev + 1e-8 {
                return CheckResult::fail(
                    NAME,
                    format!("centroid objective rose {prev} -> {next} (trial {trial}, step {step})"),
                );
            }
            prev = next;
        }

        // Label update descent on a random Laplacian pair.
        let (n_u, n_l) = (8, 4);
        let n = n_u + n_l;
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random::<f64>();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        let mut lap = Array2::zeros((n, n));
        for i in 0..n {
            let degree: f64 = w.row(i).sum();
            for j in 0..n {
                lap[(i, j)] = if i == j { degree } else { -w[(i, j)] };
            }
        }
        let l_self = lap.slice(ndarray::s![..n_u, ..n_u]).to_owned();
        let l_cross = lap.slice(ndarray::s![..n_u, n_u..]).to_owned();
        let z_u = random_matrix(&mut rng, k, n_u);
        let centroids = random_matrix(&mut rng, k, c);
        let anchor = random_nonneg(&mut rng, n_l, c);
        let mut f = random_nonneg(&mut rng, n_u, c);
        let k1 = z_u.t().dot(&centroids);
        let k2 = centroids.t().dot(&centroids);
        let mut prev = label_objective(
            z_u.view(),
            &centroids,
            &f,
            &anchor,
            l_self.view(),
            l_cross.view(),
            gamma,
        );
        for step in 0..30 {
            f = match update_fsu(
                &f,
                &anchor,
                &k1,
                &k2,
                l_self.view(),
                l_cross.view(),
                gamma,
                1e-12,
            ) {
                Ok(f) => f,
                Err(e) => return CheckResult::fail(NAME, e.to_string()),
            };
            let next = label_objective(
                z_u.view(),
                &centroids,
                &f,
                &anchor,
                l_self.view(),
                l_cross.view(),
                gamma,
            );
            if next > prev + 1e-8 {
                return CheckResult::fail(
                    NAME,
                    format!("label objective rose {prev} -> {next} (trial {trial}, step {step})"),
                );
            }
            prev = next;
        }
    }
    CheckResult::pass(NAME, "25 random instances, 30 steps each".into())
}

/// Runs every oracle check.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_clustering_scatter_identity(),
        check_mmd_matrix(),
        check_centroid_form_identity(),
        check_harmonic_propagation(),
        check_multiplicative_descent(),
    ]
}
