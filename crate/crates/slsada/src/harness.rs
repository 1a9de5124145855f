//! Experiment orchestration: the repeated-draw evaluation protocol,
//! reference baselines, parameter sweeps, and report emission.
//!
//! A protocol run fixes the data once, then draws a fresh labeled subset
//! per repeat (seeded), runs the solver plus every requested baseline, and
//! aggregates mean and sample standard deviation over repeats. Repeats run
//! concurrently; aggregation is ordered by repeat index, so reports are
//! deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{mmd_family, MmdMatrix};
use crate::dataset::{
    generate_synthetic, load_features, load_labels, sample_labeled_subset, DomainPair,
    FeatureFormat, FeatureMatrix, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::solver::{
    assemble_kms, initialize, run_slsada, solve_projection, RunOutput, SolverConfig,
    UPDATE_RULE_VARIANT,
};

/// Reference methods run next to the solver for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Nearest centroid fit on the labeled source samples in the original
    /// feature space.
    SourceOnlyNearestCentroid,
    /// Initialization only: marginal projection plus label propagation.
    PropagationOnly,
    /// Marginal alignment only, nearest-centroid classification in the
    /// embedding (no iteration).
    MarginalOnly,
    /// Marginal plus class-wise alignment with nearest-centroid
    /// pseudo-labeling, iterated like the solver but without clustering or
    /// propagation.
    MarginalConditional,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::SourceOnlyNearestCentroid => "source-only-nearest-centroid",
            Baseline::PropagationOnly => "propagation-only",
            Baseline::MarginalOnly => "marginal-only",
            Baseline::MarginalConditional => "marginal-conditional",
        }
    }

    pub fn all() -> Vec<Baseline> {
        vec![
            Baseline::SourceOnlyNearestCentroid,
            Baseline::PropagationOnly,
            Baseline::MarginalOnly,
            Baseline::MarginalConditional,
        ]
    }
}

/// Where the experiment data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PairSource {
    Files {
        source: PathBuf,
        target: PathBuf,
        /// True source labels; required by the protocol for subset draws
        /// and the source metric.
        labels_source: PathBuf,
        /// True target labels; optional, enables the target metric.
        labels_target: Option<PathBuf>,
        format: FeatureFormat,
    },
    Synthetic {
        spec: SyntheticSpec,
        data_seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub pair: PairSource,
    pub per_class_labels: usize,
    pub repeats: usize,
    pub solver: SolverConfig,
    pub baselines: Vec<Baseline>,
    /// Optional per-sample L2 normalization at ingestion (off by default).
    pub normalize_samples: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_class_labels == 0 {
            return Err(Error::InvalidData("per_class_labels must be >= 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidData("repeats must be >= 1".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaselineScore {
    pub s_accuracy: Option<f64>,
    pub t_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub subset_seed: u64,
    pub s_accuracy: Option<f64>,
    pub t_accuracy: Option<f64>,
    pub baselines: BTreeMap<String, BaselineScore>,
    pub objective_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean_s: Option<f64>,
    pub std_s: Option<f64>,
    pub mean_t: Option<f64>,
    pub std_t: Option<f64>,
}

/// Full protocol result: config echo, per-repeat rows, and aggregates.
///
/// Wall-clock time is kept out of the serialized form so that identical
/// configurations produce byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: ExperimentSpec,
    pub per_repeat: Vec<RepeatOutcome>,
    pub solver_summary: SummaryStats,
    pub baseline_summary: BTreeMap<String, SummaryStats>,
    pub update_rule_variant: String,
    pub incomplete_repeats: usize,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// One-line CSV summary (mean/std of the solver metrics).
    pub fn summary_csv_row(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::from("nan"), |x| format!("{x}"));
        format!(
            "{},{},{},{}",
            fmt(self.solver_summary.mean_s),
            fmt(self.solver_summary.std_s),
            fmt(self.solver_summary.mean_t),
            fmt(self.solver_summary.std_t)
        )
    }
}

/// Source accuracy over all source samples: the clamped labeled block counts
/// as correct, predictions cover the unlabeled block.
pub fn accuracy_s(unlabeled_predictions: &[usize], pair: &DomainPair) -> Result<f64> {
    let truth = pair
        .true_source()
        .ok_or_else(|| Error::InvalidData("true source labels unavailable".into()))?;
    let n_sl = pair.labeled_count();
    if unlabeled_predictions.len() != pair.unlabeled_source_count() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} unlabeled source samples",
            unlabeled_predictions.len(),
            pair.unlabeled_source_count()
        )));
    }
    let correct = truth[n_sl..]
        .iter()
        .zip(unlabeled_predictions.iter())
        .filter(|(a, b)| a == b)
        .count();
    Ok((n_sl + correct) as f64 / pair.source_count() as f64)
}

/// Target accuracy over all target samples.
pub fn accuracy_t(predictions: &[usize], pair: &DomainPair) -> Result<f64> {
    let truth = pair
        .true_target()
        .ok_or_else(|| Error::InvalidData("true target labels unavailable".into()))?;
    if predictions.len() != pair.target_count() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} target samples",
            predictions.len(),
            pair.target_count()
        )));
    }
    let correct = truth
        .iter()
        .zip(predictions.iter())
        .filter(|(a, b)| a == b)
        .count();
    Ok(correct as f64 / pair.target_count() as f64)
}

/// Per-class mean columns; unpopulated classes are excluded from assignment.
fn class_centroids(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    class_count: usize,
) -> (Array2<f64>, Vec<bool>) {
    let m = x.nrows();
    let mut centroids = Array2::zeros((m, class_count));
    let mut counts = vec![0usize; class_count];
    for (j, &c) in labels.iter().enumerate() {
        let col = x.column(j);
        centroids
            .column_mut(c)
            .iter_mut()
            .zip(col.iter())
            .for_each(|(acc, v)| *acc += v);
        counts[c] += 1;
    }
    let mut populated = vec![false; class_count];
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            populated[c] = true;
            centroids
                .column_mut(c)
                .mapv_inplace(|v| v / count as f64);
        }
    }
    (centroids, populated)
}

/// Nearest populated centroid; ties break toward the lowest class index.
fn nearest_centroid_assign(
    x: ArrayView2<'_, f64>,
    centroids: &Array2<f64>,
    populated: &[bool],
) -> Vec<usize> {
    let mut out = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &ok) in populated.iter().enumerate() {
            if !ok {
                continue;
            }
            let d = col
                .iter()
                .zip(centroids.column(c).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        out.push(best);
    }
    out
}

/// Predictions of one baseline: unlabeled-source block then target.
fn run_baseline(
    baseline: Baseline,
    pair: &DomainPair,
    config: &SolverConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    match baseline {
        Baseline::SourceOnlyNearestCentroid => {
            let n_sl = pair.labeled_count();
            let labeled = pair.source().values().slice(s![.., ..n_sl]);
            let (centroids, populated) =
                class_centroids(labeled, &pair.labeled_classes(), pair.class_count());
            let su = nearest_centroid_assign(
                pair.source().values().slice(s![.., n_sl..]),
                &centroids,
                &populated,
            );
            let t = nearest_centroid_assign(pair.target().values().view(), &centroids, &populated);
            Ok((su, t))
        }
        Baseline::PropagationOnly => {
            let init = initialize(pair, config)?;
            Ok((init.source_unlabeled_labels, init.target_labels))
        }
        Baseline::MarginalOnly => {
            let (embedding, n_s, n_sl) = marginal_embedding(pair, config)?;
            let labeled = embedding.slice(s![.., ..n_sl]);
            let (centroids, populated) =
                class_centroids(labeled, &pair.labeled_classes(), pair.class_count());
            let su = nearest_centroid_assign(
                embedding.slice(s![.., n_sl..n_s]),
                &centroids,
                &populated,
            );
            let t = nearest_centroid_assign(embedding.slice(s![.., n_s..]), &centroids, &populated);
            Ok((su, t))
        }
        Baseline::MarginalConditional => marginal_conditional_baseline(pair, config),
    }
}

fn marginal_embedding(pair: &DomainPair, config: &SolverConfig) -> Result<(Array2<f64>, usize, usize)> {
    let centered = pair.center_jointly();
    let x = concatenate![
        Axis(1),
        centered.source().values().view(),
        centered.target().values().view()
    ];
    let m0 = MmdMatrix::marginal(pair.source_count(), pair.target_count())?;
    let pencil = assemble_kms(
        x.view(),
        std::slice::from_ref(&m0),
        None,
        0.0,
        config.scale_regularizer,
    )?;
    let (projection, _) = solve_projection(&pencil, x.view(), config.subspace_dim)?;
    Ok((
        projection.embed(x.view()),
        pair.source_count(),
        pair.labeled_count(),
    ))
}

/// Marginal+conditional alignment with nearest-centroid pseudo-labeling:
/// the solver's outer loop with clustering and propagation removed.
fn marginal_conditional_baseline(
    pair: &DomainPair,
    config: &SolverConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let centered = pair.center_jointly();
    let x = concatenate![
        Axis(1),
        centered.source().values().view(),
        centered.target().values().view()
    ];
    let n_s = pair.source_count();
    let n_sl = pair.labeled_count();
    let class_count = pair.class_count();
    let labeled_classes = pair.labeled_classes();

    let (embedding, _, _) = marginal_embedding(pair, config)?;
    let labeled = embedding.slice(s![.., ..n_sl]);
    let (centroids, populated) = class_centroids(labeled, &labeled_classes, class_count);
    let mut su_pred =
        nearest_centroid_assign(embedding.slice(s![.., n_sl..n_s]), &centroids, &populated);
    let mut t_pred =
        nearest_centroid_assign(embedding.slice(s![.., n_s..]), &centroids, &populated);

    for _ in 0..config.iterations {
        let mut source_labels = labeled_classes.clone();
        source_labels.extend_from_slice(&su_pred);
        let mmd = mmd_family(&source_labels, &t_pred, class_count)?;
        let pencil = assemble_kms(x.view(), &mmd, None, 0.0, config.scale_regularizer)?;
        let (projection, _) = solve_projection(&pencil, x.view(), config.subspace_dim)?;
        let z = projection.embed(x.view());
        let (centroids, populated) =
            class_centroids(z.slice(s![.., ..n_s]), &source_labels, class_count);
        su_pred = nearest_centroid_assign(z.slice(s![.., n_sl..n_s]), &centroids, &populated);
        t_pred = nearest_centroid_assign(z.slice(s![.., n_s..]), &centroids, &populated);
    }
    Ok((su_pred, t_pred))
}

/// The base data a protocol samples labeled subsets from.
struct BaseData {
    source: FeatureMatrix,
    target: FeatureMatrix,
    labels_source: Vec<usize>,
    labels_target: Option<Vec<usize>>,
    class_count: usize,
}

fn load_base_data(spec: &ExperimentSpec) -> Result<BaseData> {
    match &spec.pair {
        PairSource::Synthetic { spec: synth, data_seed } => {
            let data = generate_synthetic(synth, *data_seed)?;
            Ok(BaseData {
                source: data.source,
                target: data.target,
                labels_source: data.labels_source,
                labels_target: Some(data.labels_target),
                class_count: data.class_count,
            })
        }
        PairSource::Files {
            source,
            target,
            labels_source,
            labels_target,
            format,
        } => {
            let source = load_features(source, *format)?;
            let target = load_features(target, *format)?;
            let labels_source = load_labels(labels_source)?;
            if labels_source.len() != source.sample_count() {
                return Err(Error::Dimension(format!(
                    "{} source labels for {} samples",
                    labels_source.len(),
                    source.sample_count()
                )));
            }
            let labels_target = match labels_target {
                Some(path) => {
                    let l = load_labels(path)?;
                    if l.len() != target.sample_count() {
                        return Err(Error::Dimension(format!(
                            "{} target labels for {} samples",
                            l.len(),
                            target.sample_count()
                        )));
                    }
                    Some(l)
                }
                None => None,
            };
            let max_source = labels_source.iter().max().copied().unwrap_or(0);
            let max_target = labels_target
                .as_ref()
                .and_then(|l| l.iter().max().copied())
                .unwrap_or(0);
            Ok(BaseData {
                source,
                target,
                labels_source,
                labels_target,
                class_count: max_source.max(max_target) + 1,
            })
        }
    }
}

fn build_pair(base: &BaseData, spec: &ExperimentSpec, subset_seed: u64) -> Result<DomainPair> {
    let idx = sample_labeled_subset(&base.labels_source, spec.per_class_labels, subset_seed)?;
    let labels: Vec<usize> = idx.iter().map(|&i| base.labels_source[i]).collect();
    let pair = DomainPair::new(
        base.source.clone(),
        base.target.clone(),
        &idx,
        &labels,
        base.class_count,
        Some(base.labels_source.clone()),
        base.labels_target.clone(),
    )?;
    Ok(if spec.normalize_samples {
        pair.normalized_samples()
    } else {
        pair
    })
}

fn run_one_repeat(base: &BaseData, spec: &ExperimentSpec, repeat: usize) -> RepeatOutcome {
    let subset_seed = spec.solver.seed.wrapping_add(repeat as u64);
    let mut outcome = RepeatOutcome {
        repeat,
        subset_seed,
        s_accuracy: None,
        t_accuracy: None,
        baselines: BTreeMap::new(),
        objective_trace: Vec::new(),
        error: None,
    };

    let attempt = (|| -> Result<()> {
        let pair = build_pair(base, spec, subset_seed)?;
        let output = run_slsada(&pair, &spec.solver)?;
        outcome.objective_trace = output.state.objective_trace.clone();
        if pair.true_source().is_some() {
            outcome.s_accuracy =
                Some(accuracy_s(&output.source_unlabeled_predictions, &pair)?);
        }
        if pair.true_target().is_some() {
            outcome.t_accuracy = Some(accuracy_t(&output.target_predictions, &pair)?);
        }
        for &baseline in &spec.baselines {
            let (su, t) = run_baseline(baseline, &pair, &spec.solver)?;
            let score = BaselineScore {
                s_accuracy: pair
                    .true_source()
                    .map(|_| accuracy_s(&su, &pair))
                    .transpose()?,
                t_accuracy: pair
                    .true_target()
                    .map(|_| accuracy_t(&t, &pair))
                    .transpose()?,
            };
            outcome.baselines.insert(baseline.name().to_string(), score);
        }
        Ok(())
    })();

    if let Err(e) = attempt {
        outcome.error = Some(e.to_string());
    }
    outcome
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

fn summarize<F>(outcomes: &[RepeatOutcome], pick: F) -> SummaryStats
where
    F: Fn(&RepeatOutcome) -> (Option<f64>, Option<f64>),
{
    let s: Vec<f64> = outcomes.iter().filter_map(|o| pick(o).0).collect();
    let t: Vec<f64> = outcomes.iter().filter_map(|o| pick(o).1).collect();
    let (mean_s, std_s) = mean_std(&s);
    let (mean_t, std_t) = mean_std(&t);
    SummaryStats {
        mean_s,
        std_s,
        mean_t,
        std_t,
    }
}

/// Runs the repeated-draw protocol: one labeled subset per repeat, solver
/// plus requested baselines, aggregated mean and standard deviation.
pub fn run_protocol(spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate()?;
    let started = Instant::now();
    let base = load_base_data(spec)?;

    let per_repeat: Vec<RepeatOutcome> = (0..spec.repeats)
        .into_par_iter()
        .map(|r| run_one_repeat(&base, spec, r))
        .collect();

    let incomplete_repeats = per_repeat.iter().filter(|o| o.error.is_some()).count();
    let solver_summary = summarize(&per_repeat, |o| (o.s_accuracy, o.t_accuracy));
    let mut baseline_summary = BTreeMap::new();
    for baseline in &spec.baselines {
        let name = baseline.name().to_string();
        let stats = summarize(&per_repeat, |o| {
            o.baselines
                .get(&name)
                .map_or((None, None), |b| (b.s_accuracy, b.t_accuracy))
        });
        baseline_summary.insert(name, stats);
    }

    Ok(RunReport {
        spec: spec.clone(),
        per_repeat,
        solver_summary,
        baseline_summary,
        update_rule_variant: UPDATE_RULE_VARIANT.to_string(),
        incomplete_repeats,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Which hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    SubspaceDim,
    ScaleRegularizer,
    ClusteringWeight,
    Iterations,
    PerClassLabels,
    NeighborCount,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::SubspaceDim => "k",
            SweepParameter::ScaleRegularizer => "lambda",
            SweepParameter::ClusteringWeight => "gamma",
            SweepParameter::Iterations => "iterations",
            SweepParameter::PerClassLabels => "per-class-labels",
            SweepParameter::NeighborCount => "neighbors",
        }
    }

    pub fn parse(name: &str) -> Option<SweepParameter> {
        match name {
            "k" | "subspace-dim" => Some(SweepParameter::SubspaceDim),
            "lambda" => Some(SweepParameter::ScaleRegularizer),
            "gamma" => Some(SweepParameter::ClusteringWeight),
            "iterations" | "iters" | "t" => Some(SweepParameter::Iterations),
            "per-class-labels" | "per-class" => Some(SweepParameter::PerClassLabels),
            "neighbors" | "neighbor-count" => Some(SweepParameter::NeighborCount),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub report: RunReport,
}

fn apply_parameter(spec: &ExperimentSpec, parameter: SweepParameter, value: f64) -> Result<ExperimentSpec> {
    let mut out = spec.clone();
    let as_count = |v: f64, what: &str| -> Result<usize> {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::InvalidData(format!(
                "{what} must be a positive integer, got {v}"
            )));
        }
        Ok(v as usize)
    };
    match parameter {
        SweepParameter::SubspaceDim => out.solver.subspace_dim = as_count(value, "k")?,
        SweepParameter::ScaleRegularizer => out.solver.scale_regularizer = value,
        SweepParameter::ClusteringWeight => out.solver.clustering_weight = value,
        SweepParameter::Iterations => out.solver.iterations = as_count(value, "iterations")?,
        SweepParameter::PerClassLabels => {
            out.per_class_labels = as_count(value, "per-class-labels")?
        }
        SweepParameter::NeighborCount => {
            out.solver.neighbor_count = as_count(value, "neighbors")?
        }
    }
    Ok(out)
}

/// One protocol run per grid value.
pub fn sweep(
    spec: &ExperimentSpec,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::InvalidData("sweep grid is empty".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let adjusted = apply_parameter(spec, parameter, value)?;
        let report = run_protocol(&adjusted)?;
        points.push(SweepPoint {
            parameter: parameter.name().to_string(),
            value,
            report,
        });
    }
    Ok(points)
}

/// CSV rows `param,value,mean_s,std_s,mean_t,std_t`, one per grid point.
pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "param,value,mean_s,std_s,mean_t,std_t").map_err(io)?;
    for p in points {
        writeln!(
            w,
            "{},{},{}",
            p.parameter,
            p.value,
            p.report.summary_csv_row()
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes the final embeddings with domain and label columns for external
/// visualization: `domain,true_label,predicted_label,z_1..z_k`, one row per
/// sample, source rows (labeled-first order) before target rows.
pub fn embed_dump(output: &RunOutput, pair: &DomainPair, path: &Path) -> Result<()> {
    let centered = pair.center_jointly();
    let x = concatenate![
        Axis(1),
        centered.source().values().view(),
        centered.target().values().view()
    ];
    let z = output.state.projection.embed(x.view());
    let k = z.nrows();
    let n_s = pair.source_count();

    let source_predictions = output.source_full_predictions(pair);

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    let mut header = String::from("domain,true_label,predicted_label");
    for d in 1..=k {
        header.push_str(&format!(",z_{d}"));
    }
    writeln!(w, "{header}").map_err(io)?;

    let truth_of = |domain: usize, i: usize| -> i64 {
        let t = if domain == 0 {
            pair.true_source().map(|t| t[i])
        } else {
            pair.true_target().map(|t| t[i])
        };
        t.map_or(-1, |v| v as i64)
    };

    for j in 0..z.ncols() {
        let (domain, idx) = if j < n_s { (0, j) } else { (1, j - n_s) };
        let name = if domain == 0 { "source" } else { "target" };
        let predicted = if domain == 0 {
            source_predictions[idx]
        } else {
            output.target_predictions[idx]
        };
        let mut line = format!("{name},{},{predicted}", truth_of(domain, idx));
        for d in 0..k {
            line.push_str(&format!(",{}", z[(d, j)]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic_spec() -> ExperimentSpec {
        ExperimentSpec {
            pair: PairSource::Synthetic {
                spec: SyntheticSpec {
                    class_count: 3,
                    feature_dim: 8,
                    per_class_source: 15,
                    per_class_target: 15,
                    covariance_scale: 0.8,
                    rotation_angle_deg: 10.0,
                    mean_offset: 0.5,
                    class_mean_scale: 2.0,
                },
                data_seed: 7,
            },
            per_class_labels: 3,
            repeats: 3,
            solver: SolverConfig {
                subspace_dim: 4,
                neighbor_count: 6,
                iterations: 2,
                ..SolverConfig::small_preset()
            },
            baselines: vec![Baseline::SourceOnlyNearestCentroid],
            normalize_samples: false,
        }
    }

    fn tiny_pair(seed: u64) -> DomainPair {
        let spec = SyntheticSpec {
            class_count: 3,
            feature_dim: 6,
            per_class_source: 12,
            per_class_target: 12,
            covariance_scale: 0.7,
            rotation_angle_deg: 10.0,
            mean_offset: 0.5,
            class_mean_scale: 2.0,
        };
        crate::dataset::generate_synthetic_pair(&spec, seed, 3, seed + 1).unwrap()
    }

    #[test]
    fn accuracy_all_correct_is_one() {
        let pair = tiny_pair(0);
        let truth = pair.true_source().unwrap().to_vec();
        let unlabeled = truth[pair.labeled_count()..].to_vec();
        assert_abs_diff_eq!(accuracy_s(&unlabeled, &pair).unwrap(), 1.0);
        let t_truth = pair.true_target().unwrap().to_vec();
        assert_abs_diff_eq!(accuracy_t(&t_truth, &pair).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_counts_clamped_block() {
        let pair = tiny_pair(1);
        // Predictions all wrong: accuracy reduces to n_sl / n_s.
        let truth = pair.true_source().unwrap().to_vec();
        let wrong: Vec<usize> = truth[pair.labeled_count()..]
            .iter()
            .map(|&c| (c + 1) % pair.class_count())
            .collect();
        let expected = pair.labeled_count() as f64 / pair.source_count() as f64;
        assert_abs_diff_eq!(accuracy_s(&wrong, &pair).unwrap(), expected);
    }

    #[test]
    fn accuracy_requires_truth() {
        let spec = SyntheticSpec::default();
        let data = crate::dataset::generate_synthetic(&spec, 3).unwrap();
        let idx = sample_labeled_subset(&data.labels_source, 2, 0).unwrap();
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels_source[i]).collect();
        let pair = DomainPair::new(
            data.source,
            data.target,
            &idx,
            &labels,
            data.class_count,
            None,
            None,
        )
        .unwrap();
        let preds = vec![0; pair.unlabeled_source_count()];
        assert!(accuracy_s(&preds, &pair).is_err());
    }

    #[test]
    fn random_predictions_score_near_chance() {
        // Monte-Carlo oracle: random guesses on balanced classes hit ~1/C.
        let pair = tiny_pair(2);
        let c = pair.class_count();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut total = 0.0;
        let trials = 200;
        for _ in 0..trials {
            let preds: Vec<usize> = (0..pair.target_count())
                .map(|_| rng.random_range(0..c))
                .collect();
            total += accuracy_t(&preds, &pair).unwrap();
        }
        let mean = total / trials as f64;
        let p = 1.0 / c as f64;
        let sigma = (p * (1.0 - p) / (pair.target_count() as f64 * trials as f64)).sqrt();
        assert!(
            (mean - p).abs() < 3.0 * sigma + 1e-9,
            "mean {mean} vs chance {p} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn protocol_bookkeeping_and_recomputation() {
        let spec = synthetic_spec();
        let report = run_protocol(&spec).unwrap();
        assert_eq!(report.per_repeat.len(), 3);
        assert_eq!(report.incomplete_repeats, 0);

        // Mean/std are recomputable from the per-repeat rows.
        let t: Vec<f64> = report
            .per_repeat
            .iter()
            .filter_map(|o| o.t_accuracy)
            .collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let std = (t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (t.len() as f64 - 1.0))
            .sqrt();
        assert_abs_diff_eq!(report.solver_summary.mean_t.unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(report.solver_summary.std_t.unwrap(), std, epsilon = 1e-12);
        assert!(report
            .baseline_summary
            .contains_key("source-only-nearest-centroid"));
    }

    #[test]
    fn protocol_reports_are_byte_identical() {
        let spec = synthetic_spec();
        let a = run_protocol(&spec).unwrap().to_json();
        let b = run_protocol(&spec).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_grid_mechanics() {
        let mut spec = synthetic_spec();
        spec.repeats = 2;
        spec.baselines.clear();
        let points = sweep(&spec, SweepParameter::ClusteringWeight, &[0.0, 0.01]).unwrap();
        assert_eq!(points.len(), 2);

        // The gamma=0 grid point equals the no-clustering ablation.
        let mut ablation = spec.clone();
        ablation.solver.clustering_weight = 0.0;
        let direct = run_protocol(&ablation).unwrap();
        assert_eq!(
            points[0].report.solver_summary.mean_t,
            direct.solver_summary.mean_t
        );
        assert_eq!(
            points[0].report.solver_summary.mean_s,
            direct.solver_summary.mean_s
        );
    }

    #[test]
    fn sweep_rejects_oversized_subspace() {
        let mut spec = synthetic_spec();
        spec.repeats = 1;
        spec.baselines.clear();
        // Feature dim is 8; k = 20 must be rejected with a clear error.
        let result = sweep(&spec, SweepParameter::SubspaceDim, &[20.0]);
        match result {
            Ok(points) => {
                assert_eq!(points[0].report.incomplete_repeats, 1);
                let msg = points[0].report.per_repeat[0].error.clone().unwrap();
                assert!(msg.contains("exceeds feature dimension"), "{msg}");
            }
            Err(e) => {
                assert!(e.to_string().contains("exceeds"), "{e}");
            }
        }
    }

    #[test]
    fn embed_dump_schema_and_round_trip() {
        let pair = tiny_pair(3);
        let config = SolverConfig {
            subspace_dim: 2,
            neighbor_count: 6,
            iterations: 2,
            ..SolverConfig::small_preset()
        };
        let output = run_slsada(&pair, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedding.csv");
        embed_dump(&output, &pair, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, "domain,true_label,predicted_label,z_1,z_2");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), pair.source_count() + pair.target_count());

        // Re-read embeddings and compare against the recomputed values.
        let centered = pair.center_jointly();
        let x = concatenate![
            Axis(1),
            centered.source().values().view(),
            centered.target().values().view()
        ];
        let z = output.state.projection.embed(x.view());
        for (j, row) in rows.iter().enumerate() {
            let cells: Vec<&str> = row.split(',').collect();
            assert_eq!(cells.len(), 5);
            for d in 0..2 {
                let v: f64 = cells[3 + d].parse().unwrap();
                assert_eq!(v, z[(d, j)], "row {j} dim {d}");
            }
        }
    }
}
