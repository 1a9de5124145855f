//! Command-line front end: single runs, the repeated-draw protocol,
//! parameter sweeps, synthetic data generation, and oracle self-checks.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
//! A plain-text `key=value` config file (with `#` comments) can supply any
//! flag value; explicit flags override the file, the file overrides the
//! preset.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::{
    generate_synthetic, load_features, load_indices, load_labels, save_features, save_labels,
    DomainPair, FeatureFormat, SyntheticSpec,
};
use crate::error::Error;
use crate::harness::{
    embed_dump, run_protocol, sweep, write_sweep_csv, Baseline, ExperimentSpec, PairSource,
    SweepParameter,
};
use crate::solver::{run_slsada, GraphSchedule, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "slsada",
    about = "Domain adaptation from a sparsely-labeled source",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one adaptation on feature files and write predictions.
    Run(RunArgs),
    /// Repeated labeled-subset protocol with baselines and a JSON report.
    Protocol(ProtocolArgs),
    /// Sweep one hyperparameter over a grid; emits CSV summary rows.
    Sweep(SweepArgs),
    /// Generate a synthetic drifted source/target dataset.
    Synth(SynthArgs),
    /// Run the built-in oracle checks and print pass/fail per check.
    Selfcheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetFlag {
    /// k=20, lambda=0.05 (small benchmark datasets).
    Small,
    /// k=100, lambda=0.1 (large datasets with many categories).
    Large,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFlag {
    Rebuild,
    Frozen,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatFlag {
    Csv,
    Raw,
}

impl From<FormatFlag> for FeatureFormat {
    fn from(f: FormatFlag) -> Self {
        match f {
            FormatFlag::Csv => FeatureFormat::Csv,
            FormatFlag::Raw => FeatureFormat::RawBinary,
        }
    }
}

/// Solver hyperparameters shared by `run`, `protocol`, and `sweep`.
#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Plain-text key=value config file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter preset selecting the published defaults.
    #[arg(long, value_enum)]
    preset: Option<PresetFlag>,
    /// Subspace dimension.
    #[arg(short, long)]
    k: Option<usize>,
    /// Clustering weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Projection scale regularizer.
    #[arg(long)]
    lambda: Option<f64>,
    /// Outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Neighbors in the similarity graph.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Multiplicative-update passes per outer iteration.
    #[arg(long)]
    inner_updates: Option<usize>,
    /// Denominator guard for the multiplicative updates.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Graph schedule: rebuild each iteration or freeze the initial graph.
    #[arg(long, value_enum)]
    graph: Option<GraphFlag>,
    /// Master seed (labeled-subset draws derive from it).
    #[arg(long)]
    seed: Option<u64>,
    /// L2-normalize every sample at ingestion.
    #[arg(long)]
    normalize: bool,
    /// Ablation: drop the class-wise alignment terms.
    #[arg(long)]
    no_conditional: bool,
}

/// A parsed `key=value` config file.
struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn empty() -> Self {
        ConfigFile {
            values: HashMap::new(),
        }
    }

    fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    idx + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Failure::Usage(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }
}

fn effective_solver_config(flags: &SolverFlags) -> Result<(SolverConfig, ConfigFile), Failure> {
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };

    let preset = match flags.preset {
        Some(PresetFlag::Small) => SolverConfig::small_preset(),
        Some(PresetFlag::Large) => SolverConfig::large_preset(),
        None => match file.values.get("preset").map(String::as_str) {
            Some("small") | None => SolverConfig::small_preset(),
            Some("large") => SolverConfig::large_preset(),
            Some(other) => {
                return Err(Failure::Usage(format!("unknown preset {other:?}")));
            }
        },
    };

    let mut config = preset;
    if let Some(v) = file.get::<usize>("k")? {
        config.subspace_dim = v;
    }
    if let Some(v) = file.get::<f64>("gamma")? {
        config.clustering_weight = v;
    }
    if let Some(v) = file.get::<f64>("lambda")? {
        config.scale_regularizer = v;
    }
    if let Some(v) = file.get::<usize>("iters")? {
        config.iterations = v;
    }
    if let Some(v) = file.get::<usize>("neighbors")? {
        config.neighbor_count = v;
    }
    if let Some(v) = file.get::<usize>("inner-updates")? {
        config.inner_updates = v;
    }
    if let Some(v) = file.get::<f64>("epsilon")? {
        config.epsilon = v;
    }
    if let Some(v) = file.values.get("graph") {
        config.graph_schedule = match v.as_str() {
            "rebuild" => GraphSchedule::Rebuild,
            "frozen" => GraphSchedule::Frozen,
            other => return Err(Failure::Usage(format!("unknown graph schedule {other:?}"))),
        };
    }
    if let Some(v) = file.get::<u64>("seed")? {
        config.seed = v;
    }

    if let Some(v) = flags.k {
        config.subspace_dim = v;
    }
    if let Some(v) = flags.gamma {
        config.clustering_weight = v;
    }
    if let Some(v) = flags.lambda {
        config.scale_regularizer = v;
    }
    if let Some(v) = flags.iters {
        config.iterations = v;
    }
    if let Some(v) = flags.neighbors {
        config.neighbor_count = v;
    }
    if let Some(v) = flags.inner_updates {
        config.inner_updates = v;
    }
    if let Some(v) = flags.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = flags.graph {
        config.graph_schedule = match v {
            GraphFlag::Rebuild => GraphSchedule::Rebuild,
            GraphFlag::Frozen => GraphSchedule::Frozen,
        };
    }
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if flags.no_conditional {
        config.conditional_alignment = false;
    }
    Ok((config, file))
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    solver: SolverFlags,
    /// Source feature file.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target feature file.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Source labels (one class id per sample line).
    #[arg(long)]
    labels_source: Option<PathBuf>,
    /// Target labels, evaluation only.
    #[arg(long)]
    labels_target: Option<PathBuf>,
    /// Labeled-subset file (one source index per line); when absent, a
    /// per-class subset is drawn with the seed.
    #[arg(long)]
    labeled_idx: Option<PathBuf>,
    /// Labeled samples drawn per class when no subset file is given.
    #[arg(long)]
    per_class: Option<usize>,
    /// Feature file layout.
    #[arg(long, value_enum)]
    format: Option<FormatFlag>,
    /// Output directory (report, predictions, iteration log).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the final embeddings as CSV.
    #[arg(long)]
    dump_embeddings: bool,
}

#[derive(Args, Clone)]
struct SynthFlags {
    /// Number of classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Samples per class per domain.
    #[arg(long)]
    samples_per_class: Option<usize>,
    /// Target rotation angle in degrees.
    #[arg(long)]
    rotation: Option<f64>,
    /// Norm of the target mean offset.
    #[arg(long)]
    offset: Option<f64>,
    /// Within-class noise scale.
    #[arg(long)]
    cov_scale: Option<f64>,
    /// Class-mean placement scale.
    #[arg(long)]
    mean_scale: Option<f64>,
    /// Seed for the data draw (independent of the subset seed).
    #[arg(long)]
    data_seed: Option<u64>,
}

impl SynthFlags {
    fn to_spec(&self, file: &ConfigFile) -> Result<SyntheticSpec, Failure> {
        let mut spec = SyntheticSpec::default();
        if let Some(v) = file.get::<usize>("classes")? {
            spec.class_count = v;
        }
        if let Some(v) = file.get::<usize>("dim")? {
            spec.feature_dim = v;
        }
        if let Some(v) = file.get::<usize>("samples-per-class")? {
            spec.per_class_source = v;
            spec.per_class_target = v;
        }
        if let Some(v) = file.get::<f64>("rotation")? {
            spec.rotation_angle_deg = v;
        }
        if let Some(v) = file.get::<f64>("offset")? {
            spec.mean_offset = v;
        }
        if let Some(v) = file.get::<f64>("cov-scale")? {
            spec.covariance_scale = v;
        }
        if let Some(v) = file.get::<f64>("mean-scale")? {
            spec.class_mean_scale = v;
        }
        if let Some(v) = self.classes {
            spec.class_count = v;
        }
        if let Some(v) = self.dim {
            spec.feature_dim = v;
        }
        if let Some(v) = self.samples_per_class {
            spec.per_class_source = v;
            spec.per_class_target = v;
        }
        if let Some(v) = self.rotation {
            spec.rotation_angle_deg = v;
        }
        if let Some(v) = self.offset {
            spec.mean_offset = v;
        }
        if let Some(v) = self.cov_scale {
            spec.covariance_scale = v;
        }
        if let Some(v) = self.mean_scale {
            spec.class_mean_scale = v;
        }
        Ok(spec)
    }

    fn data_seed(&self, file: &ConfigFile) -> Result<u64, Failure> {
        Ok(self
            .data_seed
            .or(file.get::<u64>("data-seed")?)
            .unwrap_or(0))
    }
}

#[derive(Args)]
struct ProtocolArgs {
    #[command(flatten)]
    solver: SolverFlags,
    /// Source feature file (omit to use a synthetic pair).
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    labels_source: Option<PathBuf>,
    #[arg(long)]
    labels_target: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatFlag>,
    #[command(flatten)]
    synth: SynthFlags,
    /// Labeled samples per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Labeled-subset redraws.
    #[arg(long)]
    repeats: Option<usize>,
    /// Baselines to run next to the solver (repeatable); defaults to all.
    #[arg(long, value_enum)]
    baseline: Vec<BaselineFlag>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineFlag {
    SourceOnly,
    PropagationOnly,
    MarginalOnly,
    MarginalConditional,
}

impl From<BaselineFlag> for Baseline {
    fn from(b: BaselineFlag) -> Self {
        match b {
            BaselineFlag::SourceOnly => Baseline::SourceOnlyNearestCentroid,
            BaselineFlag::PropagationOnly => Baseline::PropagationOnly,
            BaselineFlag::MarginalOnly => Baseline::MarginalOnly,
            BaselineFlag::MarginalConditional => Baseline::MarginalConditional,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Which hyperparameter to sweep: k, lambda, gamma, iters, per-class,
    /// neighbors.
    #[arg(long)]
    param: String,
    /// Comma-separated grid values.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    synth: SynthFlags,
    /// Seed for the data draw (alias of --data-seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Config file supplying any of the generator keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the four feature/label files.
    #[arg(long)]
    out: PathBuf,
    /// Feature file layout.
    #[arg(long, value_enum)]
    format: Option<FormatFlag>,
}

/// Parses argv and dispatches; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outputs, anything else is a
            // usage error.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };

    let result = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Protocol(args) => protocol_command(args),
        Command::Sweep(args) => sweep_command(args),
        Command::Synth(args) => synth_command(args),
        Command::Selfcheck => selfcheck_command(),
    };

    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn ensure_out_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn required_path(
    flag: Option<PathBuf>,
    file: &ConfigFile,
    key: &str,
) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.get_path(key))
        .ok_or_else(|| Failure::Usage(format!("missing required --{key}")))
}

#[derive(Serialize)]
struct SingleRunReport {
    solver: SolverConfig,
    source_samples: usize,
    target_samples: usize,
    labeled_count: usize,
    class_count: usize,
    s_accuracy: Option<f64>,
    t_accuracy: Option<f64>,
    objective_trace: Vec<f64>,
    update_rule_variant: String,
}

fn run_command(args: RunArgs) -> CliResult {
    let (config, file) = effective_solver_config(&args.solver)?;
    println!(
        "effective config: {}",
        serde_json::to_string(&config).expect("config serializes")
    );

    let format: FeatureFormat = args
        .format
        .map(Into::into)
        .or_else(|| match file.values.get("format").map(String::as_str) {
            Some("raw") => Some(FeatureFormat::RawBinary),
            Some("csv") => Some(FeatureFormat::Csv),
            _ => None,
        })
        .unwrap_or(FeatureFormat::Csv);

    let source_path = required_path(args.source, &file, "source")?;
    let target_path = required_path(args.target, &file, "target")?;
    let labels_path = required_path(args.labels_source, &file, "labels-source")?;

    let source = load_features(&source_path, format)?;
    let target = load_features(&target_path, format)?;
    let labels_source = load_labels(&labels_path)?;
    if labels_source.len() != source.sample_count() {
        return Err(Failure::Data(format!(
            "{} labels for {} source samples",
            labels_source.len(),
            source.sample_count()
        )));
    }
    let labels_target = match args.labels_target.or_else(|| file.get_path("labels-target")) {
        Some(path) => Some(load_labels(&path)?),
        None => None,
    };

    let labeled_idx = match args.labeled_idx.or_else(|| file.get_path("labeled-idx")) {
        Some(path) => load_indices(&path)?,
        None => {
            let per_class = args
                .per_class
                .or(file.get::<usize>("per-class")?)
                .unwrap_or(5);
            crate::dataset::sample_labeled_subset(&labels_source, per_class, config.seed)?
        }
    };
    let labeled_labels: Vec<usize> = labeled_idx
        .iter()
        .map(|&i| {
            labels_source.get(i).copied().ok_or_else(|| {
                Failure::Data(format!("labeled index {i} out of range"))
            })
        })
        .collect::<Result<_, _>>()?;
    let class_count = labels_source
        .iter()
        .chain(labels_target.iter().flatten())
        .max()
        .map_or(0, |&c| c + 1);

    let pair = DomainPair::new(
        source,
        target,
        &labeled_idx,
        &labeled_labels,
        class_count,
        Some(labels_source),
        labels_target,
    )?;
    let pair = if args.solver.normalize {
        pair.normalized_samples()
    } else {
        pair
    };

    let output = run_slsada(&pair, &config)?;
    let s_accuracy = crate::harness::accuracy_s(&output.source_unlabeled_predictions, &pair).ok();
    let t_accuracy = pair
        .true_target()
        .and_then(|_| crate::harness::accuracy_t(&output.target_predictions, &pair).ok());

    let report = SingleRunReport {
        solver: config,
        source_samples: pair.source_count(),
        target_samples: pair.target_count(),
        labeled_count: pair.labeled_count(),
        class_count: pair.class_count(),
        s_accuracy,
        t_accuracy,
        objective_trace: output.state.objective_trace.clone(),
        update_rule_variant: output.update_rule_variant.clone(),
    };
    match (s_accuracy, t_accuracy) {
        (Some(s), Some(t)) => println!("s-accuracy {s:.4}  t-accuracy {t:.4}"),
        (Some(s), None) => println!("s-accuracy {s:.4}  t-accuracy n/a"),
        _ => println!("accuracies n/a (no true labels)"),
    }

    if let Some(out) = args.out.or_else(|| file.get_path("out")) {
        ensure_out_dir(&out)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(out.join("run_report.json"), json + "\n")
            .map_err(|e| Failure::Data(e.to_string()))?;

        // Predictions in the caller's original sample order.
        let full_source = output.source_full_predictions(&pair);
        let restored = pair.restore_source_order(&full_source)?;
        save_labels(&restored, &out.join("predictions_source.txt"))?;
        save_labels(&output.target_predictions, &out.join("predictions_target.txt"))?;

        let mut log = String::new();
        for record in &output.iteration_log {
            log.push_str(&serde_json::to_string(record).expect("record serializes"));
            log.push('\n');
        }
        std::fs::write(out.join("iterations.jsonl"), log)
            .map_err(|e| Failure::Data(e.to_string()))?;

        if args.dump_embeddings {
            embed_dump(&output, &pair, &out.join("embeddings.csv"))?;
        }
    }
    Ok(())
}

fn experiment_spec_from(args: &ProtocolArgs) -> Result<(ExperimentSpec, Option<PathBuf>), Failure> {
    let (config, file) = effective_solver_config(&args.solver)?;

    let format: FeatureFormat = args
        .format
        .map(Into::into)
        .or_else(|| match file.values.get("format").map(String::as_str) {
            Some("raw") => Some(FeatureFormat::RawBinary),
            Some("csv") => Some(FeatureFormat::Csv),
            _ => None,
        })
        .unwrap_or(FeatureFormat::Csv);

    let source = args.source.clone().or_else(|| file.get_path("source"));
    let pair = match source {
        Some(source) => PairSource::Files {
            source,
            target: required_path(args.target.clone(), &file, "target")?,
            labels_source: required_path(args.labels_source.clone(), &file, "labels-source")?,
            labels_target: args
                .labels_target
                .clone()
                .or_else(|| file.get_path("labels-target")),
            format,
        },
        None => PairSource::Synthetic {
            spec: args.synth.to_spec(&file)?,
            data_seed: args.synth.data_seed(&file)?,
        },
    };

    let baselines = if args.baseline.is_empty() {
        Baseline::all()
    } else {
        args.baseline.iter().map(|&b| b.into()).collect()
    };

    let spec = ExperimentSpec {
        pair,
        per_class_labels: args
            .per_class
            .or(file.get::<usize>("per-class")?)
            .unwrap_or(5),
        repeats: args
            .repeats
            .or(file.get::<usize>("repeats")?)
            .unwrap_or(10),
        solver: config,
        baselines,
        normalize_samples: args.solver.normalize,
    };
    let out = args.out.clone().or_else(|| file.get_path("out"));
    Ok((spec, out))
}

fn protocol_command(args: ProtocolArgs) -> CliResult {
    let (spec, out) = experiment_spec_from(&args)?;
    let report = run_protocol(&spec)?;

    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.4}", x));
    println!(
        "solver: s {} +- {}  t {} +- {}  ({} repeats, {} incomplete, {:.1}s)",
        fmt(report.solver_summary.mean_s),
        fmt(report.solver_summary.std_s),
        fmt(report.solver_summary.mean_t),
        fmt(report.solver_summary.std_t),
        report.per_repeat.len(),
        report.incomplete_repeats,
        report.elapsed_seconds
    );
    for (name, stats) in &report.baseline_summary {
        println!(
            "{name}: s {} +- {}  t {} +- {}",
            fmt(stats.mean_s),
            fmt(stats.std_s),
            fmt(stats.mean_t),
            fmt(stats.std_t)
        );
    }

    if let Some(out) = out {
        ensure_out_dir(&out)?;
        report.write_json(&out.join("run_report.json"))?;
        let mut csv = String::from("mean_s,std_s,mean_t,std_t\n");
        csv.push_str(&report.summary_csv_row());
        csv.push('\n');
        std::fs::write(out.join("summary.csv"), csv)
            .map_err(|e| Failure::Data(e.to_string()))?;
    }
    Ok(())
}

fn sweep_command(args: SweepArgs) -> CliResult {
    let parameter = SweepParameter::parse(&args.param)
        .ok_or_else(|| Failure::Usage(format!("unknown sweep parameter {:?}", args.param)))?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad grid value {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    let (spec, out) = experiment_spec_from(&args.protocol)?;

    let points = sweep(&spec, parameter, &values)?;
    for p in &points {
        println!(
            "{}={}: {}",
            p.parameter,
            p.value,
            p.report.summary_csv_row()
        );
    }
    if let Some(out) = out {
        ensure_out_dir(&out)?;
        write_sweep_csv(&points, &out.join("sweep.csv"))?;
        let json = serde_json::to_string_pretty(&points).expect("points serialize");
        std::fs::write(out.join("sweep_reports.json"), json + "\n")
            .map_err(|e| Failure::Data(e.to_string()))?;
    }
    Ok(())
}

fn synth_command(args: SynthArgs) -> CliResult {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    let spec = args.synth.to_spec(&file)?;
    let seed = args
        .seed
        .or(args.synth.data_seed)
        .or(file.get::<u64>("data-seed")?)
        .unwrap_or(0);
    let format: FeatureFormat = args.format.map(Into::into).unwrap_or(FeatureFormat::Csv);

    let data = generate_synthetic(&spec, seed)?;
    ensure_out_dir(&args.out)?;
    let ext = match format {
        FeatureFormat::Csv => "csv",
        FeatureFormat::RawBinary => "bin",
    };
    save_features(
        &data.source,
        &args.out.join(format!("source_features.{ext}")),
        format,
    )?;
    save_features(
        &data.target,
        &args.out.join(format!("target_features.{ext}")),
        format,
    )?;
    save_labels(&data.labels_source, &args.out.join("source_labels.txt"))?;
    save_labels(&data.labels_target, &args.out.join("target_labels.txt"))?;
    println!(
        "wrote {} classes x {} dims: {} source, {} target samples to {}",
        spec.class_count,
        spec.feature_dim,
        data.source.sample_count(),
        data.target.sample_count(),
        args.out.display()
    );
    Ok(())
}

fn selfcheck_command() -> CliResult {
    let results = crate::selfcheck::run_all();
    let mut all_passed = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}  ({})", r.name, r.detail);
        all_passed &= r.passed;
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Numerical("one or more self-checks failed".into()))
    }
}
