//! C ABI for the domain-adaptation solver.
//!
//! Handles are opaque pointers created and freed by this library. Functions
//! that can fail return [`SlsadaStatus`]; on any non-OK status
//! [`slsada_last_error_message`] holds a thread-local description of the
//! failure. Feature buffers are row-major `feature_dim x sample_count`
//! (entry `(i, j)` at index `i * sample_count + j`); predictions come back
//! in the caller's original sample order.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use slsada::dataset::{DomainPair, FeatureMatrix};
use slsada::solver::{run_slsada, GraphSchedule, SolverConfig};
use slsada::Error;

/// Outcome of a fallible call. Matches the CLI exit-code convention.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlsadaStatus {
    Ok = 0,
    UsageError = 2,
    DataError = 3,
    NumericalError = 4,
    NullArgument = 5,
    Panic = 6,
}

/// When the similarity graph is refreshed from the embedding.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlsadaGraphSchedule {
    Rebuild = 0,
    Frozen = 1,
}

/// Solver hyperparameters; obtain defaults from [`slsada_config_small`] or
/// [`slsada_config_large`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlsadaConfig {
    pub subspace_dim: usize,
    pub clustering_weight: f64,
    pub scale_regularizer: f64,
    pub iterations: usize,
    pub inner_updates: usize,
    pub neighbor_count: usize,
    pub epsilon: f64,
    pub graph_schedule: SlsadaGraphSchedule,
    pub seed: u64,
    pub conditional_alignment: bool,
}

impl From<SolverConfig> for SlsadaConfig {
    fn from(c: SolverConfig) -> Self {
        SlsadaConfig {
            subspace_dim: c.subspace_dim,
            clustering_weight: c.clustering_weight,
            scale_regularizer: c.scale_regularizer,
            iterations: c.iterations,
            inner_updates: c.inner_updates,
            neighbor_count: c.neighbor_count,
            epsilon: c.epsilon,
            graph_schedule: match c.graph_schedule {
                GraphSchedule::Rebuild => SlsadaGraphSchedule::Rebuild,
                GraphSchedule::Frozen => SlsadaGraphSchedule::Frozen,
            },
            seed: c.seed,
            conditional_alignment: c.conditional_alignment,
        }
    }
}

impl From<&SlsadaConfig> for SolverConfig {
    fn from(c: &SlsadaConfig) -> Self {
        SolverConfig {
            subspace_dim: c.subspace_dim,
            clustering_weight: c.clustering_weight,
            scale_regularizer: c.scale_regularizer,
            iterations: c.iterations,
            inner_updates: c.inner_updates,
            neighbor_count: c.neighbor_count,
            epsilon: c.epsilon,
            graph_schedule: match c.graph_schedule {
                SlsadaGraphSchedule::Rebuild => GraphSchedule::Rebuild,
                SlsadaGraphSchedule::Frozen => GraphSchedule::Frozen,
            },
            seed: c.seed,
            conditional_alignment: c.conditional_alignment,
        }
    }
}

/// Opaque source/target pair handle.
pub struct SlsadaPair {
    inner: DomainPair,
}

/// Opaque result handle.
pub struct SlsadaResult {
    /// Predictions for every source sample, original order.
    source_predictions: Vec<usize>,
    /// Predictions for every target sample.
    target_predictions: Vec<usize>,
    objective_trace: Vec<f64>,
    source_accuracy: f64,
    target_accuracy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> SlsadaStatus {
    match error {
        Error::Numerical(_) => SlsadaStatus::NumericalError,
        _ => SlsadaStatus::DataError,
    }
}

fn guarded<F>(body: F) -> SlsadaStatus
where
    F: FnOnce() -> SlsadaStatus,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SlsadaStatus::Panic
        }
    }
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn slsada_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the last failure on this thread; valid until the next
/// failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn slsada_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Defaults for small benchmarks (k=20, lambda=0.05).
#[no_mangle]
pub extern "C" fn slsada_config_small() -> SlsadaConfig {
    SolverConfig::small_preset().into()
}

/// Defaults for large many-category datasets (k=100, lambda=0.1).
#[no_mangle]
pub extern "C" fn slsada_config_large() -> SlsadaConfig {
    SolverConfig::large_preset().into()
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Builds a pair from dense row-major feature buffers.
///
/// `labeled_indices[i]` is a source column (0-based, caller's order) whose
/// class is `labeled_classes[i]`. `true_source` / `true_target` may be NULL;
/// when given they enable the accuracy fields of the result.
///
/// # Safety
/// All non-NULL pointers must reference readable buffers of the documented
/// lengths: features `feature_dim * count`, labeled arrays `labeled_count`,
/// truth arrays `source_count` / `target_count`.
#[no_mangle]
pub unsafe extern "C" fn slsada_pair_create(
    feature_dim: usize,
    source_count: usize,
    source: *const f64,
    target_count: usize,
    target: *const f64,
    class_count: usize,
    labeled_count: usize,
    labeled_indices: *const usize,
    labeled_classes: *const usize,
    true_source: *const usize,
    true_target: *const usize,
    out: *mut *mut SlsadaPair,
) -> SlsadaStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is NULL");
            return SlsadaStatus::NullArgument;
        }
        let (Some(source), Some(target)) = (
            slice_arg(source, feature_dim * source_count),
            slice_arg(target, feature_dim * target_count),
        ) else {
            set_error("feature buffer is NULL");
            return SlsadaStatus::NullArgument;
        };
        let (Some(idx), Some(classes)) = (
            slice_arg(labeled_indices, labeled_count),
            slice_arg(labeled_classes, labeled_count),
        ) else {
            set_error("labeled-subset buffer is NULL");
            return SlsadaStatus::NullArgument;
        };
        let true_source = if true_source.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(true_source, source_count).to_vec())
        };
        let true_target = if true_target.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(true_target, target_count).to_vec())
        };

        let build = || -> Result<DomainPair, Error> {
            let source = FeatureMatrix::from_row_major(feature_dim, source_count, source.to_vec())?;
            let target = FeatureMatrix::from_row_major(feature_dim, target_count, target.to_vec())?;
            DomainPair::new(
                source,
                target,
                idx,
                classes,
                class_count,
                true_source,
                true_target,
            )
        };
        match build() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SlsadaPair { inner }));
                SlsadaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees a pair handle; NULL is ignored.
///
/// # Safety
/// `pair` must have been returned by [`slsada_pair_create`] and not freed.
#[no_mangle]
pub unsafe extern "C" fn slsada_pair_free(pair: *mut SlsadaPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Runs the solver; on success `*out` owns the result.
///
/// # Safety
/// `pair` and `config` must be valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slsada_run(
    pair: *const SlsadaPair,
    config: *const SlsadaConfig,
    out: *mut *mut SlsadaResult,
) -> SlsadaStatus {
    guarded(|| {
        if pair.is_null() || config.is_null() || out.is_null() {
            set_error("NULL argument to slsada_run");
            return SlsadaStatus::NullArgument;
        }
        let pair = &(*pair).inner;
        let config: SolverConfig = (&*config).into();
        match run_slsada(pair, &config) {
            Ok(output) => {
                let source_predictions = match pair
                    .restore_source_order(&output.source_full_predictions(pair))
                {
                    Ok(p) => p,
                    Err(e) => {
                        set_error(&e.to_string());
                        return status_of(&e);
                    }
                };
                let source_accuracy =
                    slsada::harness::accuracy_s(&output.source_unlabeled_predictions, pair)
                        .unwrap_or(f64::NAN);
                let target_accuracy =
                    slsada::harness::accuracy_t(&output.target_predictions, pair)
                        .unwrap_or(f64::NAN);
                let result = SlsadaResult {
                    source_predictions,
                    target_predictions: output.target_predictions,
                    objective_trace: output.state.objective_trace,
                    source_accuracy,
                    target_accuracy,
                };
                *out = Box::into_raw(Box::new(result));
                SlsadaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of source samples covered by the result.
///
/// # Safety
/// `result` must be a live handle from [`slsada_run`].
#[no_mangle]
pub unsafe extern "C" fn slsada_result_source_count(result: *const SlsadaResult) -> usize {
    if result.is_null() {
        return 0;
    }
    (*result).source_predictions.len()
}

/// Number of target samples covered by the result.
///
/// # Safety
/// `result` must be a live handle from [`slsada_run`].
#[no_mangle]
pub unsafe extern "C" fn slsada_result_target_count(result: *const SlsadaResult) -> usize {
    if result.is_null() {
        return 0;
    }
    (*result).target_predictions.len()
}

/// Entries in the objective trace (initialization plus one per iteration).
///
/// # Safety
/// `result` must be a live handle from [`slsada_run`].
#[no_mangle]
pub unsafe extern "C" fn slsada_result_trace_len(result: *const SlsadaResult) -> usize {
    if result.is_null() {
        return 0;
    }
    (*result).objective_trace.len()
}

unsafe fn copy_labels(
    labels: &[usize],
    buffer: *mut u32,
    len: usize,
    what: &str,
) -> SlsadaStatus {
    if buffer.is_null() {
        set_error("label buffer is NULL");
        return SlsadaStatus::NullArgument;
    }
    if len < labels.len() {
        set_error(&format!(
            "{what}: buffer holds {len} entries, need {}",
            labels.len()
        ));
        return SlsadaStatus::UsageError;
    }
    for (i, &l) in labels.iter().enumerate() {
        *buffer.add(i) = l as u32;
    }
    SlsadaStatus::Ok
}

/// Copies hard source labels (clamped labeled samples plus predictions) in
/// the caller's original sample order.
///
/// # Safety
/// `buffer` must hold at least `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn slsada_result_copy_source_labels(
    result: *const SlsadaResult,
    buffer: *mut u32,
    len: usize,
) -> SlsadaStatus {
    guarded(|| {
        if result.is_null() {
            set_error("result is NULL");
            return SlsadaStatus::NullArgument;
        }
        copy_labels(&(*result).source_predictions, buffer, len, "source labels")
    })
}

/// Copies hard target predictions.
///
/// # Safety
/// `buffer` must hold at least `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn slsada_result_copy_target_labels(
    result: *const SlsadaResult,
    buffer: *mut u32,
    len: usize,
) -> SlsadaStatus {
    guarded(|| {
        if result.is_null() {
            set_error("result is NULL");
            return SlsadaStatus::NullArgument;
        }
        copy_labels(&(*result).target_predictions, buffer, len, "target labels")
    })
}

/// Copies the objective trace.
///
/// # Safety
/// `buffer` must hold at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn slsada_result_copy_objective_trace(
    result: *const SlsadaResult,
    buffer: *mut f64,
    len: usize,
) -> SlsadaStatus {
    guarded(|| {
        if result.is_null() {
            set_error("result is NULL");
            return SlsadaStatus::NullArgument;
        }
        if buffer.is_null() {
            set_error("trace buffer is NULL");
            return SlsadaStatus::NullArgument;
        }
        let trace = &(*result).objective_trace;
        if len < trace.len() {
            set_error(&format!(
                "objective trace: buffer holds {len} entries, need {}",
                trace.len()
            ));
            return SlsadaStatus::UsageError;
        }
        for (i, &v) in trace.iter().enumerate() {
            *buffer.add(i) = v;
        }
        SlsadaStatus::Ok
    })
}

/// Whole-source accuracy, or NaN when true labels were not supplied.
///
/// # Safety
/// `result` must be a live handle from [`slsada_run`].
#[no_mangle]
pub unsafe extern "C" fn slsada_result_source_accuracy(result: *const SlsadaResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    (*result).source_accuracy
}

/// Target accuracy, or NaN when true labels were not supplied.
///
/// # Safety
/// `result` must be a live handle from [`slsada_run`].
#[no_mangle]
pub unsafe extern "C" fn slsada_result_target_accuracy(result: *const SlsadaResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    (*result).target_accuracy
}

/// Frees a result handle; NULL is ignored.
///
/// # Safety
/// `result` must have been returned by [`slsada_run`] and not freed.
#[no_mangle]
pub unsafe extern "C" fn slsada_result_free(result: *mut SlsadaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
