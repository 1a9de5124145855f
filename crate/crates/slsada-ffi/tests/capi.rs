//! Exercises the C ABI through the exported extern functions.

use std::ffi::CStr;

use slsada::dataset::{generate_synthetic, sample_labeled_subset, SyntheticSpec};
use slsada_ffi::*;

fn synthetic_buffers() -> (
    usize,
    Vec<f64>,
    Vec<f64>,
    Vec<usize>,
    Vec<usize>,
    Vec<usize>,
    Vec<usize>,
    usize,
) {
    let spec = SyntheticSpec {
        class_count: 3,
        feature_dim: 8,
        per_class_source: 15,
        per_class_target: 15,
        covariance_scale: 0.4,
        rotation_angle_deg: 15.0,
        mean_offset: 0.8,
        class_mean_scale: 0.6,
    };
    let data = generate_synthetic(&spec, 3).unwrap();
    let idx = sample_labeled_subset(&data.labels_source, 3, 1).unwrap();
    let classes: Vec<usize> = idx.iter().map(|&i| data.labels_source[i]).collect();
    let source: Vec<f64> = data.source.values().iter().copied().collect();
    let target: Vec<f64> = data.target.values().iter().copied().collect();
    (
        spec.feature_dim,
        source,
        target,
        idx,
        classes,
        data.labels_source,
        data.labels_target,
        spec.class_count,
    )
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(slsada_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_presets_match_published_defaults() {
    let small = slsada_config_small();
    assert_eq!(small.subspace_dim, 20);
    assert_eq!(small.scale_regularizer, 0.05);
    assert_eq!(small.clustering_weight, 0.01);
    assert_eq!(small.iterations, 5);
    assert_eq!(small.neighbor_count, 20);
    let large = slsada_config_large();
    assert_eq!(large.subspace_dim, 100);
    assert_eq!(large.scale_regularizer, 0.1);
}

#[test]
fn full_round_trip_through_the_c_api() {
    let (m, source, target, idx, classes, true_s, true_t, class_count) = synthetic_buffers();
    let n_s = true_s.len();
    let n_t = true_t.len();

    let mut pair: *mut SlsadaPair = std::ptr::null_mut();
    let status = unsafe {
        slsada_pair_create(
            m,
            n_s,
            source.as_ptr(),
            n_t,
            target.as_ptr(),
            class_count,
            idx.len(),
            idx.as_ptr(),
            classes.as_ptr(),
            true_s.as_ptr(),
            true_t.as_ptr(),
            &mut pair,
        )
    };
    assert_eq!(status, SlsadaStatus::Ok);
    assert!(!pair.is_null());

    let mut config = slsada_config_small();
    config.subspace_dim = 4;
    config.neighbor_count = 6;
    config.iterations = 3;

    let mut result: *mut SlsadaResult = std::ptr::null_mut();
    let status = unsafe { slsada_run(pair, &config, &mut result) };
    assert_eq!(status, SlsadaStatus::Ok, "{:?}", unsafe {
        CStr::from_ptr(slsada_last_error_message())
    });

    unsafe {
        assert_eq!(slsada_result_source_count(result), n_s);
        assert_eq!(slsada_result_target_count(result), n_t);
        assert_eq!(slsada_result_trace_len(result), config.iterations + 1);

        let mut source_labels = vec![0u32; n_s];
        assert_eq!(
            slsada_result_copy_source_labels(result, source_labels.as_mut_ptr(), n_s),
            SlsadaStatus::Ok
        );
        // Labeled samples keep their given classes, in the caller's order.
        for (&i, &c) in idx.iter().zip(classes.iter()) {
            assert_eq!(source_labels[i], c as u32);
        }

        let mut target_labels = vec![0u32; n_t];
        assert_eq!(
            slsada_result_copy_target_labels(result, target_labels.as_mut_ptr(), n_t),
            SlsadaStatus::Ok
        );
        assert!(target_labels.iter().all(|&c| (c as usize) < class_count));

        let mut trace = vec![0.0f64; config.iterations + 1];
        assert_eq!(
            slsada_result_copy_objective_trace(result, trace.as_mut_ptr(), trace.len()),
            SlsadaStatus::Ok
        );
        assert!(trace.iter().all(|v| v.is_finite()));

        let s_acc = slsada_result_source_accuracy(result);
        let t_acc = slsada_result_target_accuracy(result);
        assert!((0.0..=1.0).contains(&s_acc), "{s_acc}");
        assert!((0.0..=1.0).contains(&t_acc), "{t_acc}");

        slsada_result_free(result);
        slsada_pair_free(pair);
    }
}

#[test]
fn c_api_matches_direct_library_run() {
    let (m, source, target, idx, classes, true_s, true_t, class_count) = synthetic_buffers();
    let n_s = true_s.len();
    let n_t = true_t.len();

    let mut pair: *mut SlsadaPair = std::ptr::null_mut();
    unsafe {
        slsada_pair_create(
            m,
            n_s,
            source.as_ptr(),
            n_t,
            target.as_ptr(),
            class_count,
            idx.len(),
            idx.as_ptr(),
            classes.as_ptr(),
            true_s.as_ptr(),
            true_t.as_ptr(),
            &mut pair,
        );
    }
    let mut config = slsada_config_small();
    config.subspace_dim = 4;
    config.neighbor_count = 6;
    let mut result: *mut SlsadaResult = std::ptr::null_mut();
    unsafe {
        assert_eq!(slsada_run(pair, &config, &mut result), SlsadaStatus::Ok);
    }
    let mut via_c = vec![0u32; n_t];
    unsafe {
        slsada_result_copy_target_labels(result, via_c.as_mut_ptr(), n_t);
        slsada_result_free(result);
        slsada_pair_free(pair);
    }

    // Same computation through the Rust API.
    let spec = SyntheticSpec {
        class_count: 3,
        feature_dim: 8,
        per_class_source: 15,
        per_class_target: 15,
        covariance_scale: 0.4,
        rotation_angle_deg: 15.0,
        mean_offset: 0.8,
        class_mean_scale: 0.6,
    };
    let data = generate_synthetic(&spec, 3).unwrap();
    let pair = data.into_pair(3, 1).unwrap();
    let rust_config = slsada::solver::SolverConfig {
        subspace_dim: 4,
        neighbor_count: 6,
        ..slsada::solver::SolverConfig::small_preset()
    };
    let out = slsada::solver::run_slsada(&pair, &rust_config).unwrap();
    let direct: Vec<u32> = out.target_predictions.iter().map(|&c| c as u32).collect();
    assert_eq!(via_c, direct);
}

#[test]
fn bad_inputs_surface_errors() {
    // Class id out of range.
    let m = 2;
    let source = vec![0.0f64; 2 * 4];
    let target = vec![0.0f64; 2 * 3];
    let idx = vec![0usize];
    let classes = vec![7usize]; // class_count is 2
    let mut pair: *mut SlsadaPair = std::ptr::null_mut();
    let status = unsafe {
        slsada_pair_create(
            m,
            4,
            source.as_ptr(),
            3,
            target.as_ptr(),
            2,
            1,
            idx.as_ptr(),
            classes.as_ptr(),
            std::ptr::null(),
            std::ptr::null(),
            &mut pair,
        )
    };
    assert_eq!(status, SlsadaStatus::DataError);
    let message = unsafe { CStr::from_ptr(slsada_last_error_message()) };
    assert!(!message.to_bytes().is_empty());

    // NULL output pointer.
    let status = unsafe {
        slsada_pair_create(
            m,
            4,
            source.as_ptr(),
            3,
            target.as_ptr(),
            2,
            1,
            idx.as_ptr(),
            classes.as_ptr(),
            std::ptr::null(),
            std::ptr::null(),
            std::ptr::null_mut(),
        )
    };
    assert_eq!(status, SlsadaStatus::NullArgument);

    // Undersized label buffer.
    let (fm, s, t, i2, c2, ts, tt, cc) = synthetic_buffers();
    let mut pair: *mut SlsadaPair = std::ptr::null_mut();
    unsafe {
        slsada_pair_create(
            fm,
            ts.len(),
            s.as_ptr(),
            tt.len(),
            t.as_ptr(),
            cc,
            i2.len(),
            i2.as_ptr(),
            c2.as_ptr(),
            ts.as_ptr(),
            tt.as_ptr(),
            &mut pair,
        );
    }
    let mut config = slsada_config_small();
    config.subspace_dim = 4;
    config.neighbor_count = 6;
    config.iterations = 1;
    let mut result: *mut SlsadaResult = std::ptr::null_mut();
    unsafe {
        assert_eq!(slsada_run(pair, &config, &mut result), SlsadaStatus::Ok);
        let mut tiny = vec![0u32; 1];
        assert_eq!(
            slsada_result_copy_target_labels(result, tiny.as_mut_ptr(), 1),
            SlsadaStatus::UsageError
        );
        slsada_result_free(result);
        slsada_pair_free(pair);
    }
}
