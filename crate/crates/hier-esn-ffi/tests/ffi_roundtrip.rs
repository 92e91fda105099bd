//! Exercises the C surface through the extern "C" functions directly.

use hier_esn_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(hier_esn_last_error())
            .to_string_lossy()
            .into_owned()
    }
}

fn build_network(kind: u32, sub_sizes: &[usize], hyper: &[f64], seed: u64) -> *mut HierEsnNetwork {
    let mut net: *mut HierEsnNetwork = ptr::null_mut();
    let status = unsafe {
        hier_esn_network_new(
            kind,
            sub_sizes.as_ptr(),
            sub_sizes.len(),
            1,
            hyper.as_ptr(),
            seed,
            &mut net,
        )
    };
    assert_eq!(status, HierEsnStatus::Ok, "build failed: {}", last_error());
    assert!(!net.is_null());
    net
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(hier_esn_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn null_pointers_are_rejected() {
    let status =
        unsafe { hier_esn_network_new(0, ptr::null(), 1, 1, ptr::null(), 0, ptr::null_mut()) };
    assert_eq!(status, HierEsnStatus::NullPointer);
    assert!(last_error().contains("null"));
}

#[test]
fn invalid_architecture_code_is_reported() {
    let mut net: *mut HierEsnNetwork = ptr::null_mut();
    let sizes = [10usize];
    let hyper = [0.5, 0.9, 0.8];
    let status =
        unsafe { hier_esn_network_new(9, sizes.as_ptr(), 1, 1, hyper.as_ptr(), 0, &mut net) };
    assert_eq!(status, HierEsnStatus::InvalidArgument);
    assert!(
        last_error().contains("architecture code 9"),
        "{}",
        last_error()
    );
}

#[test]
fn out_of_range_hyperparameters_are_reported() {
    let mut net: *mut HierEsnNetwork = ptr::null_mut();
    let sizes = [10usize];
    let hyper = [0.5, 1.5, 0.8];
    let status =
        unsafe { hier_esn_network_new(0, sizes.as_ptr(), 1, 1, hyper.as_ptr(), 0, &mut net) };
    assert_eq!(status, HierEsnStatus::InvalidArgument);
    assert!(last_error().contains("(0, 1]"), "{}", last_error());
}

#[test]
fn step_matches_run_and_is_deterministic() {
    let sizes = [20usize, 15];
    let hyper = [0.5, 0.9, 0.8, 0.3, 0.7, 1.0];
    let net_a = build_network(2, &sizes, &hyper, 42);
    let net_b = build_network(2, &sizes, &hyper, 42);

    let total = {
        let mut n = 0usize;
        let status = unsafe { hier_esn_network_total_nodes(net_a, &mut n) };
        assert_eq!(status, HierEsnStatus::Ok);
        n
    };
    assert_eq!(total, 35);

    let inputs: Vec<f64> = (0..30).map(|t| (t as f64 * 0.37).sin() * 0.4).collect();
    let mut states_run = vec![0.0; 30 * total];
    let status = unsafe {
        hier_esn_network_run(
            net_a,
            inputs.as_ptr(),
            30,
            1,
            true,
            states_run.as_mut_ptr(),
            states_run.len(),
        )
    };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());

    unsafe { hier_esn_network_reset(net_b) };
    let mut state = vec![0.0; total];
    for (t, u) in inputs.iter().enumerate() {
        let status = unsafe { hier_esn_network_step(net_b, u, 1, state.as_mut_ptr(), state.len()) };
        assert_eq!(status, HierEsnStatus::Ok);
        assert_eq!(&states_run[t * total..(t + 1) * total], state.as_slice());
    }

    unsafe {
        hier_esn_network_free(net_a);
        hier_esn_network_free(net_b);
    }
}

#[test]
fn train_and_predict_beat_the_mean_on_narma10() {
    let length = 1200usize;
    let mut u = vec![0.0; length];
    let mut target = vec![0.0; length];
    let status = unsafe { hier_esn_narma10(length, 7, u.as_mut_ptr(), target.as_mut_ptr()) };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());

    let sizes = [100usize];
    let hyper = [0.4, 0.9, 0.9];
    let net = build_network(0, &sizes, &hyper, 5);

    let mut readout: *mut HierEsnReadout = ptr::null_mut();
    let status = unsafe {
        hier_esn_readout_train(
            net,
            u.as_ptr(),
            length,
            1,
            target.as_ptr(),
            1,
            100,
            true,
            true,
            1e-8,
            &mut readout,
        )
    };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());

    let mut outputs = 0usize;
    unsafe { hier_esn_readout_outputs(readout, &mut outputs) };
    assert_eq!(outputs, 1);

    let mut predictions = vec![0.0; length];
    let status = unsafe {
        hier_esn_readout_predict(
            readout,
            net,
            u.as_ptr(),
            length,
            1,
            true,
            predictions.as_mut_ptr(),
            predictions.len(),
        )
    };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());

    let mut err = f64::NAN;
    let status = unsafe {
        hier_esn_nrmse(
            predictions[100..].as_ptr(),
            target[100..].as_ptr(),
            length - 100,
            &mut err,
        )
    };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());
    assert!(
        err < 0.7,
        "train-fit NRMSE {err} is no better than the mean"
    );

    unsafe {
        hier_esn_readout_free(readout);
        hier_esn_network_free(net);
    }
}

#[test]
fn json_round_trip_preserves_behavior() {
    let sizes = [12usize, 12];
    let hyper = [0.5, 0.8, 0.9, 0.2, 0.6, 0.7];
    let net = build_network(1, &sizes, &hyper, 99);

    let mut json: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { hier_esn_network_to_json(net, &mut json) };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"wide\""));

    let mut restored: *mut HierEsnNetwork = ptr::null_mut();
    let status = unsafe { hier_esn_network_from_json(json, &mut restored) };
    assert_eq!(status, HierEsnStatus::Ok, "{}", last_error());

    let inputs: Vec<f64> = (0..20).map(|t| (t as f64 * 0.21).cos() * 0.3).collect();
    let mut a = vec![0.0; 20 * 24];
    let mut b = vec![0.0; 20 * 24];
    unsafe {
        assert_eq!(
            hier_esn_network_run(net, inputs.as_ptr(), 20, 1, true, a.as_mut_ptr(), a.len()),
            HierEsnStatus::Ok
        );
        assert_eq!(
            hier_esn_network_run(
                restored,
                inputs.as_ptr(),
                20,
                1,
                true,
                b.as_mut_ptr(),
                b.len()
            ),
            HierEsnStatus::Ok
        );
    }
    assert_eq!(a, b);

    unsafe {
        hier_esn_string_free(json);
        hier_esn_network_free(net);
        hier_esn_network_free(restored);
    }
}

#[test]
fn task_generators_fill_buffers() {
    let mut mso = vec![1.0; 64];
    assert_eq!(
        unsafe { hier_esn_mso12(64, mso.as_mut_ptr()) },
        HierEsnStatus::Ok
    );
    assert_eq!(mso[0], 0.0);

    let mut mg = vec![0.0; 128];
    assert_eq!(
        unsafe { hier_esn_mackey_glass(128, 17.0, 1, mg.as_mut_ptr()) },
        HierEsnStatus::Ok
    );
    assert!(mg.iter().all(|v| v.is_finite()));

    let mut rho = 0.0;
    let eye = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(
        unsafe { hier_esn_spectral_radius(eye.as_ptr(), 2, &mut rho) },
        HierEsnStatus::Ok
    );
    assert!((rho - 1.0).abs() < 1e-9);
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("hier_esn.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for decl in [
        "HierEsnStatus",
        "HierEsnNetwork",
        "HierEsnReadout",
        "hier_esn_network_new",
        "hier_esn_network_run",
        "hier_esn_readout_train",
        "hier_esn_readout_predict",
        "hier_esn_nrmse",
        "hier_esn_narma10",
        "hier_esn_last_error",
    ] {
        assert!(text.contains(decl), "header is missing {decl}");
    }

    // Syntax-check the header when a C compiler is around.
    let compiler = ["cc", "gcc", "clang"].into_iter().find(|c| {
        std::process::Command::new(c)
            .arg("--version")
            .output()
            .is_ok()
    });
    if let Some(cc) = compiler {
        let out = std::process::Command::new(cc)
            .args(["-std=c99", "-fsyntax-only", "-x", "c"])
            .arg(&header)
            .output()
            .expect("compiler runs");
        assert!(
            out.status.success(),
            "header does not compile:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
