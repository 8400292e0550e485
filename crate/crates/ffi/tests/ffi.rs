use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pcscale_ffi::*;

fn last_error() -> String {
    let p = pcs_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny() -> *mut PcsModelConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { pcs_model_config_new(1, 1, 1, 1, 1, &mut cfg) }, PcsStatus::Ok);
    cfg
}

fn step(algorithm: PcsAlgorithm) -> PcsStepSpec {
    PcsStepSpec {
        algorithm,
        batch: 0,
        update_batch: 0,
        sampling_rounds: 0,
        group_size: 0,
        expert_per_prompt: 0,
        on_policy_kept: 0,
        off_policy_kept: 0,
        avg_seq_len: 0,
        avg_on_len: 0,
        avg_off_len: 0,
    }
}

#[test]
fn flops_hand_values() {
    let cfg = tiny();
    let mut per_token = 0.0;
    assert_eq!(
        unsafe { pcs_forward_flops_per_token(cfg, 1, &mut per_token) },
        PcsStatus::Ok
    );
    assert_eq!(per_token, 22.0);

    let cases = [
        (
            PcsStepSpec {
                batch: 2,
                avg_seq_len: 1,
                ..step(PcsAlgorithm::Sft)
            },
            132.0,
        ),
        (
            PcsStepSpec {
                batch: 1,
                group_size: 2,
                avg_seq_len: 1,
                ..step(PcsAlgorithm::Grpo)
            },
            176.0,
        ),
        (
            PcsStepSpec {
                sampling_rounds: 2,
                batch: 1,
                update_batch: 1,
                group_size: 1,
                avg_seq_len: 1,
                ..step(PcsAlgorithm::Dapo)
            },
            110.0,
        ),
    ];
    for (spec, want) in cases {
        let mut got = 0.0;
        assert_eq!(unsafe { pcs_step_flops(cfg, &spec, &mut got) }, PcsStatus::Ok);
        assert_eq!(got, want, "{spec:?}");
    }

    let specs = [cases[0].0, cases[0].0];
    let mut totals = [0.0; 2];
    assert_eq!(
        unsafe { pcs_cumulative_exaflops(cfg, specs.as_ptr(), 2, totals.as_mut_ptr()) },
        PcsStatus::Ok
    );
    assert_eq!(totals, [132e-18, 264e-18]);
    unsafe { pcs_model_config_free(cfg) };
}

#[test]
fn invalid_model_and_null_pointers() {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { pcs_model_config_new(1, 4, 1, 1, 8, &mut cfg) },
        PcsStatus::InvalidArgument
    );
    assert!(cfg.is_null());
    assert!(last_error().contains("kv_total_dim"));

    let mut out = 0.0;
    assert_eq!(
        unsafe { pcs_forward_flops_per_token(ptr::null(), 1, &mut out) },
        PcsStatus::NullPointer
    );
    assert_eq!(
        unsafe { pcs_model_config_new(1, 1, 1, 1, 1, ptr::null_mut()) },
        PcsStatus::NullPointer
    );

    // A successful call clears the message.
    assert_eq!(unsafe { pcs_win_rate(1, 2, &mut out) }, PcsStatus::Ok);
    assert!(pcs_last_error_message().is_null());
    unsafe { pcs_model_config_free(ptr::null_mut()) };
    unsafe { pcs_string_free(ptr::null_mut()) };
}

#[test]
fn sigmoid_eval_and_gradient() {
    let p = PcsSigmoidParams {
        p_start: 70.0,
        ceiling: 85.7,
        c_mid: 13.0,
        steepness: 1.5,
    };
    let mut v = 0.0;
    assert_eq!(unsafe { pcs_sigmoid_eval(p, 13.0, &mut v) }, PcsStatus::Ok);
    assert!((v - 77.85).abs() < 1e-12);

    let mut g = [0.0; 4];
    let mut v2 = 0.0;
    assert_eq!(
        unsafe { pcs_sigmoid_gradient(p, 13.0, &mut v2, g.as_mut_ptr()) },
        PcsStatus::Ok
    );
    assert_eq!(v, v2);
    assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);

    assert_eq!(unsafe { pcs_sigmoid_eval(p, -1.0, &mut v) }, PcsStatus::Domain);
}

#[test]
fn fit_round_trip() {
    let truth = PcsSigmoidParams {
        p_start: 70.0,
        ceiling: 85.7,
        c_mid: 13.0,
        steepness: 1.5,
    };
    let xs: Vec<f64> = (0..24).map(|i| 1.3 * 1000f64.powf(i as f64 / 23.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut y = 0.0;
            assert_eq!(unsafe { pcs_sigmoid_eval(truth, x, &mut y) }, PcsStatus::Ok);
            y
        })
        .collect();
    let opts = pcs_fit_options_default();
    assert_eq!(opts.train_fraction, 0.85);
    let mut fit = ptr::null_mut();
    assert_eq!(
        unsafe { pcs_fit(xs.as_ptr(), ys.as_ptr(), xs.len(), &opts, &mut fit) },
        PcsStatus::Ok
    );

    let mut p = PcsSigmoidParams {
        p_start: 0.0,
        ceiling: 0.0,
        c_mid: 0.0,
        steepness: 0.0,
    };
    assert_eq!(unsafe { pcs_fit_result_params(fit, &mut p) }, PcsStatus::Ok);
    assert!((p.ceiling - 85.7).abs() < 0.05, "{p:?}");

    let (mut has, mut r2) = (0, 0.0);
    assert_eq!(
        unsafe { pcs_fit_result_r2_train(fit, &mut has, &mut r2) },
        PcsStatus::Ok
    );
    assert!(has == 1 && r2 > 0.999);
    let mut rmse = 0.0;
    assert_eq!(
        unsafe { pcs_fit_result_rmse_val(fit, &mut has, &mut rmse) },
        PcsStatus::Ok
    );
    assert!(has == 1 && rmse < 0.05);
    let mut conv = 0;
    assert_eq!(unsafe { pcs_fit_result_converged(fit, &mut conv) }, PcsStatus::Ok);
    assert_eq!(conv, 1);

    let mut len = 0;
    assert_eq!(
        unsafe { pcs_fit_result_removed(fit, ptr::null_mut(), &mut len) },
        PcsStatus::Ok
    );
    assert_eq!(len, 0);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { pcs_fit_result_to_json(fit, &mut json) }, PcsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { pcs_string_free(json) };
    let art = pcscale::io::FitArtifact::from_json(&text).unwrap();
    assert_eq!(art.result.params.ceiling, p.ceiling);
    unsafe { pcs_fit_result_free(fit) };
}

#[test]
fn fit_reports_removed_points_and_small_buffers() {
    let truth = PcsSigmoidParams {
        p_start: 60.0,
        ceiling: 80.0,
        c_mid: 10.0,
        steepness: 1.2,
    };
    let xs: Vec<f64> = (0..30).map(|i| 1.0 * 100f64.powf(i as f64 / 29.0)).collect();
    let mut ys: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut y = 0.0;
            unsafe { pcs_sigmoid_eval(truth, x, &mut y) };
            y + 0.05 * ((i * 7 % 5) as f64 - 2.0)
        })
        .collect();
    ys[5] += 15.0;
    let mut fit = ptr::null_mut();
    assert_eq!(
        unsafe { pcs_fit(xs.as_ptr(), ys.as_ptr(), xs.len(), ptr::null(), &mut fit) },
        PcsStatus::Ok
    );
    let mut len = 0;
    assert_eq!(
        unsafe { pcs_fit_result_removed(fit, ptr::null_mut(), &mut len) },
        PcsStatus::Ok
    );
    assert!(len >= 1);
    let mut buf = vec![usize::MAX; len];
    let mut small = 0;
    assert_eq!(
        unsafe { pcs_fit_result_removed(fit, buf.as_mut_ptr(), &mut small) },
        PcsStatus::BufferTooSmall
    );
    assert_eq!(small, len);
    let mut cap = len;
    assert_eq!(
        unsafe { pcs_fit_result_removed(fit, buf.as_mut_ptr(), &mut cap) },
        PcsStatus::Ok
    );
    assert!(buf.contains(&5), "{buf:?}");
    unsafe { pcs_fit_result_free(fit) };
}

#[test]
fn fit_errors() {
    let xs = [1.0, 2.0, 3.0];
    let ys = [1.0, 2.0, 3.0];
    let mut fit = ptr::null_mut();
    assert_eq!(
        unsafe { pcs_fit(xs.as_ptr(), ys.as_ptr(), 3, ptr::null(), &mut fit) },
        PcsStatus::Fit
    );
    assert!(fit.is_null());
    let mut opts = pcs_fit_options_default();
    opts.train_fraction = 2.0;
    assert_eq!(
        unsafe { pcs_fit(xs.as_ptr(), ys.as_ptr(), 3, &opts, &mut fit) },
        PcsStatus::InvalidArgument
    );
    assert!(last_error().contains("train_fraction"));
}

#[test]
fn phases_and_statistics() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let losses = [1.0, 0.6, 0.5, 0.51, 0.53, 0.56];
    let mut labels = [PcsPhaseLabel::Indeterminate; 6];
    assert_eq!(
        unsafe { pcs_classify_phases(xs.as_ptr(), losses.as_ptr(), 6, 0.02, 0.1, labels.as_mut_ptr()) },
        PcsStatus::Ok
    );
    use PcsPhaseLabel::*;
    assert_eq!(labels, [Adaptive, Adaptive, Stable, Stable, MildOverfit, SevereOverfit]);
    assert_eq!(
        unsafe { pcs_classify_phases(xs.as_ptr(), losses.as_ptr(), 6, 0.1, 0.1, labels.as_mut_ptr()) },
        PcsStatus::InvalidArgument
    );

    let loss = [0.7, 0.59, 0.62, 0.55, 0.58];
    let perf = [24.0, 52.0, 40.0, 60.0, 50.0];
    let mut r = 0.0;
    assert_eq!(
        unsafe { pcs_pearson(loss.as_ptr(), perf.as_ptr(), 5, &mut r) },
        PcsStatus::Ok
    );
    assert!(r < -0.9);
    assert_eq!(
        unsafe { pcs_pearson(loss.as_ptr(), perf.as_ptr(), 2, &mut r) },
        PcsStatus::Domain
    );

    let mut m = 0.0;
    assert_eq!(
        unsafe { pcs_mad([1.0, 2.0, 3.0, 4.0, 100.0].as_ptr(), 5, &mut m) },
        PcsStatus::Ok
    );
    assert_eq!(m, 1.0);
    assert_eq!(unsafe { pcs_mad(ptr::null(), 0, &mut m) }, PcsStatus::Domain);

    let mut w = 0.0;
    assert_eq!(unsafe { pcs_win_rate(3, 4, &mut w) }, PcsStatus::Ok);
    assert_eq!(w, 0.75);
    assert_eq!(unsafe { pcs_win_rate(0, 0, &mut w) }, PcsStatus::InvalidArgument);
}

#[test]
fn status_names_and_version() {
    let name = unsafe { CStr::from_ptr(pcs_status_name(PcsStatus::BufferTooSmall)) };
    assert_eq!(name.to_str().unwrap(), "buffer too small");
    let v = unsafe { CStr::from_ptr(pcs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = manifest_dir().join("include/pcscale.h");
    assert!(header.exists(), "header missing at {}", header.display());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .expect("C compiler available");
        assert!(status.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let lib = target_dir().join("libpcscale_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest_dir().join("include"))
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
