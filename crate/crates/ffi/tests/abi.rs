use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mesorisk_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mrk_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn mp_bounds_match_closed_form() {
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(mrk_mp_bounds(200, 1000, &mut lo, &mut hi), MrkStatus::Ok);
    let r = (0.2f64).sqrt();
    assert!((lo - (1.0 - r).powi(2)).abs() < 1e-15);
    assert!((hi - (1.0 + r).powi(2)).abs() < 1e-15);
}

#[test]
fn null_outputs_are_reported() {
    let mut lo = 0.0;
    assert_eq!(
        mrk_mp_bounds(10, 100, &mut lo, ptr::null_mut()),
        MrkStatus::NullPointer
    );
    assert!(last_error().contains("lambda_plus"), "{}", last_error());
}

#[test]
fn invalid_arguments_map_to_status_codes() {
    let mut v = 0.0;
    assert_eq!(mrk_default_threshold(1.5, &mut v), MrkStatus::InvalidInput);
    assert!(!last_error().is_empty());
    assert_eq!(
        mrk_mp_bounds(0, 100, &mut v, &mut v),
        MrkStatus::InvalidInput
    );
}

#[test]
fn vi_of_identical_and_independent_labelings() {
    let a = [0usize, 0, 1, 1];
    let b = [0usize, 1, 0, 1];
    let mut v = -1.0;
    assert_eq!(
        mrk_variation_of_information(a.as_ptr(), a.as_ptr(), 4, &mut v),
        MrkStatus::Ok
    );
    assert_eq!(v, 0.0);
    assert_eq!(
        mrk_variation_of_information(a.as_ptr(), b.as_ptr(), 4, &mut v),
        MrkStatus::Ok
    );
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn vasicek_reference_value() {
    let mut v = 0.0;
    assert_eq!(mrk_vasicek_var(0.01, 0.3, 0.999, &mut v), MrkStatus::Ok);
    assert!((v - 0.224_379_491_385_079_5).abs() < 1e-12);
}

#[test]
fn detect_recovers_two_blocks() {
    // Two blocks of four series, each driven by its own factor.
    let (t, n) = (600usize, 8usize);
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut data = vec![0.0; t * n];
    for s in 0..t {
        let (f0, f1) = (next(), next());
        for j in 0..n {
            let f = if j < 4 { f0 } else { f1 };
            data[s * n + j] = f + 0.5 * next();
        }
    }
    let mut panel = ptr::null_mut();
    assert_eq!(
        mrk_panel_new(data.as_ptr(), t, n, &mut panel),
        MrkStatus::Ok
    );
    let mut labels = vec![99usize; n];
    let (mut k, mut meso) = (0usize, false);
    let status = mrk_detect(panel, 1, 5, labels.as_mut_ptr(), &mut k, &mut meso);
    assert_eq!(status, MrkStatus::Ok, "{}", last_error());
    mrk_panel_free(panel);
    assert!(meso);
    assert_eq!(k, 2);
    assert!(labels[..4].iter().all(|&l| l == labels[0]));
    assert!(labels[4..].iter().all(|&l| l == labels[4]));
    assert_ne!(labels[0], labels[4]);
}

#[test]
fn simulate_all_default_portfolio() {
    let mut model = ptr::null_mut();
    assert_eq!(mrk_model_homogeneous(4, 0.2, &mut model), MrkStatus::Ok);
    let mut n = 0usize;
    assert_eq!(mrk_model_n_issuers(model, &mut n), MrkStatus::Ok);
    assert_eq!(n, 4);
    let e = [0.25; 4];
    let lgd = [0.5; 4];
    let pd = [1.0; 4];
    let mut loss = ptr::null_mut();
    let s = mrk_simulate(
        model,
        ptr::null(),
        e.as_ptr(),
        lgd.as_ptr(),
        pd.as_ptr(),
        4,
        1000,
        3,
        &mut loss,
    );
    assert_eq!(s, MrkStatus::Ok, "{}", last_error());
    let mut v = 0.0;
    assert_eq!(mrk_loss_var(loss, 0.999, &mut v), MrkStatus::Ok);
    assert!((v - 0.5).abs() < 1e-15);
    assert_eq!(mrk_loss_mean(loss, &mut v), MrkStatus::Ok);
    assert!((v - 0.5).abs() < 1e-15);
    let mut buf = [0.0; 3];
    let mut paths = 0usize;
    assert_eq!(
        mrk_loss_values(loss, buf.as_mut_ptr(), 3, &mut paths),
        MrkStatus::Ok
    );
    assert_eq!(paths, 1000);
    assert!(buf.iter().all(|x| (x - 0.5).abs() < 1e-15));
    mrk_loss_free(loss);
    mrk_model_free(model);
}

#[test]
fn simulate_rejects_unbalanced_exposures() {
    let mut model = ptr::null_mut();
    assert_eq!(mrk_model_homogeneous(2, 0.2, &mut model), MrkStatus::Ok);
    let e = [0.7, 0.7];
    let one = [1.0, 1.0];
    let pd = [0.01, 0.01];
    let mut loss = ptr::null_mut();
    let s = mrk_simulate(
        model,
        ptr::null(),
        e.as_ptr(),
        one.as_ptr(),
        pd.as_ptr(),
        2,
        10,
        3,
        &mut loss,
    );
    assert_ne!(s, MrkStatus::Ok);
    assert!(loss.is_null());
    let idx = [5usize, 0];
    let s = mrk_simulate(
        model,
        idx.as_ptr(),
        one.as_ptr(),
        one.as_ptr(),
        pd.as_ptr(),
        2,
        10,
        3,
        &mut loss,
    );
    assert_eq!(s, MrkStatus::InvalidInput);
    assert!(last_error().contains("out of range"));
    mrk_model_free(model);
}

#[test]
fn model_loads_from_calibration_json() {
    let source = mesorisk::factor_model::CalibratedModel::homogeneous(
        vec!["X".into(), "Y".into(), "Z".into()],
        0.4,
    )
    .unwrap();
    let json = mesorisk::factor_model::CalibrationDocument::from_model(&source)
        .to_json()
        .unwrap();
    let json = CString::new(json).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        mrk_model_from_json(json.as_ptr(), &mut model),
        MrkStatus::Ok,
        "{}",
        last_error()
    );
    let mut n = 0usize;
    assert_eq!(mrk_model_n_issuers(model, &mut n), MrkStatus::Ok);
    assert_eq!(n, 3);
    mrk_model_free(model);
}

#[test]
fn model_json_errors_are_reported() {
    let bad = CString::new("{\"schema_version\": 99}").unwrap();
    let mut model = ptr::null_mut();
    assert_ne!(mrk_model_from_json(bad.as_ptr(), &mut model), MrkStatus::Ok);
    assert!(model.is_null());
    assert_eq!(
        mrk_model_from_json(ptr::null(), &mut model),
        MrkStatus::NullPointer
    );
}

#[test]
fn freeing_null_is_a_no_op() {
    mrk_panel_free(ptr::null_mut());
    mrk_model_free(ptr::null_mut());
    mrk_loss_free(ptr::null_mut());
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn header_is_valid_c() {
    if !have_cc() {
        eprintln!("no C compiler; skipping header check");
        return;
    }
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let out = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_dir())
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("no C compiler; skipping link check");
        return;
    }
    // tests run from target/<profile>/deps; the static library sits one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libmesorisk_ffi.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let dir = tempfile_dir();
    let bin = dir.join("smoke");
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let out = Command::new("cc")
        .args(["-std=c11", "-O1", "-I"])
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi-smoke");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
