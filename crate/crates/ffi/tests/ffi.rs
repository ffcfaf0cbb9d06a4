use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use epoch_active::cli::commands::{cmd_run, trial_seed};
use epoch_active::cli::config::ExperimentConfig;
use epoch_active_ffi::*;

const EXAMPLE1: &str = r#"{"instance": {"kind": "example1", "d": 2}, "sweep": [15], "mc_eval": 2000}"#;

fn last_error() -> String {
    let p = ea_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(json: &str) -> *mut EaConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ea_config_from_json(text.as_ptr(), &mut cfg) }, EaStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

fn predictions(model: *const EaModel) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..16 {
        let a = i as f64 * std::f64::consts::PI / 8.0;
        let x = [0.9 * a.cos(), 0.9 * a.sin()];
        let mut label = usize::MAX;
        assert_eq!(unsafe { ea_model_predict(model, x.as_ptr(), 2, &mut label) }, EaStatus::Ok);
        assert!(label < 2);
        out.push(label);
    }
    out
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ea_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_predict_and_inspect() {
    let cfg = config(EXAMPLE1);
    unsafe {
        let mut d = 0;
        assert_eq!(ea_config_input_dim(cfg, &mut d), EaStatus::Ok);
        assert_eq!(d, 2);

        let mut model = ptr::null_mut();
        assert_eq!(ea_run(cfg, 31, 5, &mut model), EaStatus::Ok);
        let (mut epochs, mut queries) = (0, 0);
        assert_eq!(ea_model_stats(model, &mut epochs, &mut queries), EaStatus::Ok);
        assert!(epochs >= 1);
        assert!(queries >= 1 && queries <= 31);

        let mut len = 0;
        assert_eq!(ea_model_params(model, ptr::null_mut(), 0, &mut len), EaStatus::Ok);
        assert_eq!(len, 2);
        let mut small = [0.0; 1];
        assert_eq!(ea_model_params(model, small.as_mut_ptr(), 1, &mut len), EaStatus::InvalidArgument);
        let mut buf = [f64::NAN; 2];
        assert_eq!(ea_model_params(model, buf.as_mut_ptr(), 2, &mut len), EaStatus::Ok);
        assert!(buf.iter().all(|w| w.is_finite()));
        assert!(buf.iter().map(|w| w * w).sum::<f64>() <= 1.0 + 1e-9);

        let first = predictions(model);
        let mut again = ptr::null_mut();
        assert_eq!(ea_run(cfg, 31, 5, &mut again), EaStatus::Ok);
        assert_eq!(predictions(again), first);

        let (mut value, mut se) = (f64::NAN, f64::NAN);
        assert_eq!(ea_model_excess_risk(model, cfg, 2000, 3, &mut value, &mut se), EaStatus::Ok);
        assert!(value.is_finite() && se >= 0.0);
        assert!(value >= -3.0 * se - 1e-12);

        let bad = [0.5, 0.5, 0.5];
        let mut label = 0;
        assert_ne!(ea_model_predict(model, bad.as_ptr(), 3, &mut label), EaStatus::Ok);
        assert!(!last_error().is_empty());

        ea_model_free(again);
        ea_model_free(model);
        ea_config_free(cfg);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ea_config_from_json(ptr::null(), &mut cfg), EaStatus::NullPointer);
        assert!(last_error().contains("json"));
        let text = CString::new(EXAMPLE1).unwrap();
        assert_eq!(ea_config_from_json(text.as_ptr(), ptr::null_mut()), EaStatus::NullPointer);
        let mut model = ptr::null_mut();
        assert_eq!(ea_run(ptr::null(), 15, 0, &mut model), EaStatus::NullPointer);
        let mut label = 0;
        assert_eq!(ea_model_predict(ptr::null(), [0.0, 0.0].as_ptr(), 2, &mut label), EaStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(ea_surrogate_loss(ptr::null(), [0.0].as_ptr(), 1, 0, &mut out), EaStatus::NullPointer);
        ea_config_free(ptr::null_mut());
        ea_model_free(ptr::null_mut());
        ea_surrogate_free(ptr::null_mut());
    }
}

#[test]
fn bad_configuration_is_an_invalid_argument() {
    let mut cfg = ptr::null_mut();
    let broken = CString::new(r#"{"instance": "#).unwrap();
    assert_eq!(unsafe { ea_config_from_json(broken.as_ptr(), &mut cfg) }, EaStatus::InvalidArgument);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());

    let bad_delta = CString::new(r#"{"instance": {"kind": "example1", "d": 2}, "learner": {"delta": 1.5}}"#).unwrap();
    assert_eq!(unsafe { ea_config_from_json(bad_delta.as_ptr(), &mut cfg) }, EaStatus::InvalidArgument);
    assert!(last_error().contains("delta"));

    let missing = CString::new("/nonexistent/epoch-active.json").unwrap();
    assert_ne!(unsafe { ea_config_load(missing.as_ptr(), &mut cfg) }, EaStatus::Ok);
}

#[test]
fn success_clears_the_last_error() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ea_config_from_json(ptr::null(), &mut cfg) }, EaStatus::NullPointer);
    assert!(!ea_last_error_message().is_null());
    let cfg = config(EXAMPLE1);
    assert!(ea_last_error_message().is_null());
    unsafe { ea_config_free(cfg) };
}

#[test]
fn surrogate_values() {
    unsafe {
        let mut sq = ptr::null_mut();
        assert_eq!(ea_surrogate_squared(&mut sq), EaStatus::Ok);
        let v = [0.75, 0.25];
        let mut loss = 0.0;
        assert_eq!(ea_surrogate_loss(sq, v.as_ptr(), 2, 0, &mut loss), EaStatus::Ok);
        assert!((loss + 0.4375).abs() < 1e-12, "{loss}");
        assert_eq!(ea_surrogate_loss(sq, v.as_ptr(), 2, 1, &mut loss), EaStatus::Ok);
        assert!((loss - 0.0625).abs() < 1e-12, "{loss}");
        let mut probs = [0.0; 2];
        assert_eq!(ea_surrogate_link(sq, v.as_ptr(), 2, probs.as_mut_ptr()), EaStatus::Ok);
        assert!((probs[0] - 0.75).abs() < 1e-12 && (probs[1] - 0.25).abs() < 1e-12);
        assert_ne!(ea_surrogate_loss(sq, v.as_ptr(), 2, 2, &mut loss), EaStatus::Ok);
        ea_surrogate_free(sq);

        let mut lg = ptr::null_mut();
        assert_eq!(ea_surrogate_logistic(1.0, 1.0, &mut lg), EaStatus::Ok);
        let zero = [0.0, 0.0, 0.0];
        assert_eq!(ea_surrogate_loss(lg, zero.as_ptr(), 3, 0, &mut loss), EaStatus::Ok);
        assert!((loss - 3f64.ln()).abs() < 1e-12, "{loss}");
        let mut p3 = [0.0; 3];
        assert_eq!(ea_surrogate_link(lg, zero.as_ptr(), 3, p3.as_mut_ptr()), EaStatus::Ok);
        assert!(p3.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        ea_surrogate_free(lg);

        let mut bad = ptr::null_mut();
        assert_ne!(ea_surrogate_logistic(-1.0, 1.0, &mut bad), EaStatus::Ok);
    }
}

#[test]
fn loaded_artifact_matches_a_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let exp = ExperimentConfig::from_json(EXAMPLE1).unwrap();
    let base = exp.learner.seed;
    assert_eq!(cmd_run(&exp, dir.path(), base, Some(1)).unwrap(), 0);
    let path = CString::new(dir.path().join("runs/t0_n15.artifact").to_str().unwrap()).unwrap();

    let cfg = config(EXAMPLE1);
    unsafe {
        let mut loaded = ptr::null_mut();
        assert_eq!(ea_model_load(path.as_ptr(), &mut loaded), EaStatus::Ok);
        let mut direct = ptr::null_mut();
        assert_eq!(ea_run(cfg, 15, trial_seed(base, 0), &mut direct), EaStatus::Ok);
        assert_eq!(predictions(loaded), predictions(direct));
        let (mut e1, mut q1, mut e2, mut q2) = (0, 0, 0, 0);
        ea_model_stats(loaded, &mut e1, &mut q1);
        ea_model_stats(direct, &mut e2, &mut q2);
        assert_eq!((e1, q1), (e2, q2));
        ea_model_free(loaded);
        ea_model_free(direct);

        let bogus = dir.path().join("bogus.artifact");
        std::fs::write(&bogus, b"not an artifact").unwrap();
        let bogus = CString::new(bogus.to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(ea_model_load(bogus.as_ptr(), &mut m), EaStatus::Parse);
        ea_config_free(cfg);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/epoch_active.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["EA_STATUS_OK", "EaConfig", "EaModel", "EaSurrogate", "ea_run", "ea_model_predict", "ea_surrogate_loss"] {
        assert!(text.contains(name), "{name}");
    }
    let Ok(o) = Command::new("cc").args(["-std=c99", "-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
