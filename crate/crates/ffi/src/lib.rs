//! C ABI for `epoch_active`.
//!
//! Every fallible function returns an [`EaStatus`]; results are written
//! through out-pointers. On failure a message is stored per thread and can be
//! read with [`ea_last_error_message`]. Handles are opaque and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use epoch_active::cli::artifact;
use epoch_active::cli::config::ExperimentConfig;
use epoch_active::distributions::InstanceSpec;
use epoch_active::error::Error;
use epoch_active::evaluation::excess_class_risk;
use epoch_active::learner::{self, predict, simulated_labels, StitchedClassifier};
use epoch_active::surrogate::{ScoreVector, SurrogateSpec};
use epoch_active::version_space::DisagreeConfig;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Domain = 5,
    Internal = 6,
}

/// Parsed experiment configuration.
pub struct EaConfig {
    inner: ExperimentConfig,
}

/// A trained stitched classifier.
pub struct EaModel {
    inner: StitchedClassifier,
    disagree: DisagreeConfig,
    queries: usize,
}

/// A surrogate loss.
pub struct EaSurrogate {
    inner: SurrogateSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EaStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } => EaStatus::InvalidArgument,
        Error::Domain(_) | Error::DegenerateRegion(_) | Error::InsufficientData(_) => EaStatus::Domain,
        Error::Io(_) => EaStatus::Io,
        Error::Artifact(_) => EaStatus::Parse,
        Error::Oracle(_) => EaStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (EaStatus, String)>) -> EaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EaStatus::Internal
        }
    }
}

fn lib<T>(r: epoch_active::error::Result<T>) -> Result<T, (EaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EaStatus, String) {
    (EaStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (EaStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (EaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn read_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (EaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), (EaStatus, String)> {
    if p.is_null() {
        Err(null(what))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ea_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON experiment configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_config_from_json(json: *const c_char, out: *mut *mut EaConfig) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = read_str(json, "json")?;
        let inner = lib(ExperimentConfig::from_json(text))?;
        *out = Box::into_raw(Box::new(EaConfig { inner }));
        Ok(())
    })
}

/// Reads and parses a JSON configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_config_load(path: *const c_char, out: *mut *mut EaConfig) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let p = read_str(path, "path")?;
        let inner = lib(ExperimentConfig::load(Path::new(p)))?;
        *out = Box::into_raw(Box::new(EaConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from `ea_config_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ea_config_free(cfg: *mut EaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Input dimension of the configured instance.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_config_input_dim(cfg: *const EaConfig, out: *mut usize) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        *out = cfg.inner.instance.d;
        Ok(())
    })
}

/// Runs the active learner with budget `n` against simulated labels from
/// the configured instance and returns the stitched classifier.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_run(cfg: *const EaConfig, n: usize, seed: u64, out: *mut *mut EaModel) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let lcfg = cfg.learner_config(n, seed);
        let mut labels = simulated_labels(&cfg.instance, learner::run_seed(&cfg.instance, &lcfg));
        let (sc, trace) = learner::run(&cfg.instance, &cfg.class, &cfg.surrogate, &lcfg, &mut labels)
            .map_err(|f| (status_of(&f.error), f.error.to_string()))?;
        *out = Box::into_raw(Box::new(EaModel {
            inner: sc,
            disagree: lcfg.disagree_cfg,
            queries: trace.total_queries,
        }));
        Ok(())
    })
}

/// Loads a classifier from a run artifact.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_model_load(path: *const c_char, out: *mut *mut EaModel) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let p = read_str(path, "path")?;
        let (header, sc) = lib(artifact::read(Path::new(p)))?;
        let disagree = header
            .config
            .get("learner")
            .and_then(|l| l.get("disagree_cfg"))
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .unwrap_or_default();
        *out = Box::into_raw(Box::new(EaModel {
            inner: sc,
            disagree,
            queries: header.trace.total_queries,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `ea_run`/`ea_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ea_model_free(model: *mut EaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted label (0-based) at `x` of length `d`.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `d` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_model_predict(
    model: *const EaModel,
    x: *const f64,
    d: usize,
    out: *mut usize,
) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = read_slice(x, d, "x")?;
        lib(m.inner.cls.validate_input(x))?;
        *out = predict(&m.inner, x, &m.disagree);
        Ok(())
    })
}

/// Number of epochs and labels queried during training.
///
/// # Safety
/// `model` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_model_stats(model: *const EaModel, epochs: *mut usize, queries: *mut usize) -> EaStatus {
    guard(|| {
        check_out(epochs, "epochs")?;
        check_out(queries, "queries")?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *epochs = m.inner.epochs.len();
        *queries = m.queries;
        Ok(())
    })
}

/// Final-epoch parameters. Writes the parameter count to `len`; when
/// `buf` is non-null and `cap >= *len` the values are copied into it.
///
/// # Safety
/// `model` must be a live handle, `len` writable and `buf` null or
/// writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ea_model_params(model: *const EaModel, buf: *mut f64, cap: usize, len: *mut usize) -> EaStatus {
    guard(|| {
        check_out(len, "len")?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let theta = &m.inner.final_params().theta;
        *len = theta.len();
        if !buf.is_null() {
            if cap < theta.len() {
                return Err((EaStatus::InvalidArgument, format!("buffer holds {cap}, need {}", theta.len())));
            }
            ptr::copy_nonoverlapping(theta.as_ptr(), buf, theta.len());
        }
        Ok(())
    })
}

/// Excess classification risk of the model on the configured instance.
///
/// # Safety
/// Handles must be live; `value` and `stderr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_model_excess_risk(
    model: *const EaModel,
    cfg: *const EaConfig,
    mc: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> EaStatus {
    guard(|| {
        check_out(value, "value")?;
        check_out(stderr, "stderr")?;
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let inst: &InstanceSpec = &cfg.instance;
        let h = |x: &[f64]| predict(&m.inner, x, &m.disagree);
        let e = lib(excess_class_risk(&h, inst, mc, seed))?;
        *value = e.value;
        *stderr = e.stderr;
        Ok(())
    })
}

/// Squared surrogate.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_surrogate_squared(out: *mut *mut EaSurrogate) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = Box::into_raw(Box::new(EaSurrogate {
            inner: SurrogateSpec::squared(),
        }));
        Ok(())
    })
}

/// Logistic surrogate with smoothness `beta_phi` and Lipschitz constant `l_phi`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_surrogate_logistic(beta_phi: f64, l_phi: f64, out: *mut *mut EaSurrogate) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let inner = lib(SurrogateSpec::logistic(beta_phi, l_phi))?;
        *out = Box::into_raw(Box::new(EaSurrogate { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from `ea_surrogate_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ea_surrogate_free(s: *mut EaSurrogate) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Surrogate loss of scores `v` (length `k`) at label `y`.
///
/// # Safety
/// `s` must be a live handle, `v` must point to `k` doubles and `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_surrogate_loss(
    s: *const EaSurrogate,
    v: *const f64,
    k: usize,
    y: usize,
    out: *mut f64,
) -> EaStatus {
    guard(|| {
        check_out(out, "out")?;
        let s = s.as_ref().ok_or_else(|| null("surrogate"))?;
        let v = lib(ScoreVector::new(read_slice(v, k, "v")?.to_vec()))?;
        *out = lib(s.inner.loss(&v, y))?;
        Ok(())
    })
}

/// Link `phi(v)` written into `probs` (length `k`).
///
/// # Safety
/// `s` must be a live handle; `v` and `probs` must each hold `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn ea_surrogate_link(s: *const EaSurrogate, v: *const f64, k: usize, probs: *mut f64) -> EaStatus {
    guard(|| {
        check_out(probs, "probs")?;
        let s = s.as_ref().ok_or_else(|| null("surrogate"))?;
        let v = lib(ScoreVector::new(read_slice(v, k, "v")?.to_vec()))?;
        let p = lib(s.inner.link(&v))?;
        ptr::copy_nonoverlapping(p.as_slice().as_ptr(), probs, k);
        Ok(())
    })
}
