//! C ABI over `mesorisk`.
//!
//! Every fallible function returns an [`MrkStatus`]. On failure,
//! [`mrk_last_error`] describes the cause until the next failing call on the
//! same thread. Handles are opaque; each `*_new`/`*_from_*` result must be
//! released with the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mesorisk::community::{detect, DetectConfig, StructureStatus};
use mesorisk::factor_model::{CalibratedModel, CalibrationDocument};
use mesorisk::partition_analysis::variation_of_information;
use mesorisk::risk_engine::{
    default_threshold, simulate, var, vasicek_var, IssuerClass, LossDistribution, Portfolio,
    PortfolioKind, Position, PositionPd,
};
use mesorisk::spectra::mp_bounds;
use mesorisk::timeseries::{standardize, ReturnPanel};
use mesorisk::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments out of range or inconsistent with each other.
    InvalidInput = 2,
    Config = 3,
    /// Malformed or degenerate data.
    Data = 4,
    Numerical = 5,
    /// A bug: an internal panic was caught.
    Internal = 6,
}

/// Standardized return panel.
pub struct MrkPanel(ReturnPanel);

/// Calibrated factor model.
pub struct MrkModel(CalibratedModel);

/// Sorted simulated portfolio losses.
pub struct MrkLoss(LossDistribution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MrkStatus {
    match e {
        Error::Config(_) => MrkStatus::Config,
        Error::Numerical(_) => MrkStatus::Numerical,
        Error::InvalidInput(_)
        | Error::UnknownRating(_)
        | Error::UnresolvedIssuer(_)
        | Error::IssuerMismatch(_) => MrkStatus::InvalidInput,
        _ => MrkStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MrkStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return MrkStatus::Ok,
        Ok(Err(Failure::Null(arg))) => (MrkStatus::NullPointer, format!("null pointer: {arg}")),
        Ok(Err(Failure::Invalid(m))) => (MrkStatus::InvalidInput, m),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Err(p) => {
            let what = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (MrkStatus::Internal, format!("internal error: {what}"))
        }
    };
    set_last_error(message);
    status
}

fn out_ptr<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles come from this library and are live until freed.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` was produced by `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message for the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mrk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Noise-band edges for an `n_series × n_series` correlation matrix of
/// `n_obs` observations.
#[no_mangle]
pub extern "C" fn mrk_mp_bounds(
    n_series: usize,
    n_obs: usize,
    lambda_minus: *mut f64,
    lambda_plus: *mut f64,
) -> MrkStatus {
    guard(|| {
        let lo = out_ptr(lambda_minus, "lambda_minus")?;
        let hi = out_ptr(lambda_plus, "lambda_plus")?;
        let b = mp_bounds(n_series, n_obs)?;
        *lo = b.lambda_minus;
        *hi = b.lambda_plus;
        Ok(())
    })
}

/// Normalised variation of information between two labelings of `n` nodes.
#[no_mangle]
pub extern "C" fn mrk_variation_of_information(
    a: *const usize,
    b: *const usize,
    n: usize,
    out: *mut f64,
) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = variation_of_information(slice(a, n, "a")?, slice(b, n, "b")?)?;
        Ok(())
    })
}

/// Standard-normal default threshold for a one-period default probability.
#[no_mangle]
pub extern "C" fn mrk_default_threshold(pd: f64, out: *mut f64) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = default_threshold(pd)?;
        Ok(())
    })
}

/// Large-homogeneous-portfolio loss quantile.
#[no_mangle]
pub extern "C" fn mrk_vasicek_var(pd: f64, beta: f64, alpha: f64, out: *mut f64) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = vasicek_var(pd, beta, alpha)?;
        Ok(())
    })
}

/// Copies a row-major `n_obs × n_series` return matrix and standardizes each
/// column. Series are named `S0`, `S1`, ...
#[no_mangle]
pub extern "C" fn mrk_panel_new(
    returns: *const f64,
    n_obs: usize,
    n_series: usize,
    out: *mut *mut MrkPanel,
) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = n_obs
            .checked_mul(n_series)
            .ok_or_else(|| Failure::Invalid("panel dimensions overflow".into()))?;
        let data = slice(returns, len, "returns")?;
        let m = DMatrix::from_row_slice(n_obs, n_series, data);
        let ids = (0..n_series).map(|j| format!("S{j}")).collect();
        let panel = standardize(&ReturnPanel::from_matrix(ids, m)?)?;
        *out = Box::into_raw(Box::new(MrkPanel(panel)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn mrk_panel_free(panel: *mut MrkPanel) {
    free(panel);
}

/// Community detection on the filtered correlation matrix. Writes one label
/// per series into `labels` (length `n_series`); `mesoscopic` is false when
/// the filtered matrix carries no group structure.
#[no_mangle]
pub extern "C" fn mrk_detect(
    panel: *const MrkPanel,
    seed: u64,
    restarts: usize,
    labels: *mut usize,
    n_communities: *mut usize,
    mesoscopic: *mut bool,
) -> MrkStatus {
    guard(|| {
        let panel = &handle(panel, "panel")?.0;
        let k = out_ptr(n_communities, "n_communities")?;
        let meso = out_ptr(mesoscopic, "mesoscopic")?;
        let n = panel.n_series();
        if labels.is_null() {
            return Err(Failure::Null("labels"));
        }
        let cfg = DetectConfig {
            restarts,
            ..DetectConfig::default()
        };
        let d = detect(panel, seed, &cfg)?;
        // SAFETY: checked non-null; the caller provides `n_series` slots.
        let labels = unsafe { std::slice::from_raw_parts_mut(labels, n) };
        labels.copy_from_slice(d.partition.labels());
        *k = d.partition.n_communities();
        *meso = d.status == StructureStatus::Mesoscopic;
        Ok(())
    })
}

/// One-factor model in which every issuer has systematic share `beta`.
/// Issuers are named `I0`, `I1`, ...
#[no_mangle]
pub extern "C" fn mrk_model_homogeneous(
    n_issuers: usize,
    beta: f64,
    out: *mut *mut MrkModel,
) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ids = (0..n_issuers).map(|i| format!("I{i}")).collect();
        *out = Box::into_raw(Box::new(MrkModel(CalibratedModel::homogeneous(ids, beta)?)));
        Ok(())
    })
}

/// Loads a calibration document written by `mesorisk calibrate`.
#[no_mangle]
pub extern "C" fn mrk_model_from_json(json: *const c_char, out: *mut *mut MrkModel) -> MrkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        // SAFETY: checked non-null; the caller passes a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| Failure::Invalid("calibration document is not UTF-8".into()))?;
        let model = CalibrationDocument::from_json(text)?.to_model()?;
        *out = Box::into_raw(Box::new(MrkModel(model)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn mrk_model_n_issuers(model: *const MrkModel, out: *mut usize) -> MrkStatus {
    guard(|| {
        let n = handle(model, "model")?.0.n_issuers();
        *out_ptr(out, "out")? = n;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn mrk_model_free(model: *mut MrkModel) {
    free(model);
}

/// Simulates portfolio losses over `n_paths` paths. Position `i` refers to
/// model issuer `issuers[i]`, or to issuer `i` when `issuers` is null.
/// `pds` are one-period default probabilities used as given. Exposures must
/// sum to 1 (long-only) or 0 (long-short).
#[no_mangle]
pub extern "C" fn mrk_simulate(
    model: *const MrkModel,
    issuers: *const usize,
    exposures: *const f64,
    lgds: *const f64,
    pds: *const f64,
    n_positions: usize,
    n_paths: usize,
    seed: u64,
    out: *mut *mut MrkLoss,
) -> MrkStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let out = out_ptr(out, "out")?;
        let exposures = slice(exposures, n_positions, "exposures")?;
        let lgds = slice(lgds, n_positions, "lgds")?;
        let pds = slice(pds, n_positions, "pds")?;
        let index: Vec<usize> = if issuers.is_null() {
            (0..n_positions).collect()
        } else {
            slice(issuers, n_positions, "issuers")?.to_vec()
        };
        let mut positions = Vec::with_capacity(n_positions);
        for (i, &k) in index.iter().enumerate() {
            let id = model
                .issuers
                .get(k)
                .ok_or_else(|| Failure::Invalid(format!("issuer index {k} out of range")))?;
            positions.push(Position {
                issuer_id: id.clone(),
                exposure: exposures[i],
                lgd: lgds[i],
                pd: PositionPd::Explicit(pds[i]),
                class: IssuerClass::Corporate,
            });
        }
        let kind = if exposures.iter().any(|e| *e < 0.0) {
            PortfolioKind::LongShort
        } else {
            PortfolioKind::LongOnly
        };
        let portfolio = Portfolio::new("ffi", kind, positions)?;
        let dist = simulate(&portfolio, model, n_paths, seed)?;
        *out = Box::into_raw(Box::new(MrkLoss(dist)));
        Ok(())
    })
}

/// Loss quantile at level `alpha`.
#[no_mangle]
pub extern "C" fn mrk_loss_var(loss: *const MrkLoss, alpha: f64, out: *mut f64) -> MrkStatus {
    guard(|| {
        let v = var(&handle(loss, "loss")?.0, alpha)?;
        *out_ptr(out, "out")? = v;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn mrk_loss_mean(loss: *const MrkLoss, out: *mut f64) -> MrkStatus {
    guard(|| {
        let m = handle(loss, "loss")?.0.mean();
        *out_ptr(out, "out")? = m;
        Ok(())
    })
}

/// Copies up to `capacity` sorted losses into `buffer` and reports the total
/// number of paths in `n_paths`.
#[no_mangle]
pub extern "C" fn mrk_loss_values(
    loss: *const MrkLoss,
    buffer: *mut f64,
    capacity: usize,
    n_paths: *mut usize,
) -> MrkStatus {
    guard(|| {
        let losses = &handle(loss, "loss")?.0.losses;
        *out_ptr(n_paths, "n_paths")? = losses.len();
        let n = capacity.min(losses.len());
        if n > 0 {
            if buffer.is_null() {
                return Err(Failure::Null("buffer"));
            }
            // SAFETY: checked non-null; the caller provides `capacity` slots.
            unsafe { std::slice::from_raw_parts_mut(buffer, n) }.copy_from_slice(&losses[..n]);
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn mrk_loss_free(loss: *mut MrkLoss) {
    free(loss);
}
