//! C ABI for `hqc-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! `*_from_json` call and released with the matching `*_free`. Every
//! fallible function returns an integer status (`HQC_OK` on success); the
//! message of the most recent failure on the calling thread is available
//! through [`hqc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hqc_core::bounds::transfer_time_window;
use hqc_core::holonomy::{path_ordered_holonomy, surface_integral_angle, synthesize_loop, GateKind};
use hqc_core::report::run_scenario;
use hqc_core::scenario::Scenario;
use hqc_core::schemes::{run_transfer, Scheme, SchemeParams};
use hqc_core::Error;
use serde_json::Value;

pub const HQC_OK: i32 = 0;
pub const HQC_ERR_NULL_POINTER: i32 = 1;
pub const HQC_ERR_INVALID_ARGUMENT: i32 = 2;
pub const HQC_ERR_SCENARIO: i32 = 3;
pub const HQC_ERR_NUMERICAL: i32 = 4;
pub const HQC_ERR_ENCODING: i32 = 5;
pub const HQC_ERR_BUFFER_TOO_SMALL: i32 = 6;
pub const HQC_ERR_PANIC: i32 = 7;

pub const HQC_SCHEME_OPTICAL: i32 = 0;
pub const HQC_SCHEME_MOTIONAL: i32 = 1;
pub const HQC_SCHEME_MOTIONAL_FULL: i32 = 2;
pub const HQC_SCHEME_MODIFIED_OPTICAL: i32 = 3;

pub const HQC_GATE_RY: i32 = 0;
pub const HQC_GATE_RZ: i32 = 1;
pub const HQC_GATE_PHASE4: i32 = 2;

/// Physical parameters of a transfer.
pub struct HqcParams(SchemeParams);

/// A parsed scenario file.
pub struct HqcScenario {
    scenario: Scenario,
    text: String,
}

/// The holonomy of a synthesized gate loop.
pub struct HqcHolonomy {
    re: Vec<f64>,
    im: Vec<f64>,
    dim: usize,
    stokes_angle: f64,
    discrepancy: f64,
    discretization_error_estimate: f64,
}

/// Figures of merit of one transfer.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HqcTransferResult {
    pub fidelity: f64,
    pub max_p1ph: f64,
    pub int_p1ph: f64,
    pub max_pe: f64,
    pub int_pe: f64,
    pub norm_loss: f64,
}

/// Admissible transfer times `t_min < T < t_max`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HqcTimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub kappa_gamma_limit: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::Dimension(_)
        | Error::InvalidParameter(_)
        | Error::DegenerateCouplings
        | Error::OpenLoop(_)
        | Error::BasePoint
        | Error::ChartViolation(_)
        | Error::CapacityExceeded { .. } => HQC_ERR_INVALID_ARGUMENT,
        Error::GaugeDiscontinuity { .. }
        | Error::NotUnitary(_)
        | Error::StepUnderflow { .. }
        | Error::Quadrature(_)
        | Error::Invariant(_) => HQC_ERR_NUMERICAL,
        Error::Encoding(_) => HQC_ERR_ENCODING,
        Error::Scenario(_) | Error::Io(_) | Error::Json(_) => HQC_ERR_SCENARIO,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HQC_ERR_NULL_POINTER, format!("{what} is null"))
}

fn invalid(msg: String) -> Fail {
    Fail(HQC_ERR_INVALID_ARGUMENT, msg)
}

/// Runs `f`, recording failures and panics as a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HQC_OK,
        Ok(Err(Fail(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            HQC_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn scheme_of(code: i32) -> Result<Scheme, Fail> {
    match code {
        HQC_SCHEME_OPTICAL => Ok(Scheme::Optical),
        HQC_SCHEME_MOTIONAL => Ok(Scheme::Motional),
        HQC_SCHEME_MOTIONAL_FULL => Ok(Scheme::MotionalFull),
        HQC_SCHEME_MODIFIED_OPTICAL => Ok(Scheme::ModifiedOptical),
        other => Err(invalid(format!("unknown scheme code {other}"))),
    }
}

fn gate_of(code: i32) -> Result<GateKind, Fail> {
    match code {
        HQC_GATE_RY => Ok(GateKind::Ry),
        HQC_GATE_RZ => Ok(GateKind::Rz),
        HQC_GATE_PHASE4 => Ok(GateKind::Phase4),
        other => Err(invalid(format!("unknown gate code {other}"))),
    }
}

/// Copies the last error message on this thread into `buf` (NUL terminated,
/// truncated to `cap` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hqc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hqc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default parameters.
#[no_mangle]
pub extern "C" fn hqc_params_new() -> *mut HqcParams {
    Box::into_raw(Box::new(HqcParams(SchemeParams::default())))
}

/// Parameters from a JSON object; missing fields take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_params_from_json(json: *const c_char, out: *mut *mut HqcParams) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p: SchemeParams = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        p.validate()?;
        *out = Box::into_raw(Box::new(HqcParams(p)));
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hqc_params_free(params: *mut HqcParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

fn params_json(p: &SchemeParams) -> Result<serde_json::Map<String, Value>, Fail> {
    match serde_json::to_value(p).map_err(Error::from)? {
        Value::Object(m) => Ok(m),
        _ => Err(Fail(HQC_ERR_PANIC, "parameters did not serialize to an object".into())),
    }
}

/// Sets one field by name. Flags take `0` or `1`; cutoffs take
/// non-negative integers.
///
/// # Safety
/// `params` must be a valid handle and `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hqc_params_set(params: *mut HqcParams, key: *const c_char, value: f64) -> i32 {
    guard(|| {
        let params = out_arg(params, "params")?;
        let key = str_arg(key, "key")?;
        let mut m = params_json(&params.0)?;
        let slot = m.get_mut(key).ok_or_else(|| invalid(format!("unknown parameter {key}")))?;
        *slot = match slot {
            Value::Bool(_) if value == 0.0 || value == 1.0 => Value::Bool(value == 1.0),
            Value::Number(n) if n.is_u64() => {
                if !(value >= 0.0 && value.fract() == 0.0 && value < u32::MAX as f64) {
                    return Err(invalid(format!("{key} needs a non-negative integer, got {value}")));
                }
                Value::from(value as u64)
            }
            Value::Number(_) if value.is_finite() => Value::from(value),
            _ => return Err(invalid(format!("{key} cannot take {value}"))),
        };
        let p: SchemeParams = serde_json::from_value(Value::Object(m)).map_err(Error::from)?;
        params.0 = p;
        Ok(())
    })
}

/// Reads one field by name; flags read as `0` or `1`.
///
/// # Safety
/// `params` must be a valid handle, `key` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_params_get(params: *const HqcParams, key: *const c_char, out: *mut f64) -> i32 {
    guard(|| {
        let params = handle(params, "params")?;
        let key = str_arg(key, "key")?;
        let out = out_arg(out, "out")?;
        let m = params_json(&params.0)?;
        *out = match m.get(key) {
            Some(Value::Bool(b)) => f64::from(u8::from(*b)),
            Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            _ => return Err(invalid(format!("unknown parameter {key}"))),
        };
        Ok(())
    })
}

/// Transfers the logical word `(alpha, beta)` from atom 1 to atom 2.
///
/// # Safety
/// `params` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_transfer(
    params: *const HqcParams,
    scheme: i32,
    alpha: u8,
    beta: u8,
    out: *mut HqcTransferResult,
) -> i32 {
    guard(|| {
        let params = handle(params, "params")?;
        let out = out_arg(out, "out")?;
        let scheme = scheme_of(scheme)?;
        params.0.validate()?;
        let r = run_transfer(scheme, &params.0, (alpha, beta))?;
        *out = HqcTransferResult {
            fidelity: r.fidelity,
            max_p1ph: r.max_p1ph,
            int_p1ph: r.int_p1ph,
            max_pe: r.max_pe,
            int_pe: r.int_pe,
            norm_loss: r.norm_loss,
        };
        Ok(())
    })
}

/// Transfer-time window at safety factor `alpha`.
///
/// # Safety
/// `params` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_time_window(
    params: *const HqcParams,
    scheme: i32,
    alpha: f64,
    out: *mut HqcTimeWindow,
) -> i32 {
    guard(|| {
        let params = handle(params, "params")?;
        let out = out_arg(out, "out")?;
        let w = transfer_time_window(scheme_of(scheme)?, &params.0, alpha)?;
        *out = HqcTimeWindow { t_min: w.t_min, t_max: w.t_max, kappa_gamma_limit: w.kappa_gamma_limit };
        Ok(())
    })
}

/// Synthesizes the loop for `angle` and evaluates its holonomy with
/// `n_steps` midpoint factors.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_gate_new(kind: i32, angle: f64, n_steps: usize, out: *mut *mut HqcHolonomy) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind = gate_of(kind)?;
        let path = synthesize_loop(kind, angle, n_steps)?;
        let hol = path_ordered_holonomy(&path)?;
        let stokes_angle = kind.orientation() * surface_integral_angle(&path, kind)?;
        let target = kind.target(stokes_angle);
        let u = &hol.unitary;
        let discrepancy = u.iter().zip(target.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        // row-major copies
        let dim = u.nrows();
        let entries = |f: fn(&hqc_core::C64) -> f64| (0..dim * dim).map(|k| f(&u[(k / dim, k % dim)])).collect();
        *out = Box::into_raw(Box::new(HqcHolonomy {
            re: entries(|z| z.re),
            im: entries(|z| z.im),
            dim,
            stokes_angle,
            discrepancy,
            discretization_error_estimate: hol.discretization_error_estimate,
        }));
        Ok(())
    })
}

/// # Safety
/// `hol` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hqc_holonomy_free(hol: *mut HqcHolonomy) {
    if !hol.is_null() {
        drop(Box::from_raw(hol));
    }
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `hol` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hqc_holonomy_dim(hol: *const HqcHolonomy) -> usize {
    hol.as_ref().map_or(0, |h| h.dim)
}

/// Copies the `dim × dim` unitary, row-major, into `re` and `im`.
///
/// # Safety
/// `hol` must be a valid handle; `re` and `im` must point to `cap`
/// writable doubles each.
#[no_mangle]
pub unsafe extern "C" fn hqc_holonomy_entries(hol: *const HqcHolonomy, re: *mut f64, im: *mut f64, cap: usize) -> i32 {
    guard(|| {
        let h = handle(hol, "hol")?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        if cap < h.re.len() {
            return Err(Fail(HQC_ERR_BUFFER_TOO_SMALL, format!("need {} entries, got {cap}", h.re.len())));
        }
        std::ptr::copy_nonoverlapping(h.re.as_ptr(), re, h.re.len());
        std::ptr::copy_nonoverlapping(h.im.as_ptr(), im, h.im.len());
        Ok(())
    })
}

/// Stokes angle, max-entry discrepancy to the target gate and the
/// discretization error estimate. Any output pointer may be null.
///
/// # Safety
/// `hol` must be a valid handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hqc_holonomy_diagnostics(
    hol: *const HqcHolonomy,
    stokes_angle: *mut f64,
    discrepancy: *mut f64,
    error_estimate: *mut f64,
) -> i32 {
    guard(|| {
        let h = handle(hol, "hol")?;
        for (p, v) in [(stokes_angle, h.stokes_angle), (discrepancy, h.discrepancy), (error_estimate, h.discretization_error_estimate)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Parses and validates a scenario. Relative loop files resolve against
/// the working directory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hqc_scenario_from_json(json: *const c_char, out: *mut *mut HqcScenario) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(json, "json")?.to_owned();
        let scenario = Scenario::from_json(&text)?;
        scenario.validate()?;
        *out = Box::into_raw(Box::new(HqcScenario { scenario, text }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hqc_scenario_free(scenario: *mut HqcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario and returns its CSV (the same bytes the `hqc` CLI
/// writes) in `*csv`, to be released with [`hqc_string_free`]. `*ok` is set
/// to 0 when a gate discrepancy or self-check fails.
///
/// # Safety
/// `scenario` must be a valid handle; `csv` and `ok` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hqc_scenario_run(
    scenario: *const HqcScenario,
    workers: usize,
    csv: *mut *mut c_char,
    ok: *mut i32,
) -> i32 {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let csv = out_arg(csv, "csv")?;
        let ok = out_arg(ok, "ok")?;
        let r = run_scenario(&s.scenario, &s.text, workers)?;
        *csv = CString::new(r.csv).map_err(|e| Fail(HQC_ERR_SCENARIO, e.to_string()))?.into_raw();
        *ok = i32::from(r.ok);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let rc = guard(|| panic!("boom"));
        assert_eq!(rc, HQC_ERR_PANIC);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { hqc_last_error(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(n, msg.len());
    }

    #[test]
    fn last_error_truncates_to_the_buffer() {
        set_last_error("abcdef");
        let mut buf = [1 as c_char; 4];
        assert_eq!(unsafe { hqc_last_error(buf.as_mut_ptr(), buf.len()) }, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "abc");
    }

    #[test]
    fn error_classes() {
        assert_eq!(status_of(&Error::InvalidParameter(String::new())), HQC_ERR_INVALID_ARGUMENT);
        assert_eq!(status_of(&Error::Quadrature(String::new())), HQC_ERR_NUMERICAL);
        assert_eq!(status_of(&Error::Encoding(String::new())), HQC_ERR_ENCODING);
        assert_eq!(status_of(&Error::Scenario(String::new())), HQC_ERR_SCENARIO);
    }

    #[test]
    fn codes_map_to_every_variant() {
        let schemes: Vec<Scheme> = (0..4).map(|c| scheme_of(c).ok().unwrap()).collect();
        assert_eq!(schemes, [Scheme::Optical, Scheme::Motional, Scheme::MotionalFull, Scheme::ModifiedOptical]);
        assert!(scheme_of(4).is_err() && gate_of(-1).is_err());
        assert_eq!(gate_of(HQC_GATE_PHASE4).ok(), Some(GateKind::Phase4));
        assert!(!hqc_version().is_null());
    }
}
