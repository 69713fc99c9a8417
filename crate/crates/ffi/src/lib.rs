//! C interface to the qlqg toolkit.
//!
//! Every function returns a [`QlqgStatus`]. On failure the message is kept
//! per thread and can be read with [`qlqg_last_error`]. Matrices cross the
//! boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qlqg::linalg::RMat;
use qlqg::lqg::{lyap_solve, vacuum_bound};
use qlqg::report;
use qlqg::scenario::Scenario;
use qlqg::{fixtures, Error};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QlqgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed scenario text or unknown fixture.
    Parse = 3,
    /// Inconsistent shapes or out-of-domain arguments.
    InvalidArgument = 4,
    NotHurwitz = 5,
    /// Any other numerical failure.
    Numeric = 6,
    Panic = 7,
}

/// Opaque scenario handle.
pub struct QlqgScenario {
    inner: Scenario,
}

/// Closed-loop cost report. `j` is NaN when the loop is not Hurwitz.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QlqgEvaluation {
    pub j: f64,
    pub vacuum_bound: f64,
    pub spectral_abscissa: f64,
    pub lyapunov_residual: f64,
}

/// Realizability residuals. Controller entries are NaN without a controller.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QlqgCheck {
    pub plant_res1: f64,
    pub plant_res2: f64,
    pub controller_res1: f64,
    pub controller_res2: f64,
    pub pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> QlqgStatus {
    match e {
        Error::Json(_) | Error::Config(_) | Error::Io(_) => QlqgStatus::Parse,
        Error::Dimension { .. } | Error::Validation(_) | Error::Domain(_) => QlqgStatus::InvalidArgument,
        Error::NotHurwitz(_) => QlqgStatus::NotHurwitz,
        _ => QlqgStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (QlqgStatus, String)>) -> QlqgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QlqgStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            QlqgStatus::Panic
        }
    }
}

fn lib(e: Error) -> (QlqgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QlqgStatus, String) {
    (QlqgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QlqgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QlqgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn matrix_arg(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<RMat, (QlqgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let data = std::slice::from_raw_parts(p, rows * cols);
    Ok(RMat::from_row_slice(rows, cols, data))
}

unsafe fn scenario_arg<'a>(s: *const QlqgScenario) -> Result<&'a Scenario, (QlqgStatus, String)> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("scenario"))
}

fn hand_out(s: Scenario, out: *mut *mut QlqgScenario) {
    unsafe { *out = Box::into_raw(Box::new(QlqgScenario { inner: s })) };
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated).
/// Returns the message length without the terminator; when that is
/// `>= len` the message was truncated.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qlqg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qlqg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_from_json(json: *const c_char, out: *mut *mut QlqgScenario) -> QlqgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Scenario::from_json(str_arg(json, "json")?).map_err(lib)?;
        hand_out(s, out);
        Ok(())
    })
}

/// Load one of the shipped fixtures by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_from_fixture(name: *const c_char, out: *mut *mut QlqgScenario) -> QlqgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(name, "name")?;
        if fixtures::get(name).is_none() {
            return Err((QlqgStatus::Parse, format!("unknown fixture '{name}'")));
        }
        hand_out(fixtures::load(name).map_err(lib)?, out);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_free(s: *mut QlqgScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Realizability residuals of the plant and controller at `tol`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_check(s: *const QlqgScenario, tol: f64, out: *mut QlqgCheck) -> QlqgStatus {
    guard(|| {
        let s = scenario_arg(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = report::check_scenario(s, tol).map_err(lib)?;
        let (plant, ctrl) = (&r.rows[0], r.rows.get(1));
        *out = QlqgCheck {
            plant_res1: plant.drift_residual,
            plant_res2: plant.output_residual,
            controller_res1: ctrl.map_or(f64::NAN, |c| c.drift_residual),
            controller_res2: ctrl.map_or(f64::NAN, |c| c.output_residual),
            pass: r.pass(),
        };
        Ok(())
    })
}

/// Closed-loop cost. A loop that is not Hurwitz returns
/// `QLQG_STATUS_NOT_HURWITZ` with `out` still filled in.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_evaluate(s: *const QlqgScenario, out: *mut QlqgEvaluation) -> QlqgStatus {
    guard(|| {
        let s = scenario_arg(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = report::eval_scenario(s).map_err(lib)?;
        *out = QlqgEvaluation {
            j: r.j.unwrap_or(f64::NAN),
            vacuum_bound: r.vacuum_bound,
            spectral_abscissa: r.spectral_abscissa,
            lyapunov_residual: r.lyapunov_residual.unwrap_or(f64::NAN),
        };
        if r.hurwitz {
            Ok(())
        } else {
            Err(lib(Error::NotHurwitz(r.spectral_abscissa)))
        }
    })
}

/// Sweep the amplifier time scale over `points` values from `h_max` down to
/// `h_min`. Each output array must hold `points` doubles.
///
/// # Safety
/// Pointers must be valid for `points` elements.
#[no_mangle]
pub unsafe extern "C" fn qlqg_scenario_dpa_sweep(
    s: *const QlqgScenario,
    h_min: f64,
    h_max: f64,
    points: usize,
    h_out: *mut f64,
    j_out: *mut f64,
    abscissa_out: *mut f64,
) -> QlqgStatus {
    guard(|| {
        let s = scenario_arg(s)?;
        if h_out.is_null() || j_out.is_null() || abscissa_out.is_null() {
            return Err(null("output array"));
        }
        let rows = report::sweep_scenario(s, h_min, h_max, points).map_err(lib)?;
        for (i, r) in rows.iter().enumerate() {
            *h_out.add(i) = r.h;
            *j_out.add(i) = r.j;
            *abscissa_out.add(i) = r.abscissa;
        }
        Ok(())
    })
}

/// Solve `A P + P A^T + W = 0` for `n x n` row-major matrices.
/// `residual` may be null.
///
/// # Safety
/// `a`, `w` and `p_out` must hold `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qlqg_lyap_solve(
    n: usize,
    a: *const f64,
    w: *const f64,
    p_out: *mut f64,
    residual: *mut f64,
) -> QlqgStatus {
    guard(|| {
        if p_out.is_null() {
            return Err(null("p_out"));
        }
        let sol = lyap_solve(&matrix_arg(a, n, n, "a")?, &matrix_arg(w, n, n, "w")?).map_err(lib)?;
        for i in 0..n {
            for k in 0..n {
                *p_out.add(i * n + k) = sol.p[(i, k)];
            }
        }
        if let Some(r) = residual.as_mut() {
            *r = sol.residual;
        }
        Ok(())
    })
}

/// Cost floor `2 + Tr(CK^T CK)` for a `rows x 2` controller output matrix.
///
/// # Safety
/// `ck` must hold `2 * rows` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qlqg_vacuum_bound(ck: *const f64, rows: usize, out: *mut f64) -> QlqgStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = vacuum_bound(&matrix_arg(ck, rows, 2, "ck")?).map_err(lib)?;
        Ok(())
    })
}
