//! C ABI for the magnetic operator algebra workbench.
//!
//! Algebra elements cross the boundary as opaque [`MagwsElement`] handles
//! that the caller releases with [`magws_element_free`]. Every fallible
//! function returns a [`MagwsStatus`]; on failure the message is available
//! from [`magws_last_error`] until the next failing call on the same thread.
//! Panics are caught and reported as [`MagwsStatus::Panic`].

use magws_core::dixmier_engine::{
    analytic_spectrum, connes_formula, dixmier_estimate, AnalyticKind, ConnesOptions, FitModel,
};
use magws_core::laguerre_basis::laguerre_fn;
use magws_core::nc_calculus::{nabla, Direction};
use magws_core::{AlgebraElement, LagIndex, MagError, MagneticParams};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagwsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A scalar argument is outside its domain.
    InvalidParameter = 2,
    /// An index is out of range.
    IndexOutOfRange = 3,
    /// Operands carry different magnetic lengths.
    MismatchedParams = 4,
    /// A numerical routine failed or a truncation was too small.
    Numerical = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Opaque handle to an element of the magnetic algebra.
pub struct MagwsElement {
    inner: AlgebraElement,
}

/// Result of [`magws_connes_formula`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MagwsConnesResult {
    /// Real part of the Dixmier estimate of `d(rho A_1)^* d(rho A_2)`.
    pub lhs_re: f64,
    /// Imaginary part of the same estimate.
    pub lhs_im: f64,
    /// Real part of `(2 / l^2) trace(nabla(A_1)^* . nabla(A_2))`.
    pub rhs_re: f64,
    /// Imaginary part of the same value.
    pub rhs_im: f64,
    /// Modulus of the chirality-weighted estimate.
    pub chi_abs: f64,
    /// Combined fit residual.
    pub residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("interior nul removed"));
}

fn status_of(err: &MagError) -> MagwsStatus {
    match err {
        MagError::InvalidParameter { .. } | MagError::Config(_) => MagwsStatus::InvalidParameter,
        MagError::IndexOutOfRange(_) => MagwsStatus::IndexOutOfRange,
        MagError::MismatchedParams { .. } => MagwsStatus::MismatchedParams,
        MagError::SpectrumExhausted { .. }
        | MagError::Numerical(_)
        | MagError::TruncationTooSmall { .. }
        | MagError::Io(_) => MagwsStatus::Numerical,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (MagwsStatus, String)>) -> MagwsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MagwsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic caught at the C boundary");
            MagwsStatus::Panic
        }
    }
}

fn core<T>(r: magws_core::Result<T>) -> Result<T, (MagwsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (MagwsStatus, String) {
    (MagwsStatus::NullPointer, format!("`{name}` is null"))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn element<'a>(p: *const MagwsElement, name: &str) -> Result<&'a AlgebraElement, (MagwsStatus, String)> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null(name))
}

/// # Safety
/// `out` must be null or valid for one pointer write.
unsafe fn emit(out: *mut *mut MagwsElement, value: AlgebraElement) -> Result<(), (MagwsStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(MagwsElement { inner: value }));
    Ok(())
}

fn params(ell_b: f64) -> Result<MagneticParams, (MagwsStatus, String)> {
    core(MagneticParams::new(ell_b, 1.0))
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn magws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn magws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the transition operator `Upsilon_{j->k}` truncated at `cutoff`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_upsilon(
    j: usize,
    k: usize,
    cutoff: usize,
    ell_b: f64,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| emit(out, core(AlgebraElement::upsilon(j, k, cutoff, params(ell_b)?))?))
}

/// Creates the Landau projection `Pi_n` truncated at `cutoff`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_landau_projection(
    n: usize,
    cutoff: usize,
    ell_b: f64,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| emit(out, core(AlgebraElement::landau_projection(n, cutoff, params(ell_b)?))?))
}

/// Creates the heat element `exp(-s H / E_B)` truncated at `cutoff`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_heat(
    s: f64,
    cutoff: usize,
    ell_b: f64,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| emit(out, core(AlgebraElement::heat_element(s, cutoff, params(ell_b)?))?))
}

/// Releases a handle. Null is accepted and ignored.
///
/// # Safety
/// `handle` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn magws_element_free(handle: *mut MagwsElement) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// `out = a b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_multiply(
    a: *const MagwsElement,
    b: *const MagwsElement,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| {
        let prod = core(element(a, "a")?.multiply(element(b, "b")?))?;
        emit(out, prod)
    })
}

/// `out = alpha a + beta b` with complex coefficients.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_combine(
    alpha_re: f64,
    alpha_im: f64,
    a: *const MagwsElement,
    beta_re: f64,
    beta_im: f64,
    b: *const MagwsElement,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| {
        let alpha = magws_core::C64::new(alpha_re, alpha_im);
        let beta = magws_core::C64::new(beta_re, beta_im);
        let sum = core(element(a, "a")?.combine(alpha, element(b, "b")?, beta))?;
        emit(out, sum)
    })
}

/// `out = a^*`.
///
/// # Safety
/// `a` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_adjoint(a: *const MagwsElement, out: *mut *mut MagwsElement) -> MagwsStatus {
    guard(|| {
        let adj = element(a, "a")?.adjoint();
        emit(out, adj)
    })
}

/// `out = nabla_dir(a)` for `dir` 1 or 2.
///
/// # Safety
/// `a` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_nabla(
    a: *const MagwsElement,
    dir: u32,
    out: *mut *mut MagwsElement,
) -> MagwsStatus {
    guard(|| {
        let d = core(Direction::from_index(dir as usize))?;
        let v = nabla(element(a, "a")?, d);
        emit(out, v)
    })
}

/// Cutoff of the element.
///
/// # Safety
/// `a` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn magws_element_cutoff(a: *const MagwsElement, out: *mut usize) -> MagwsStatus {
    guard(|| {
        let c = element(a, "a")?.cutoff();
        *out.as_mut().ok_or_else(|| null("out"))? = c;
        Ok(())
    })
}

/// Coefficient of `Upsilon_{j->k}` in `a`; zero outside the cutoff.
///
/// # Safety
/// `a` must be a live handle; `re` and `im` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn magws_element_get(
    a: *const MagwsElement,
    k: usize,
    j: usize,
    re: *mut f64,
    im: *mut f64,
) -> MagwsStatus {
    guard(|| {
        let v = element(a, "a")?.get(k, j);
        *re.as_mut().ok_or_else(|| null("re"))? = v.re;
        *im.as_mut().ok_or_else(|| null("im"))? = v.im;
        Ok(())
    })
}

/// Trace `sum_j a_{j,j}` of the element.
///
/// # Safety
/// `a` must be a live handle; `re` and `im` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn magws_element_trace(a: *const MagwsElement, re: *mut f64, im: *mut f64) -> MagwsStatus {
    guard(|| {
        let t = element(a, "a")?.trace_b();
        *re.as_mut().ok_or_else(|| null("re"))? = t.re;
        *im.as_mut().ok_or_else(|| null("im"))? = t.im;
        Ok(())
    })
}

/// Value of the Laguerre function `psi_{n,m}` at `(x1, x2)`.
///
/// # Safety
/// `re` and `im` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn magws_laguerre_fn(
    n: usize,
    m: usize,
    x1: f64,
    x2: f64,
    ell_b: f64,
    re: *mut f64,
    im: *mut f64,
) -> MagwsStatus {
    guard(|| {
        let p = params(ell_b)?;
        let v = laguerre_fn(LagIndex::new(n, m), [x1, x2], &p);
        *re.as_mut().ok_or_else(|| null("re"))? = v.re;
        *im.as_mut().ok_or_else(|| null("im"))? = v.im;
        Ok(())
    })
}

/// Extrapolated Dixmier trace of an analytic case (`q2`, `d4`, `qpi0`,
/// `qups1_1`, ...) at regularisation `eps` and depth `n_max`.
///
/// # Safety
/// `case_name` must be a nul-terminated string; `value` and `residual` must
/// be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn magws_dixmier_analytic(
    case_name: *const c_char,
    eps: f64,
    n_max: u64,
    value: *mut f64,
    residual: *mut f64,
) -> MagwsStatus {
    guard(|| {
        if case_name.is_null() {
            return Err(null("case_name"));
        }
        let name = CStr::from_ptr(case_name)
            .to_str()
            .map_err(|e| (MagwsStatus::InvalidUtf8, e.to_string()))?;
        let kind = core(AnalyticKind::parse(name))?;
        let spec = core(analytic_spectrum(kind, eps, n_max))?;
        let est = core(dixmier_estimate(&spec, n_max, FitModel::PowerTail, f64::INFINITY))?;
        *value.as_mut().ok_or_else(|| null("value"))? = est.extrapolated;
        *residual.as_mut().ok_or_else(|| null("residual"))? = est.model_residual;
        Ok(())
    })
}

/// First Connes formula for `(a1, a2)` with the default matrix-path settings,
/// regularisation `eps` and dual cutoff `dual_cutoff`.
///
/// # Safety
/// `a1` and `a2` must be live handles; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn magws_connes_formula(
    a1: *const MagwsElement,
    a2: *const MagwsElement,
    eps: f64,
    dual_cutoff: usize,
    out: *mut MagwsConnesResult,
) -> MagwsStatus {
    guard(|| {
        let opts = ConnesOptions {
            eps,
            dual_cutoff,
            ..ConnesOptions::default()
        };
        let rep = core(connes_formula(element(a1, "a1")?, element(a2, "a2")?, &opts))?;
        let slot = out.as_mut().ok_or_else(|| null("out"))?;
        *slot = MagwsConnesResult {
            lhs_re: rep.lhs_dixmier.re,
            lhs_im: rep.lhs_dixmier.im,
            rhs_re: rep.rhs_exact.re,
            rhs_im: rep.rhs_exact.im,
            chi_abs: rep.chi_lhs.norm(),
            residual: rep.residual,
        };
        Ok(())
    })
}
