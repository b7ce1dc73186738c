//! C ABI over the spline→network pipeline. Every function returns an
//! `SnStatus`; results come back through out-pointers; handles are opaque and
//! must be released with the matching `*_free`. Failure details are stored in
//! a thread-local message retrievable via `sn_last_error`. Panics are caught
//! at the boundary and reported as `SN_STATUS_PANIC`.

use splinenet::net::build::{build_derivative_net, build_qi_net, WeightMode};
use splinenet::net::Network;
use splinenet::spline::{quasi_interpolate, spline_eval, QuasiInterpolant, TensorSplineSpace};
use splinenet::Error;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_void};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnStatus {
    SnStatusOk = 0,
    SnStatusNullArgument = 1,
    SnStatusInvalidArgument = 2,
    SnStatusUnsupported = 3,
    SnStatusNumeric = 4,
    SnStatusParse = 5,
    SnStatusIo = 6,
    SnStatusPanic = 7,
}

use SnStatus::*;

/// Opaque tensor-product spline space.
pub struct SnSpace {
    inner: TensorSplineSpace,
}

/// Opaque quasi-interpolant (a spline space plus fitted coefficients).
pub struct SnQuasiInterpolant {
    inner: QuasiInterpolant,
}

/// Opaque compiled network.
pub struct SnNetwork {
    inner: Network,
}

/// Scalar target function supplied by the caller: receives `dim` coordinates
/// and the caller's context pointer, returns f(x).
pub type SnTargetFn =
    Option<extern "C" fn(x: *const f64, dim: usize, ctx: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::InvalidArg(_)
        | Error::IndexOutOfRange { .. }
        | Error::DimMismatch(_)
        | Error::Config(_) => SnStatusInvalidArgument,
        Error::Unsupported(_) => SnStatusUnsupported,
        Error::Numeric(_) | Error::NonFinite(_) => SnStatusNumeric,
        Error::Parse(_) => SnStatusParse,
        Error::Io(_) => SnStatusIo,
    }
}

fn fail(e: Error) -> SnStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null_arg(what: &str) -> SnStatus {
    set_error(&format!("null pointer: {what}"));
    SnStatusNullArgument
}

fn guarded(f: impl FnOnce() -> SnStatus) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic crossed the FFI boundary");
            SnStatusPanic
        }
    }
}

/// Copy the most recent error message (NUL-terminated) into `buf`. Returns
/// the full length in bytes including the terminator; when `buf` is null or
/// `cap` is 0, nothing is copied and the required length is returned.
#[no_mangle]
pub extern "C" fn sn_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                // Guarantee termination even when truncated.
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Create a spline space on [0,1]^dim with n knot intervals per axis and
/// B-spline order k.
#[no_mangle]
pub extern "C" fn sn_space_new(
    dim: usize,
    n: usize,
    k: usize,
    out: *mut *mut SnSpace,
) -> SnStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match TensorSplineSpace::new(dim, n, k) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SnSpace { inner })) };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn sn_space_free(space: *mut SnSpace) {
    if !space.is_null() {
        drop(unsafe { Box::from_raw(space) });
    }
}

/// Fit the quasi-interpolant of the caller's target over the space.
#[no_mangle]
pub extern "C" fn sn_quasi_interpolate(
    space: *const SnSpace,
    target: SnTargetFn,
    ctx: *mut c_void,
    out: *mut *mut SnQuasiInterpolant,
) -> SnStatus {
    guarded(|| {
        if space.is_null() {
            return null_arg("space");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let Some(cb) = target else {
            return null_arg("target");
        };
        let space = unsafe { &*space };
        let f = |x: &[f64]| cb(x.as_ptr(), x.len(), ctx);
        match quasi_interpolate(&space.inner, &f) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SnQuasiInterpolant { inner })) };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn sn_qi_free(qi: *mut SnQuasiInterpolant) {
    if !qi.is_null() {
        drop(unsafe { Box::from_raw(qi) });
    }
}

/// Evaluate the quasi-interpolant (or, with a non-null `alpha` multi-index of
/// length `dim`, one of its partial derivatives) at `x`.
#[no_mangle]
pub extern "C" fn sn_qi_eval(
    qi: *const SnQuasiInterpolant,
    x: *const f64,
    dim: usize,
    alpha: *const usize,
    out: *mut f64,
) -> SnStatus {
    guarded(|| {
        if qi.is_null() {
            return null_arg("qi");
        }
        if x.is_null() {
            return null_arg("x");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let qi = unsafe { &*qi };
        let xs = unsafe { std::slice::from_raw_parts(x, dim) };
        let zeros;
        let al = if alpha.is_null() {
            zeros = vec![0usize; dim];
            &zeros[..]
        } else {
            unsafe { std::slice::from_raw_parts(alpha, dim) }
        };
        match spline_eval(&qi.inner, xs, al) {
            Ok(v) => {
                unsafe { *out = v };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Compile the quasi-interpolant into an exact network; `bounded` selects the
/// unit-ball parameter mode.
#[no_mangle]
pub extern "C" fn sn_net_compile(
    qi: *const SnQuasiInterpolant,
    bounded: bool,
    out: *mut *mut SnNetwork,
) -> SnStatus {
    guarded(|| {
        if qi.is_null() {
            return null_arg("qi");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let qi = unsafe { &*qi };
        let mode = if bounded { WeightMode::Bounded } else { WeightMode::Plain };
        match build_qi_net(&qi.inner, mode) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SnNetwork { inner })) };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn sn_net_free(net: *mut SnNetwork) {
    if !net.is_null() {
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Evaluate a single-output network at `x` (length `dim`).
#[no_mangle]
pub extern "C" fn sn_net_eval(
    net: *const SnNetwork,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if x.is_null() {
            return null_arg("x");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let net = unsafe { &*net };
        let xs = unsafe { std::slice::from_raw_parts(x, dim) };
        match net.inner.eval1(xs) {
            Ok(v) => {
                unsafe { *out = v };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Build the exact ∂/∂x_axis network of a compiled single-exponent network.
#[no_mangle]
pub extern "C" fn sn_net_derivative(
    net: *const SnNetwork,
    axis: usize,
    out: *mut *mut SnNetwork,
) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let net = unsafe { &*net };
        match build_derivative_net(&net.inner, axis) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SnNetwork { inner })) };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of nonzero parameters.
#[no_mangle]
pub extern "C" fn sn_net_param_count(net: *const SnNetwork, out: *mut usize) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*net).inner.param_count() };
        SnStatusOk
    })
}

/// Number of hidden layers.
#[no_mangle]
pub extern "C" fn sn_net_depth(net: *const SnNetwork, out: *mut usize) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*net).inner.depth() };
        SnStatusOk
    })
}

/// Largest parameter magnitude over all weights and biases.
#[no_mangle]
pub extern "C" fn sn_net_max_abs_param(net: *const SnNetwork, out: *mut f64) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*net).inner.max_abs_param() };
        SnStatusOk
    })
}

/// Serialize the network to the textual format. The returned string must be
/// released with `sn_string_free`.
#[no_mangle]
pub extern "C" fn sn_net_to_text(net: *const SnNetwork, out: *mut *mut c_char) -> SnStatus {
    guarded(|| {
        if net.is_null() {
            return null_arg("net");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let text = unsafe { (*net).inner.to_text() };
        match CString::new(text) {
            Ok(s) => {
                unsafe { *out = s.into_raw() };
                SnStatusOk
            }
            Err(_) => {
                set_error("serialized text contained an interior NUL");
                SnStatusNumeric
            }
        }
    })
}

/// Parse a network from the textual format.
#[no_mangle]
pub extern "C" fn sn_net_from_text(text: *const c_char, out: *mut *mut SnNetwork) -> SnStatus {
    guarded(|| {
        if text.is_null() {
            return null_arg("text");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let s = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("text is not valid UTF-8");
                return SnStatusParse;
            }
        };
        match Network::from_text(s) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(SnNetwork { inner })) };
                SnStatusOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a string returned by this library.
#[no_mangle]
pub extern "C" fn sn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
