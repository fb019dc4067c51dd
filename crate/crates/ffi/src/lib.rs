//! C interface to the certification pipeline.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns an [`HsgStatus`]
//! and leaves a message for [`hsg_last_error_message`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hybrid_iss::pipeline::{dwell_region, run_pipeline, Certificate, DwellRegion, ModeChoice, NetworkSpec, RunOptions, Verdict};
use hybrid_iss::smallgain::spectral_radius;

/// Parsed network description.
pub struct HsgSpec(NetworkSpec);

/// Result of one pipeline run.
pub struct HsgCertificate(Certificate);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidSpec = 3,
    Pipeline = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsgMode {
    Auto = 0,
    Adt = 1,
    Radt = 2,
    None = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsgVerdict {
    CertifiedIss = 0,
    CertifiedGas = 1,
    CertifiedForSolutionClass = 2,
    Inconclusive = 3,
    Refuted = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsgRegion {
    Unrestricted = 0,
    Adt = 1,
    Radt = 2,
    EmptyForComplete = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (HsgStatus, String)>) -> HsgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HsgStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HsgStatus::Panic
        }
    }
}

fn null(what: &str) -> (HsgStatus, String) {
    (HsgStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hsg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON network description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hsg_spec_from_json(json: *const c_char, out: *mut *mut HsgSpec) -> HsgStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| (HsgStatus::InvalidUtf8, e.to_string()))?;
        let spec = NetworkSpec::from_json(text).map_err(|e| (HsgStatus::InvalidSpec, e.to_string()))?;
        *out = Box::into_raw(Box::new(HsgSpec(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from [`hsg_spec_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hsg_spec_free(spec: *mut HsgSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Runs the pipeline. Inconclusive and refuted outcomes still succeed
/// with a certificate; only malformed models fail.
///
/// # Safety
/// `spec` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hsg_certify(spec: *const HsgSpec, mode: HsgMode, out: *mut *mut HsgCertificate) -> HsgStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            HsgMode::Auto => ModeChoice::Auto,
            HsgMode::Adt => ModeChoice::Adt,
            HsgMode::Radt => ModeChoice::Radt,
            HsgMode::None => ModeChoice::None,
        };
        let opts = RunOptions { mode, ..RunOptions::default() };
        let outcome = run_pipeline(&spec.0, &opts).map_err(|e| (HsgStatus::Pipeline, e.to_string()))?;
        *out = Box::into_raw(Box::new(HsgCertificate(outcome.certificate)));
        Ok(())
    })
}

/// # Safety
/// `cert` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hsg_certificate_verdict(cert: *const HsgCertificate, out: *mut HsgVerdict) -> HsgStatus {
    guard(|| {
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match cert.0.verdict {
            Verdict::CertifiedIss => HsgVerdict::CertifiedIss,
            Verdict::CertifiedGas => HsgVerdict::CertifiedGas,
            Verdict::CertifiedForSolutionClass => HsgVerdict::CertifiedForSolutionClass,
            Verdict::Inconclusive => HsgVerdict::Inconclusive,
            Verdict::Refuted => HsgVerdict::Refuted,
        };
        Ok(())
    })
}

/// Composite exponential flow and jump rates. Fails with
/// `INVALID_ARGUMENT` when the run stopped before composing.
///
/// # Safety
/// `cert` must be a live handle; `c` and `d` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn hsg_certificate_rates(cert: *const HsgCertificate, c: *mut f64, d: *mut f64) -> HsgStatus {
    guard(|| {
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        let (c, d) = (c.as_mut().ok_or_else(|| null("c"))?, d.as_mut().ok_or_else(|| null("d"))?);
        let rates = cert.0.rates.as_ref().ok_or((HsgStatus::InvalidArgument, "no composite rates".to_string()))?;
        *c = rates.c;
        *d = rates.d;
        Ok(())
    })
}

/// Full report as JSON; release with [`hsg_string_free`].
///
/// # Safety
/// `cert` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hsg_certificate_to_json(cert: *const HsgCertificate, out: *mut *mut c_char) -> HsgStatus {
    guard(|| {
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string_pretty(&cert.0).map_err(|e| (HsgStatus::Pipeline, e.to_string()))?;
        *out = CString::new(text).map_err(|e| (HsgStatus::Pipeline, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hsg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `cert` must come from [`hsg_certify`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hsg_certificate_free(cert: *mut HsgCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Spectral radius of a nonnegative row-major `n × n` matrix.
///
/// # Safety
/// `m` must point to `n * n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn hsg_spectral_radius(m: *const f64, n: usize, out: *mut f64) -> HsgStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if n == 0 {
            return Err((HsgStatus::InvalidArgument, "empty matrix".into()));
        }
        if m.is_null() {
            return Err(null("m"));
        }
        let flat = std::slice::from_raw_parts(m, n.checked_mul(n).ok_or((HsgStatus::InvalidArgument, "n too large".into()))?);
        if flat.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err((HsgStatus::InvalidArgument, "entries must be finite and nonnegative".into()));
        }
        let rows: Vec<Vec<f64>> = flat.chunks(n).map(|r| r.to_vec()).collect();
        *out = spectral_radius(&rows);
        Ok(())
    })
}

/// Dwell-time region for composite rates. `bound` receives the `δ` or
/// `δ*` bound (possibly infinite) and NaN for the other classes.
///
/// # Safety
/// `class` and `bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsg_dwell_region(c: f64, d: f64, class: *mut HsgRegion, bound: *mut f64) -> HsgStatus {
    guard(|| {
        let (class, bound) = (class.as_mut().ok_or_else(|| null("class"))?, bound.as_mut().ok_or_else(|| null("bound"))?);
        if !(c.is_finite() && d.is_finite()) {
            return Err((HsgStatus::InvalidArgument, "rates must be finite".into()));
        }
        (*class, *bound) = match dwell_region(c, d) {
            DwellRegion::Unrestricted => (HsgRegion::Unrestricted, f64::NAN),
            DwellRegion::Adt { delta_bound } => (HsgRegion::Adt, delta_bound),
            DwellRegion::Radt { delta_star_bound } => (HsgRegion::Radt, delta_star_bound),
            DwellRegion::EmptyForComplete => (HsgRegion::EmptyForComplete, f64::NAN),
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use std::ptr;

    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        let status = unsafe { hsg_spec_from_json(ptr::null(), ptr::null_mut()) };
        assert_eq!(status, HsgStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(hsg_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "json is null");
    }

    #[test]
    fn region_of_example_rates() {
        let (mut class, mut bound) = (HsgRegion::Unrestricted, 0.0);
        assert_eq!(unsafe { hsg_dwell_region(-2.0, 1.0, &mut class, &mut bound) }, HsgStatus::Ok);
        assert_eq!((class, bound), (HsgRegion::Radt, 0.5));
    }
}
