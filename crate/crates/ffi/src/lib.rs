//! C interface to `projifs`.
//!
//! Systems and point clouds are opaque handles created and released through
//! this API. Every entry point returns a [`ProjifsStatus`]; on failure the
//! message is available from [`projifs_last_error_message`] on the same
//! thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use projifs::attractor::{self, PointCloud};
use projifs::multicone::{self, Containment};
use projifs::semigroup::SystemConfig;
use projifs::spectral;
use projifs::{Error, Matrix2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjifsStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Parse = 3,
    BudgetExceeded = 4,
    /// The computation ran but could not reach a verdict.
    Inconclusive = 5,
    Internal = 6,
}

/// A finite alphabet of SL(2,R) matrices.
pub struct ProjifsSystem {
    cfg: SystemConfig,
}

/// Angles in (0, π] approximating an attractor.
pub struct ProjifsCloud {
    cloud: PointCloud,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> ProjifsStatus {
    match e {
        Error::Parse { .. } => ProjifsStatus::Parse,
        Error::BudgetExceeded(_) => ProjifsStatus::BudgetExceeded,
        Error::NonFinite
        | Error::BadDeterminant(_)
        | Error::EmptyAlphabet
        | Error::BadProbs(_)
        | Error::InvalidConstant(_)
        | Error::Usage(_) => ProjifsStatus::InvalidArgument,
        Error::TooFewScales(_)
        | Error::NotCompactlyContained(_)
        | Error::NonPositiveGap(_)
        | Error::CertificationFailed(_)
        | Error::EllipticLetter
        | Error::NoNormGrowth(_)
        | Error::NotApplicable(_)
        | Error::NotReducible
        | Error::NoPivot(_)
        | Error::NonConvergence { .. } => ProjifsStatus::Inconclusive,
        _ => ProjifsStatus::Internal,
    }
}

/// Runs `f`, recording errors and turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (ProjifsStatus, String)>) -> ProjifsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ProjifsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal error: {msg}"));
            ProjifsStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (ProjifsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (ProjifsStatus, String) {
    (ProjifsStatus::NullPointer, format!("{name} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn projifs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn projifs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a system from `count` matrices stored row-major as
/// `a, b, c, d` in `entries` (`4 * count` doubles). Determinants are
/// renormalized to 1; non-positive determinants are rejected.
///
/// # Safety
/// `entries` must point to `4 * count` readable doubles and `out` to a
/// writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn projifs_system_from_matrices(
    entries: *const f64,
    count: usize,
    out: *mut *mut ProjifsSystem,
) -> ProjifsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if entries.is_null() {
            return Err(null("entries"));
        }
        let len = count
            .checked_mul(4)
            .ok_or((ProjifsStatus::InvalidArgument, "count overflows".into()))?;
        // SAFETY: caller guarantees `entries` covers `4 * count` doubles.
        let raw = unsafe { std::slice::from_raw_parts(entries, len) };
        let alphabet = raw
            .chunks_exact(4)
            .map(|m| Matrix2::new(m[0], m[1], m[2], m[3]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib_err)?;
        let cfg = SystemConfig::new(alphabet).map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ProjifsSystem { cfg })) };
        Ok(())
    })
}

/// Parses a system from configuration text (`matrix a b c d` lines and
/// optional settings).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn projifs_system_from_config(
    text: *const c_char,
    out: *mut *mut ProjifsSystem,
) -> ProjifsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if text.is_null() {
            return Err(null("text"));
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(text) }.to_str().map_err(|e| {
            (
                ProjifsStatus::InvalidArgument,
                format!("config is not UTF-8: {e}"),
            )
        })?;
        let parsed = projifs::config::parse_config_str(text, "<ffi>").map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ProjifsSystem { cfg: parsed.config })) };
        Ok(())
    })
}

/// Releases a system. NULL is ignored.
///
/// # Safety
/// `sys` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn projifs_system_free(sys: *mut ProjifsSystem) {
    if !sys.is_null() {
        // SAFETY: caller passes a handle produced by Box::into_raw.
        drop(unsafe { Box::from_raw(sys) });
    }
}

/// Number of letters in the alphabet.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn projifs_system_len(
    sys: *const ProjifsSystem,
    out: *mut usize,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let sys = unsafe { sys.as_ref() }.ok_or_else(|| null("sys"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = sys.cfg.len();
        Ok(())
    })
}

/// Bracket `[lo, hi]` for the critical exponent from word sums up to
/// `depth`. `certified` is set when an almost-multiplicativity constant was
/// found and `hi` is a proven bound; `hi` may be +inf otherwise.
///
/// # Safety
/// `sys` must be a live handle and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn projifs_critical_exponent(
    sys: *const ProjifsSystem,
    depth: usize,
    lo: *mut f64,
    hi: *mut f64,
    certified: *mut bool,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let sys = unsafe { sys.as_ref() }.ok_or_else(|| null("sys"))?;
        let lo = unsafe { lo.as_mut() }.ok_or_else(|| null("lo"))?;
        let hi = unsafe { hi.as_mut() }.ok_or_else(|| null("hi"))?;
        let certified = unsafe { certified.as_mut() }.ok_or_else(|| null("certified"))?;
        if depth == 0 {
            return Err((
                ProjifsStatus::InvalidArgument,
                "depth must be positive".into(),
            ));
        }
        let c = multicone::find_invariant_multicone(
            &sys.cfg,
            multicone::SEARCH_DEPTH,
            multicone::SEARCH_EPS,
        )
        .filter(|f| f.containment == Containment::Compact)
        .and_then(|f| multicone::certify_uniform_hyperbolicity(&sys.cfg, &f.cone).ok())
        .map(|cert| cert.c_mult);
        let b = spectral::critical_exponent_bracket(&sys.cfg, depth, c).map_err(lib_err)?;
        *lo = b.lo;
        *hi = b.hi;
        *certified = b.certified;
        Ok(())
    })
}

/// Certifies uniform hyperbolicity with a compactly invariant multicone.
/// Returns `INCONCLUSIVE` when no certificate is found, which does not
/// prove the system is not uniformly hyperbolic.
///
/// # Safety
/// `sys` must be a live handle and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn projifs_certify_uh(
    sys: *const ProjifsSystem,
    margin: *mut f64,
    lambda: *mut f64,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let sys = unsafe { sys.as_ref() }.ok_or_else(|| null("sys"))?;
        let margin = unsafe { margin.as_mut() }.ok_or_else(|| null("margin"))?;
        let lambda = unsafe { lambda.as_mut() }.ok_or_else(|| null("lambda"))?;
        let found = multicone::find_invariant_multicone(
            &sys.cfg,
            multicone::SEARCH_DEPTH,
            multicone::SEARCH_EPS,
        )
        .ok_or((
            ProjifsStatus::Inconclusive,
            "no invariant multicone found".to_string(),
        ))?;
        if found.containment != Containment::Compact {
            return Err((
                ProjifsStatus::Inconclusive,
                "multicone is only strictly invariant".into(),
            ));
        }
        let cert =
            multicone::certify_uniform_hyperbolicity(&sys.cfg, &found.cone).map_err(lib_err)?;
        *margin = cert.margin;
        *lambda = cert.lambda;
        Ok(())
    })
}

/// Attracting fixed points of all words up to `depth`.
///
/// # Safety
/// `sys` must be a live handle and `out` a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn projifs_attractor_cloud(
    sys: *const ProjifsSystem,
    depth: usize,
    out: *mut *mut ProjifsCloud,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let sys = unsafe { sys.as_ref() }.ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if depth == 0 {
            return Err((
                ProjifsStatus::InvalidArgument,
                "depth must be positive".into(),
            ));
        }
        let cloud = attractor::attractor_points_fixedpoint(&sys.cfg, depth).map_err(lib_err)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ProjifsCloud { cloud })) };
        Ok(())
    })
}

/// Releases a cloud. NULL is ignored.
///
/// # Safety
/// `cloud` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn projifs_cloud_free(cloud: *mut ProjifsCloud) {
    if !cloud.is_null() {
        // SAFETY: caller passes a handle produced by Box::into_raw.
        drop(unsafe { Box::from_raw(cloud) });
    }
}

/// Copies up to `cap` sorted angles into `buf` and stores the total number
/// of points in `len`. Pass `buf = NULL` and `cap = 0` to query the size.
///
/// # Safety
/// `cloud` must be a live handle, `buf` must have room for `cap` doubles
/// and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn projifs_cloud_thetas(
    cloud: *const ProjifsCloud,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let cloud = unsafe { cloud.as_ref() }.ok_or_else(|| null("cloud"))?;
        let len = unsafe { len.as_mut() }.ok_or_else(|| null("len"))?;
        let thetas = cloud.cloud.thetas();
        *len = thetas.len();
        if cap > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            let n = cap.min(thetas.len());
            // SAFETY: `buf` has room for `cap >= n` doubles.
            unsafe { ptr::copy_nonoverlapping(thetas.as_ptr(), buf, n) };
        }
        Ok(())
    })
}

/// Box-counting dimension of a cloud over the default scales.
/// `INCONCLUSIVE` when too few scales are usable.
///
/// # Safety
/// `cloud` must be a live handle and the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn projifs_box_dimension(
    cloud: *const ProjifsCloud,
    value: *mut f64,
    stderr: *mut f64,
) -> ProjifsStatus {
    guard(|| {
        // SAFETY: caller guarantees validity; nulls are rejected.
        let cloud = unsafe { cloud.as_ref() }.ok_or_else(|| null("cloud"))?;
        let value = unsafe { value.as_mut() }.ok_or_else(|| null("value"))?;
        let stderr = unsafe { stderr.as_mut() }.ok_or_else(|| null("stderr"))?;
        let est = attractor::box_dimension(&cloud.cloud, &attractor::default_scales())
            .map_err(lib_err)?;
        *value = est.value;
        *stderr = est.stderr;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(entries: &[f64]) -> *mut ProjifsSystem {
        let mut sys = ptr::null_mut();
        let st =
            unsafe { projifs_system_from_matrices(entries.as_ptr(), entries.len() / 4, &mut sys) };
        assert_eq!(st, ProjifsStatus::Ok);
        sys
    }

    fn last_error() -> String {
        let p = projifs_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(projifs_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn rejects_bad_determinant() {
        let mut sys = ptr::null_mut();
        let m = [1.0, 2.0, 2.0, 1.0];
        let st = unsafe { projifs_system_from_matrices(m.as_ptr(), 1, &mut sys) };
        assert_eq!(st, ProjifsStatus::InvalidArgument);
        assert!(sys.is_null());
        assert!(last_error().contains("determinant"));
    }

    #[test]
    fn null_pointers() {
        let mut n = 0usize;
        assert_eq!(
            unsafe { projifs_system_len(ptr::null(), &mut n) },
            ProjifsStatus::NullPointer
        );
        assert!(last_error().contains("sys"));
        let mut sys = ptr::null_mut();
        assert_eq!(
            unsafe { projifs_system_from_matrices(ptr::null(), 1, &mut sys) },
            ProjifsStatus::NullPointer
        );
        unsafe {
            projifs_system_free(ptr::null_mut());
            projifs_cloud_free(ptr::null_mut());
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let text = CString::new("matrix 1 1 0\n").unwrap();
        let mut sys = ptr::null_mut();
        let st = unsafe { projifs_system_from_config(text.as_ptr(), &mut sys) };
        assert_eq!(st, ProjifsStatus::Parse);
        assert!(last_error().starts_with("<ffi>:1:"), "{}", last_error());
    }

    #[test]
    fn success_clears_the_error() {
        let mut n = 0usize;
        unsafe { projifs_system_len(ptr::null(), &mut n) };
        let sys = system(&[2.0, 0.0, 0.0, 0.5]);
        assert_eq!(
            unsafe { projifs_system_len(sys, &mut n) },
            ProjifsStatus::Ok
        );
        assert_eq!(n, 1);
        assert!(projifs_last_error_message().is_null());
        unsafe { projifs_system_free(sys) };
    }

    #[test]
    fn diagonal_pair_bracket_contains_root() {
        // Σ over words of ‖A‖^{-2s} is the geometric series in 2^{-2s} + 3^{-2s}.
        let root = {
            let (mut a, mut b) = (0.0f64, 2.0f64);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if 2f64.powf(-2.0 * m) + 3f64.powf(-2.0 * m) > 1.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            a
        };
        let sys = system(&[2.0, 0.0, 0.0, 0.5, 3.0, 0.0, 0.0, 1.0 / 3.0]);
        let (mut lo, mut hi, mut cert) = (0.0, 0.0, false);
        let st = unsafe { projifs_critical_exponent(sys, 16, &mut lo, &mut hi, &mut cert) };
        assert_eq!(st, ProjifsStatus::Ok);
        assert!(lo <= root && root <= hi, "{lo} {root} {hi}");
        unsafe { projifs_system_free(sys) };
    }

    #[test]
    fn certificate_and_cloud_for_positive_pair() {
        let sys = system(&[2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        let (mut margin, mut lambda) = (0.0, 0.0);
        assert_eq!(
            unsafe { projifs_certify_uh(sys, &mut margin, &mut lambda) },
            ProjifsStatus::Ok
        );
        assert!(margin > 0.0 && lambda > 1.0);

        let mut cloud = ptr::null_mut();
        assert_eq!(
            unsafe { projifs_attractor_cloud(sys, 10, &mut cloud) },
            ProjifsStatus::Ok
        );
        let mut len = 0usize;
        assert_eq!(
            unsafe { projifs_cloud_thetas(cloud, ptr::null_mut(), 0, &mut len) },
            ProjifsStatus::Ok
        );
        let mut buf = vec![0.0; len];
        assert_eq!(
            unsafe { projifs_cloud_thetas(cloud, buf.as_mut_ptr(), len, &mut len) },
            ProjifsStatus::Ok
        );
        assert!(buf.windows(2).all(|w| w[0] <= w[1]));
        // Positive matrices map the open first quadrant into itself.
        assert!(buf
            .iter()
            .all(|&t| t > 0.0 && t < std::f64::consts::FRAC_PI_2));
        unsafe {
            projifs_cloud_free(cloud);
            projifs_system_free(sys);
        }
    }

    #[test]
    fn elliptic_letter_is_inconclusive() {
        let sys = system(&[0.0, -1.0, 1.0, 0.0]);
        let (mut margin, mut lambda) = (0.0, 0.0);
        assert_eq!(
            unsafe { projifs_certify_uh(sys, &mut margin, &mut lambda) },
            ProjifsStatus::Inconclusive
        );
        unsafe { projifs_system_free(sys) };
    }
}
