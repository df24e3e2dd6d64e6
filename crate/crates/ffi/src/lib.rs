//! C interface to `prodense`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every function returns a
//! [`ProdenseStatus`]; on failure, [`prodense_last_error`] describes the
//! problem. Strings returned through out-parameters are owned by the caller
//! and released with [`prodense_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use prodense::cli::{
    parse_problem, run, verify_certificate, Certificate, Command, Overrides, Problem,
};
use prodense::dynamics::{certify_proximal, contraction_gap_sq, Verdict};
use prodense::pingpong::{matrix_oracle, OracleResult};
use prodense::projective::ProjMat;
use prodense::scalar::{fmt_rat, parse_rat, Place};
use prodense::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProdenseStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Invalid = 4,
    /// A hypothesis or precondition of the operation does not hold.
    Precondition = 5,
    /// A certificate failed verification.
    Rejected = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProdenseVerdict {
    Yes = 0,
    No = 1,
    Unknown = 2,
}

/// A parsed problem file.
pub struct ProdenseProblem(Problem);

/// A certificate produced by a command or read from JSON.
pub struct ProdenseCertificate(Certificate);

/// An element of `PGL_n(ℚ)` at a fixed place.
pub struct ProdenseMatrix(ProjMat);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: ProdenseStatus, msg: impl Into<String>) -> ProdenseStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ProdenseStatus {
    let status = match e {
        Error::Parse { .. } => ProdenseStatus::Parse,
        Error::RadiusTooSmall
        | Error::GeneralPosition(_)
        | Error::TrivialClass
        | Error::NothingToIntersect
        | Error::Hypothesis(_)
        | Error::NotHyperbolic
        | Error::ExpandFurther => ProdenseStatus::Precondition,
        _ => ProdenseStatus::Invalid,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into `Panic`.
fn guard(f: impl FnOnce() -> ProdenseStatus) -> ProdenseStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "internal panic".into());
            fail(ProdenseStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ProdenseStatus> {
    if s.is_null() {
        return Err(fail(ProdenseStatus::NullArgument, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ProdenseStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, ProdenseStatus> {
    p.as_ref()
        .ok_or_else(|| fail(ProdenseStatus::NullArgument, "null handle"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> ProdenseStatus {
    if out.is_null() {
        return fail(ProdenseStatus::NullArgument, "null output pointer");
    }
    out.write(value);
    ProdenseStatus::Ok
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("no interior nul")
        .into_raw()
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn prodense_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn prodense_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn prodense_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a problem file.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_problem_parse(
    text: *const c_char,
    out: *mut *mut ProdenseProblem,
) -> ProdenseStatus {
    guard(|| {
        let text = tri!(read_str(text));
        match parse_problem(text, &Overrides::default()) {
            Ok(p) => write_out(out, Box::into_raw(Box::new(ProdenseProblem(p)))),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `p` must be NULL or a handle from `prodense_problem_parse`.
#[no_mangle]
pub unsafe extern "C" fn prodense_problem_free(p: *mut ProdenseProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs `command` (`analyze`, `pingpong`, `synthesize` or `tree`) on a
/// problem and returns its certificate.
///
/// # Safety
/// `command` must be a NUL-terminated string, `problem` a live handle and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_run(
    command: *const c_char,
    problem: *const ProdenseProblem,
    out: *mut *mut ProdenseCertificate,
) -> ProdenseStatus {
    guard(|| {
        let name = tri!(read_str(command));
        let problem = tri!(handle(problem));
        let Some(cmd) = Command::from_name(name) else {
            return fail(ProdenseStatus::Invalid, format!("unknown command `{name}`"));
        };
        match run(cmd, problem.0.clone()) {
            Ok(c) => write_out(out, Box::into_raw(Box::new(ProdenseCertificate(c)))),
            Err(e) => from_error(e),
        }
    })
}

/// Reads a certificate from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_certificate_from_json(
    json: *const c_char,
    out: *mut *mut ProdenseCertificate,
) -> ProdenseStatus {
    guard(|| {
        let json = tri!(read_str(json));
        match Certificate::from_json(json) {
            Ok(c) => write_out(out, Box::into_raw(Box::new(ProdenseCertificate(c)))),
            Err(e) => from_error(e),
        }
    })
}

/// Canonical JSON text of a certificate.
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_certificate_to_json(
    cert: *const ProdenseCertificate,
    out: *mut *mut c_char,
) -> ProdenseStatus {
    guard(|| {
        let cert = tri!(handle(cert));
        write_out(out, into_c_string(cert.0.to_canonical_json()))
    })
}

/// The command-line exit code for the certificate's verdict (0, 3 or 4).
///
/// # Safety
/// `cert` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_certificate_exit_code(
    cert: *const ProdenseCertificate,
    out: *mut i32,
) -> ProdenseStatus {
    guard(|| {
        let cert = tri!(handle(cert));
        write_out(out, cert.0.verdict.exit_code())
    })
}

/// Re-checks a certificate. Returns `Rejected` with the reason in
/// `prodense_last_error` when it does not hold.
///
/// # Safety
/// `cert` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn prodense_certificate_verify(
    cert: *const ProdenseCertificate,
) -> ProdenseStatus {
    guard(|| {
        let cert = tri!(handle(cert));
        match verify_certificate(&cert.0) {
            Ok(()) => ProdenseStatus::Ok,
            Err(reason) => fail(ProdenseStatus::Rejected, reason),
        }
    })
}

/// # Safety
/// `c` must be NULL or a certificate handle.
#[no_mangle]
pub unsafe extern "C" fn prodense_certificate_free(c: *mut ProdenseCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Builds an `n×n` matrix from row-major integer entries. `prime` selects
/// the place: 0 for the archimedean one, otherwise the p-adic one.
///
/// # Safety
/// `entries` must point to `n*n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_matrix_from_i64(
    n: usize,
    entries: *const i64,
    prime: u64,
    out: *mut *mut ProdenseMatrix,
) -> ProdenseStatus {
    guard(|| {
        if entries.is_null() {
            return fail(ProdenseStatus::NullArgument, "null entries");
        }
        if n == 0 {
            return fail(ProdenseStatus::Invalid, "empty matrix");
        }
        let place = if prime == 0 {
            Place::Archimedean
        } else {
            tri!(Place::padic(prime).map_err(from_error))
        };
        let flat = std::slice::from_raw_parts(entries, n * n);
        let rows: Vec<&[i64]> = flat.chunks(n).collect();
        let mat = prodense::linalg::Mat::from_i64(&rows);
        match ProjMat::new(mat, place) {
            Ok(m) => write_out(out, Box::into_raw(Box::new(ProdenseMatrix(m)))),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `m` must be NULL or a matrix handle.
#[no_mangle]
pub unsafe extern "C" fn prodense_matrix_free(m: *mut ProdenseMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Rational bounds `lo ≤ (σ₂/σ₁)² ≤ hi`, as `p/q` strings.
///
/// # Safety
/// `m` must be a live handle; `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_matrix_contraction_gap_sq(
    m: *const ProdenseMatrix,
    lo: *mut *mut c_char,
    hi: *mut *mut c_char,
) -> ProdenseStatus {
    guard(|| {
        let m = tri!(handle(m));
        if lo.is_null() || hi.is_null() {
            return fail(ProdenseStatus::NullArgument, "null output pointer");
        }
        if m.0.dim() < 2 {
            return fail(ProdenseStatus::Invalid, "dimension below 2");
        }
        let gap = contraction_gap_sq(&m.0);
        write_out(lo, into_c_string(fmt_rat(&gap.lo)));
        write_out(hi, into_c_string(fmt_rat(&gap.hi)))
    })
}

/// Certifies `(r, ε)`-proximality. On `Yes`, `cert_json` (if not NULL)
/// receives the certificate as JSON.
///
/// # Safety
/// `m` must be a live handle, `r_sq` and `epsilon_sq` NUL-terminated
/// rationals, `verdict` writable, `cert_json` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_matrix_certify_proximal(
    m: *const ProdenseMatrix,
    r_sq: *const c_char,
    epsilon_sq: *const c_char,
    verdict: *mut ProdenseVerdict,
    cert_json: *mut *mut c_char,
) -> ProdenseStatus {
    guard(|| {
        let m = tri!(handle(m));
        let r = tri!(parse_rat(tri!(read_str(r_sq))).map_err(from_error));
        let e = tri!(parse_rat(tri!(read_str(epsilon_sq))).map_err(from_error));
        if verdict.is_null() {
            return fail(ProdenseStatus::NullArgument, "null output pointer");
        }
        let v = tri!(certify_proximal(&m.0, &r, &e).map_err(from_error));
        let (code, json) = match &v {
            Verdict::Yes(c) => (
                ProdenseVerdict::Yes,
                Some(serde_json::to_string(c).expect("certificates serialize")),
            ),
            Verdict::No(_) => (ProdenseVerdict::No, None),
            Verdict::Unknown => (ProdenseVerdict::Unknown, None),
        };
        verdict.write(code);
        if !cert_json.is_null() {
            cert_json.write(json.map_or(ptr::null_mut(), into_c_string));
        }
        ProdenseStatus::Ok
    })
}

/// Exhaustive search for a relation among `count` matrices with reduced
/// words up to `max_len`. `free` receives 1 when none is found.
///
/// # Safety
/// `mats` must point to `count` live handles; `free` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prodense_matrix_oracle(
    mats: *const *const ProdenseMatrix,
    count: usize,
    max_len: usize,
    free: *mut i32,
) -> ProdenseStatus {
    guard(|| {
        if mats.is_null() || count == 0 {
            return fail(ProdenseStatus::NullArgument, "no matrices");
        }
        let mut elems = Vec::with_capacity(count);
        for &p in std::slice::from_raw_parts(mats, count) {
            elems.push(tri!(handle(p)).0.clone());
        }
        let first = &elems[0];
        if elems
            .iter()
            .any(|g| g.place() != first.place() || g.dim() != first.dim())
        {
            return fail(
                ProdenseStatus::Invalid,
                "matrices differ in place or dimension",
            );
        }
        let found = matrix_oracle(&elems, max_len);
        write_out(free, i32::from(found == OracleResult::NoRelationFound))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status() {
        assert_eq!(
            from_error(Error::RadiusTooSmall),
            ProdenseStatus::Precondition
        );
        assert_eq!(
            from_error(Error::Parse {
                line: 1,
                col: 2,
                msg: "x".into()
            }),
            ProdenseStatus::Parse
        );
        assert_eq!(from_error(Error::Singular), ProdenseStatus::Invalid);
        let msg = unsafe { CStr::from_ptr(prodense_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "matrix is singular");
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, ProdenseStatus::Panic);
        let msg = unsafe { CStr::from_ptr(prodense_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "boom");
    }
}
