//! C ABI over the degenlab core.
//!
//! Every entry point returns a [`DlStatus`]. On anything but `DL_STATUS_OK`
//! the calling thread's last error message is set and can be read with
//! [`dl_last_error`]. Objects cross the boundary as opaque handles that the
//! caller owns and must release with the matching `*_free` function. Panics
//! never unwind into C; they surface as `DL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use degenlab::coeffs::{CoefficientProfile, QuadratureConfig, Verdict};
use degenlab::evolve::{heat_evolve, HeatBackend};
use degenlab::grid::{assemble, DiscreteOperator, Mesh};
use degenlab::metric::distance_1d;
use degenlab::LabError;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Argument = 3,
    Domain = 4,
    Validation = 5,
    Resource = 6,
    Unsupported = 7,
    Solver = 8,
    Inconclusive = 9,
    Schema = 10,
    Io = 11,
    Panic = 12,
}

/// Classifier outcome for a coefficient profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlVerdict {
    StronglyElliptic = 0,
    ClosableDegenerate = 1,
    Separating = 2,
    Inconclusive = 3,
}

/// Opaque coefficient profile.
pub struct DlProfile(CoefficientProfile);

/// Opaque assembled operator on a reflecting box grid.
pub struct DlOperator(DiscreteOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &LabError) -> DlStatus {
    match e {
        LabError::Domain { .. } => DlStatus::Domain,
        LabError::Argument(_) => DlStatus::Argument,
        LabError::Validation(_) => DlStatus::Validation,
        LabError::Resource(_) => DlStatus::Resource,
        LabError::Unsupported(_) => DlStatus::Unsupported,
        LabError::Solver { .. } | LabError::Cfl { .. } => DlStatus::Solver,
        LabError::Inconclusive(_) => DlStatus::Inconclusive,
        LabError::Schema { .. } | LabError::Json(_) => DlStatus::Schema,
        LabError::Io { .. } | LabError::Csv(_) => DlStatus::Io,
    }
}

/// Failure before or outside the core: a bad pointer or string.
struct Fail(DlStatus, String);

impl From<LabError> for Fail {
    fn from(e: LabError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(DlStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(DlStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(DlStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(DlStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(DlStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a profile document (the same JSON the scenario files embed).
/// Relative sample paths resolve against `base_dir`, which may be null.
///
/// # Safety
/// `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_from_json(json: *const c_char, base_dir: *const c_char, out: *mut *mut DlProfile) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let base = if base_dir.is_null() { None } else { Some(Path::new(str_arg(base_dir, "base_dir")?)) };
        let p = CoefficientProfile::from_json_str(text, base)?;
        *out = Box::into_raw(Box::new(DlProfile(p)));
        Ok(())
    })
}

/// One-dimensional power profile `c = (ρ²/(1+ρ²))^δ`, ρ the distance to the
/// nearest of `centers`, on `[lo, hi]`.
///
/// # Safety
/// `centers` must hold `n_centers` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_power_1d(
    delta: f64,
    centers: *const f64,
    n_centers: usize,
    lo: f64,
    hi: f64,
    out: *mut *mut DlProfile,
) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let centers = slice_arg(centers, n_centers, "centers")?;
        let p = CoefficientProfile::power_1d(delta, centers, [lo, hi])?;
        *out = Box::into_raw(Box::new(DlProfile(p)));
        Ok(())
    })
}

/// Serializes a profile; release the string with [`dl_string_free`].
///
/// # Safety
/// `profile` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_to_json(profile: *const DlProfile, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = ref_arg(profile, "profile")?.0.to_json_string()?;
        *out = CString::new(text).map_err(|e| Fail(DlStatus::InvalidUtf8, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `profile` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_free(profile: *mut DlProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Runs the integrability classifier with default quadrature.
///
/// # Safety
/// `profile` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_classify(profile: *const DlProfile, out: *mut DlVerdict) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ref_arg(profile, "profile")?.0.classify(&QuadratureConfig::default())?;
        *out = match c.verdict {
            Verdict::StronglyElliptic => DlVerdict::StronglyElliptic,
            Verdict::ClosableDegenerate => DlVerdict::ClosableDegenerate,
            Verdict::Separating => DlVerdict::Separating,
            Verdict::Inconclusive => DlVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// Intrinsic distance between `x` and `y` on a one-dimensional profile with
/// viscosity `epsilon`. Infinite across a separating zero.
///
/// # Safety
/// `profile` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_distance_1d(profile: *const DlProfile, x: f64, y: f64, epsilon: f64, out: *mut f64) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = distance_1d(&ref_arg(profile, "profile")?.0, x, y, epsilon)?;
        Ok(())
    })
}

/// Assembles the operator on the profile's own box with `n` cells per axis.
///
/// # Safety
/// `profile` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_operator_assemble(profile: *const DlProfile, n: usize, epsilon: f64, out: *mut *mut DlOperator) -> DlStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = &ref_arg(profile, "profile")?.0;
        let mesh = Mesh::new(p.dimension(), p.domain().to_vec(), n)?;
        *out = Box::into_raw(Box::new(DlOperator(assemble(p, &mesh, epsilon)?)));
        Ok(())
    })
}

/// Number of grid points, the length of every field on this operator.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_operator_size(op: *const DlOperator, out: *mut usize) -> DlStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(op, "op")?.0.size();
        Ok(())
    })
}

/// Coordinates of grid point `i`; writes `dimension` values into `coords`.
///
/// # Safety
/// `op` must be a live handle; `coords` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn dl_operator_point(op: *const DlOperator, i: usize, coords: *mut f64, capacity: usize) -> DlStatus {
    guard(|| {
        let mesh = ref_arg(op, "op")?.0.mesh();
        if i >= mesh.len() {
            return Err(Fail(DlStatus::Argument, format!("index {i} out of range for {} points", mesh.len())));
        }
        let d = mesh.dimension();
        if capacity < d || coords.is_null() {
            return Err(Fail(DlStatus::Argument, format!("coords needs room for {d} values")));
        }
        let p = mesh.point(i);
        std::slice::from_raw_parts_mut(coords, d).copy_from_slice(&p[..d]);
        Ok(())
    })
}

/// Row sums of the operator; zero up to round-off on a conservative grid.
///
/// # Safety
/// `op` must be a live handle; `out` must hold `len` values, `len` equal to
/// the operator size.
#[no_mangle]
pub unsafe extern "C" fn dl_operator_row_sums(op: *const DlOperator, out: *mut f64, len: usize) -> DlStatus {
    guard(|| {
        let a = &ref_arg(op, "op")?.0;
        check_len(len, a.size(), "out")?;
        let out = out_slice(out, len)?;
        out.copy_from_slice(&a.row_sums());
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dl_operator_free(op: *mut DlOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

fn check_len(len: usize, size: usize, name: &str) -> Result<(), Fail> {
    if len == size {
        Ok(())
    } else {
        Err(Fail(DlStatus::Argument, format!("{name} has length {len}, operator size {size}")))
    }
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail(DlStatus::NullPointer, "out is null".into()));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Writes `e^{-tA} phi` into `out` (Chebyshev backend). `phi` and `out` may
/// alias.
///
/// # Safety
/// `op` must be a live handle; `phi` and `out` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn dl_heat_evolve(op: *const DlOperator, phi: *const f64, t: f64, out: *mut f64, len: usize) -> DlStatus {
    guard(|| {
        let a = &ref_arg(op, "op")?.0;
        check_len(len, a.size(), "phi")?;
        let phi = slice_arg(phi, len, "phi")?.to_vec();
        let field = heat_evolve(a, &phi, t, HeatBackend::ChebyshevExp)?;
        out_slice(out, len)?.copy_from_slice(&field.values);
        Ok(())
    })
}

/// Runs a scenario file or builtin name, writes its artifacts to `out_dir`
/// (null for the scenario default), and stores the runner's exit code: 0
/// clean, 2 when a bound is violated. `threads` of 0 uses all cores.
///
/// # Safety
/// `source` and a non-null `out_dir` must be NUL-terminated strings;
/// `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dl_run_scenario(source: *const c_char, out_dir: *const c_char, threads: usize, exit_code: *mut i32) -> DlStatus {
    guard(|| {
        let exit_code = out_arg(exit_code, "exit_code")?;
        let source = str_arg(source, "source")?;
        let out = if out_dir.is_null() { None } else { Some(Path::new(str_arg(out_dir, "out_dir")?)) };
        let threads = (threads > 0).then_some(threads);
        *exit_code = degenlab::cli::run(source, out, threads, &[])?;
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
