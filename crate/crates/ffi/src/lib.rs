//! C ABI for `fellkit`.
//!
//! Every function returns a [`FellkitStatus`]. Results are written through out
//! pointers. Models and embedding invariants are opaque handles owned by the
//! caller and released with their `_free` functions. Strings returned by the
//! library are released with [`fellkit_string_free`].
//!
//! On failure the thread's last error message is set and can be read with
//! [`fellkit_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fellkit::cli::{full_report, RunConfig};
use fellkit::embedding::{is_orientable, phi_from_covariance_group, read_off_pair, EmbeddingInvariant};
use fellkit::fellbundle::{build_imprimitivity_bundle, check_fell_axioms, is_saturated};
use fellkit::io::{preset, Model, PresetParams};
use fellkit::linalg::Tolerance;
use fellkit::random::seeded;
use fellkit::subalgebra::{classify_pair, PairClass};
use fellkit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FellkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    /// The input does not have the required structure (not unitary, not a
    /// twist, not orientable, ...).
    StructureError = 4,
    ContractViolation = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FellkitPairClass {
    Diagonal = 0,
    Cartan = 1,
    Neither = 2,
}

impl From<PairClass> for FellkitPairClass {
    fn from(c: PairClass) -> Self {
        match c {
            PairClass::Diagonal => Self::Diagonal,
            PairClass::Cartan => Self::Cartan,
            PairClass::Neither => Self::Neither,
        }
    }
}

/// A Fell bundle model, optionally with a covariance generator.
pub struct FellkitModel(Model);

/// An embedding invariant Φ.
pub struct FellkitPhi(EmbeddingInvariant);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FellkitStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Shape(_) | Error::NonFinite { .. } | Error::InvalidTolerance(_) | Error::InvalidDescriptor(_) => {
            FellkitStatus::InvalidArgument
        }
        Error::Parse(_) | Error::Json(_) | Error::Io(_) => FellkitStatus::ParseError,
        Error::ContractViolation(_) | Error::NotComposable { .. } | Error::EnumerationCap { .. } => {
            FellkitStatus::ContractViolation
        }
        _ => FellkitStatus::StructureError,
    }
}

struct Failure(FellkitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FellkitStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FellkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FellkitStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            FellkitStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into `*out` only when `out` is writable, so nothing leaks.
unsafe fn put_handle<T, H>(out: *mut *mut H, value: T, wrap: impl FnOnce(T) -> H) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(wrap(value))));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(owned_string(s)?);
    Ok(())
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(FellkitStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn model_ref<'a>(m: *const FellkitModel) -> Result<&'a Model, Failure> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn phi_ref<'a>(p: *const FellkitPhi) -> Result<&'a EmbeddingInvariant, Failure> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("phi"))
}

/// `eps <= 0` selects the default tolerance.
fn tolerance(eps: f64) -> Result<Tolerance, Failure> {
    if eps <= 0.0 {
        Ok(Tolerance::default())
    } else {
        Ok(Tolerance::new(eps)?)
    }
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(FellkitStatus::InvalidArgument, "string contains a nul byte".into()))
}

/// The library version as a static string. Do not free.
#[no_mangle]
pub extern "C" fn fellkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The last error message set on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn fellkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fellkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The imprimitivity bundle with fibre dimensions `dims[0..len]`.
///
/// # Safety
/// `dims` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_imprimitivity(
    dims: *const usize,
    len: usize,
    out: *mut *mut FellkitModel,
) -> FellkitStatus {
    guard(|| {
        if dims.is_null() {
            return Err(null("dims"));
        }
        let dims = std::slice::from_raw_parts(dims, len);
        let bundle = build_imprimitivity_bundle(dims)?;
        put_handle(out, Model { bundle, generator: None }, FellkitModel)
    })
}

/// A named preset. `n` and `dim` equal to 0 select the preset's defaults.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_preset(
    name: *const c_char,
    n: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut FellkitModel,
) -> FellkitStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let params = PresetParams { n: (n > 0).then_some(n), dims: None, dim: (dim > 0).then_some(dim), seed };
        let model = preset(name, &params)?;
        put_handle(out, model, FellkitModel)
    })
}

/// Parses a model file.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_from_json(
    json: *const c_char,
    eps: f64,
    out: *mut *mut FellkitModel,
) -> FellkitStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let model = Model::from_json(text, tolerance(eps)?)?;
        put_handle(out, model, FellkitModel)
    })
}

/// Serializes a model. Free the result with `fellkit_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_to_json(model: *const FellkitModel, out: *mut *mut c_char) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        put_string(out, m.to_json(), "out")
    })
}

/// # Safety
/// `model` must be NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_free(model: *mut FellkitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of points and total matrix size `Σ n_x`.
///
/// # Safety
/// `model` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_model_shape(
    model: *const FellkitModel,
    out_points: *mut usize,
    out_ambient_dim: *mut usize,
) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(out_points, m.bundle.points(), "out_points")?;
        write(out_ambient_dim, m.bundle.fibre_dims().iter().sum(), "out_ambient_dim")
    })
}

/// Samples the Fell bundle axioms.
///
/// # Safety
/// `model` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_check_axioms(
    model: *const FellkitModel,
    samples: usize,
    seed: u64,
    eps: f64,
    out_passed: *mut bool,
    out_max_residual: *mut f64,
) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        let r = check_fell_axioms(&m.bundle, samples, tolerance(eps)?, &mut seeded(seed))?;
        write(out_passed, r.all_passed(), "out_passed")?;
        write(out_max_residual, r.max_residual(), "out_max_residual")
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_is_saturated(model: *const FellkitModel, eps: f64, out: *mut bool) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(out, is_saturated(&m.bundle, tolerance(eps)?)?, "out")
    })
}

/// Dimension of the kernel of the restriction expectation.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_kernel_dimension(model: *const FellkitModel, out: *mut usize) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(out, m.bundle.restriction_expectation().kernel_basis().len(), "out")
    })
}

/// Runs every applicable check and writes the combined JSON report.
///
/// # Safety
/// `model` must be a live handle; out pointers must be writable. Free
/// `*out_json` with `fellkit_string_free`.
#[no_mangle]
pub unsafe extern "C" fn fellkit_report_json(
    model: *const FellkitModel,
    samples: usize,
    seed: u64,
    eps: f64,
    out_json: *mut *mut c_char,
    out_passed: *mut bool,
) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        if samples == 0 {
            return Err(Failure(FellkitStatus::InvalidArgument, "samples must be positive".into()));
        }
        let cfg = RunConfig { tol: tolerance(eps)?, seed, samples };
        let reports = full_report(m, cfg);
        let pass = reports.iter().all(|r| r.pass);
        let body = serde_json::to_string_pretty(&serde_json::json!({ "pass": pass, "reports": reports }))
            .map_err(Error::from)?;
        if out_passed.is_null() || out_json.is_null() {
            return Err(null("out"));
        }
        put_string(out_json, body, "out_json")?;
        write(out_passed, pass, "out_passed")
    })
}

/// Φ built from the model's covariance generator.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_from_model(
    model: *const FellkitModel,
    out: *mut *mut FellkitPhi,
) -> FellkitStatus {
    guard(|| {
        let m = model_ref(model)?;
        let gs = m
            .generator
            .as_ref()
            .ok_or_else(|| Failure(FellkitStatus::ContractViolation, "model has no generator".into()))?;
        let phi = phi_from_covariance_group(gs)?;
        put_handle(out, phi, FellkitPhi)
    })
}

/// # Safety
/// `phi` must be NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_free(phi: *mut FellkitPhi) {
    if !phi.is_null() {
        drop(Box::from_raw(phi));
    }
}

/// Side length of the square matrix Φ.
///
/// # Safety
/// `phi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_dim(phi: *const FellkitPhi, out: *mut usize) -> FellkitStatus {
    guard(|| write(out, phi_ref(phi)?.matrix().rows(), "out"))
}

/// Copies Φ row-major as interleaved `(re, im)` pairs. `len` is the number
/// of doubles available at `out` and must be at least `2·dim²`.
///
/// # Safety
/// `phi` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_copy_matrix(phi: *const FellkitPhi, out: *mut f64, len: usize) -> FellkitStatus {
    guard(|| {
        let m = phi_ref(phi)?.matrix();
        if out.is_null() {
            return Err(null("out"));
        }
        let data = m.as_slice();
        if len < 2 * data.len() {
            return Err(Failure(
                FellkitStatus::InvalidArgument,
                format!("buffer holds {len} doubles, need {}", 2 * data.len()),
            ));
        }
        let buf = std::slice::from_raw_parts_mut(out, 2 * data.len());
        for (k, z) in data.iter().enumerate() {
            buf[2 * k] = z.re;
            buf[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `phi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_is_orientable(phi: *const FellkitPhi, eps: f64, out: *mut bool) -> FellkitStatus {
    guard(|| {
        let p = phi_ref(phi)?;
        write(out, is_orientable(p, tolerance(eps)?), "out")
    })
}

/// Reads the pair off an orientable Φ and classifies it.
///
/// # Safety
/// `phi` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fellkit_phi_readoff_class(
    phi: *const FellkitPhi,
    eps: f64,
    out: *mut FellkitPairClass,
) -> FellkitStatus {
    guard(|| {
        let tol = tolerance(eps)?;
        let r = read_off_pair(phi_ref(phi)?, tol)?;
        let c = classify_pair(&r.pair(), &r.slice_sample(), tol)?;
        write(out, c.class.into(), "out")
    })
}
