//! C ABI for the nsbox toolkit.
//!
//! Behaviors cross the boundary as opaque `NsBehavior` handles created by
//! the `ns_behavior_*` constructors and released with `ns_behavior_free`.
//! Every fallible call returns an [`NsStatus`]; on failure a description is
//! available from `ns_last_error_message` on the same thread. Strings
//! returned by the library must be released with `ns_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nsbox::criteria::{self, CriterionId, EvalOptions};
use nsbox::scan::{self, SliceSpec};
use nsbox::{named_box, Behavior, BoxParams, Error};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidBehavior = 3,
    Unsupported = 4,
    NoBoundary = 5,
    ParseError = 6,
    IoError = 7,
    Panic = 8,
}

/// Opaque behavior handle.
pub struct NsBehavior(Behavior);

/// Result of a criterion evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NsReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// 1 if violated, 0 otherwise.
    pub violated: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> NsStatus {
    match err {
        Error::Invalid(_) | Error::CatalogEntry { .. } => NsStatus::InvalidBehavior,
        Error::Unsupported { .. } | Error::EnumerationCap(_) => NsStatus::Unsupported,
        Error::NoBoundary { .. } => NsStatus::NoBoundary,
        Error::Parse(_) | Error::Csv(_) => NsStatus::ParseError,
        Error::Io(_) => NsStatus::IoError,
        _ => NsStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard<F>(f: F) -> NsStatus
where
    F: FnOnce() -> Result<(), (NsStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NsStatus::Panic
        }
    }
}

fn lib<T>(r: nsbox::Result<T>) -> Result<T, (NsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NsStatus, String) {
    (NsStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn behavior<'a>(b: *const NsBehavior) -> Result<&'a Behavior, (NsStatus, String)> {
    b.as_ref().map(|h| &h.0).ok_or_else(|| null("behavior"))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (NsStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (NsStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (NsStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed(b: Behavior) -> *mut NsBehavior {
    Box::into_raw(Box::new(NsBehavior(b)))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a named behavior: "pr", "box45", "white", "deterministic-zero"
/// or "isotropic" (which uses `bias`).
///
/// # Safety
/// `name` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_named(
    name: *const c_char,
    parties: usize,
    bias: f64,
    out: *mut *mut NsBehavior,
) -> NsStatus {
    guard(|| {
        let name = text(name, "name")?;
        let params = BoxParams {
            parties,
            bias: Some(bias),
        };
        let b = lib(named_box(name, params))?;
        write(out, boxed(b), "out")
    })
}

/// Convex combination of `count` behaviors.
///
/// # Safety
/// `weights` and `parts` must point to `count` elements each.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_mix(
    weights: *const f64,
    parts: *const *const NsBehavior,
    count: usize,
    out: *mut *mut NsBehavior,
) -> NsStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        if parts.is_null() {
            return Err(null("parts"));
        }
        let weights = std::slice::from_raw_parts(weights, count);
        let parts = std::slice::from_raw_parts(parts, count);
        let comps = weights
            .iter()
            .zip(parts)
            .map(|(&w, &p)| Ok((w, behavior(p)?)))
            .collect::<Result<Vec<_>, _>>()?;
        let b = lib(nsbox::mix(&comps))?;
        write(out, boxed(b), "out")
    })
}

/// Parses a behavior from `nsbox-v1` JSON and validates it.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_from_json(
    json: *const c_char,
    out: *mut *mut NsBehavior,
) -> NsStatus {
    guard(|| {
        let b = lib(nsbox::io::behavior_from_json(text(json, "json")?))?;
        write(out, boxed(b), "out")
    })
}

/// Serializes a behavior to `nsbox-v1` JSON. Free the result with
/// `ns_string_free`.
///
/// # Safety
/// `b` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_to_json(
    b: *const NsBehavior,
    out: *mut *mut c_char,
) -> NsStatus {
    guard(|| {
        let json = nsbox::io::behavior_to_json(behavior(b)?);
        let c = CString::new(json).map_err(|_| (NsStatus::InvalidArgument, "nul in JSON".to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `b` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_free(b: *mut NsBehavior) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Party count, or 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_parties(b: *const NsBehavior) -> usize {
    b.as_ref().map_or(0, |h| h.0.parties())
}

/// `p(a|x)` with party `k` on bit `k` of both masks.
///
/// # Safety
/// `b` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_probability(
    b: *const NsBehavior,
    input: u32,
    outcome: u32,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let b = behavior(b)?;
        if input >= b.settings() || outcome >= b.settings() {
            return Err((NsStatus::InvalidArgument, "mask out of range".into()));
        }
        write(out, b.prob(input, outcome), "out")
    })
}

/// Full correlator at input mask `input`.
///
/// # Safety
/// `b` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_correlator(
    b: *const NsBehavior,
    input: u32,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let b = behavior(b)?;
        if input >= b.settings() {
            return Err((NsStatus::InvalidArgument, "mask out of range".into()));
        }
        write(out, b.correlator(input), "out")
    })
}

/// Writes 1 to `valid` if the behavior satisfies every constraint, else 0
/// (the last error message then describes the violations).
///
/// # Safety
/// `b` must be a live handle and `valid` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_behavior_validate(b: *const NsBehavior, valid: *mut i32) -> NsStatus {
    guard(|| {
        let report = behavior(b)?.validate();
        if !report.is_valid() {
            set_error(report.to_string());
        }
        write(valid, i32::from(report.is_valid()), "valid")
    })
}

/// Evaluates a criterion by id, e.g. "ic-multi". `depth` is used by
/// "ic-success-bound" and `epsilon_channel` by "ic-noisy".
///
/// # Safety
/// `b` must be a live handle, `criterion` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_evaluate(
    b: *const NsBehavior,
    criterion: *const c_char,
    depth: usize,
    epsilon_channel: f64,
    out: *mut NsReport,
) -> NsStatus {
    guard(|| {
        let b = behavior(b)?;
        let id: CriterionId = lib(text(criterion, "criterion")?.parse())?;
        let opts = EvalOptions {
            depth,
            epsilon_channel,
        };
        let r = lib(criteria::evaluate(b, id, &opts))?;
        let report = NsReport {
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            violated: i32::from(r.violated),
        };
        write(out, report, "out")
    })
}

/// Biases `E_I` and `E_II` of the last party's two inputs.
///
/// # Safety
/// `b` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_biases(b: *const NsBehavior, e_one: *mut f64, e_two: *mut f64) -> NsStatus {
    guard(|| {
        let (e1, e2) = nsbox::protocol::biases(behavior(b)?);
        write(e_one, e1, "e_one")?;
        write(e_two, e2, "e_two")
    })
}

/// Exact success probability of the depth-`depth` concatenated protocol for
/// the receiver string `z` (`len` bytes, each 0 or 1).
///
/// # Safety
/// `b` must be a live handle, `z` must point to `len` bytes and `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_concat_success_simulated(
    b: *const NsBehavior,
    depth: usize,
    z: *const u8,
    len: usize,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let b = behavior(b)?;
        if z.is_null() && len > 0 {
            return Err(null("z"));
        }
        let z = if len == 0 { &[][..] } else { std::slice::from_raw_parts(z, len) };
        let p = lib(nsbox::protocol::concat_success_simulated(b, depth, z))?;
        write(out, p, "out")
    })
}

/// `½(1 + E_I^{K-r} E_II^r)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_concat_success_closed(
    e_one: f64,
    e_two: f64,
    depth: usize,
    ones: usize,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let p = lib(nsbox::protocol::concat_success_closed(e_one, e_two, depth, ones))?;
        write(out, p, "out")
    })
}

/// Critical `γ` of a criterion on the default slice at fixed
/// `epsilon_slice`. Returns `NS_STATUS_NO_BOUNDARY` if the ray has none.
///
/// # Safety
/// `criterion` must be a valid C string; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_boundary_default_slice(
    criterion: *const c_char,
    epsilon_slice: f64,
    epsilon_channel: f64,
    gamma_star: *mut f64,
    bracket_width: *mut f64,
) -> NsStatus {
    guard(|| {
        let id: CriterionId = lib(text(criterion, "criterion")?.parse())?;
        let mut spec = SliceSpec::default_slice();
        spec.criteria = vec![id];
        spec.options.epsilon_channel = epsilon_channel;
        let p = lib(scan::boundary(&spec, id, epsilon_slice))?;
        write(gamma_star, p.gamma_star, "gamma_star")?;
        write(bracket_width, p.bracket_width, "bracket_width")
    })
}

/// Binary entropy in bits.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_binary_entropy(p: f64, out: *mut f64) -> NsStatus {
    guard(|| {
        let h = lib(nsbox::binary_entropy(p))?;
        write(out, h, "out")
    })
}
