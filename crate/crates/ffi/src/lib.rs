//! C ABI for `scorecusum`.
//!
//! Conventions:
//! * every fallible call returns a [`ScStatus`]; results go through out-pointers;
//! * on failure, [`sc_last_error_message`] returns a description of the most
//!   recent error on the calling thread;
//! * handles ([`ScField`], [`ScDetector`]) are opaque, created by `*_new` or
//!   `*_load` functions and released with the matching `*_free`;
//! * strings returned by the library are released with [`sc_string_free`].
//!
//! Panics never cross the boundary; they surface as [`ScStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use scorecusum::bounds::{self, BoundInputs, DoeblinConstants};
use scorecusum::detect::{detector_update, DetectorConfig, DetectorState, TruncationSpec};
use scorecusum::score::{hyvarinen_score, score_differences, ScoreField, StateVector, TransitionPair};
use scorecusum::scorenet::load_model;
use scorecusum::simulate::{closed_form_score, simulate_path, ChangePoint, GaussianKernelSpec, TrajectoryConfig};
use scorecusum::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Parse = 3,
    Numeric = 4,
    Io = 5,
    Panic = 6,
}

/// Transition kernel `N((1−α)x + shift·tanh(x), σ² I)` on `ℝ^dim`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScKernelSpec {
    pub dim: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub shift: f64,
}

impl From<ScKernelSpec> for GaussianKernelSpec {
    fn from(k: ScKernelSpec) -> Self {
        GaussianKernelSpec {
            dim: k.dim,
            alpha: k.alpha,
            sigma: k.sigma,
            shift: k.shift,
        }
    }
}

/// A conditional score field: closed-form Gaussian or a trained network.
pub struct ScField(Box<dyn ScoreField>);

/// Streaming CUSUM detector.
pub struct ScDetector {
    config: DetectorConfig,
    state: DetectorState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            ScStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            match e.class() {
                ErrorClass::Usage => ScStatus::Usage,
                ErrorClass::Parse => ScStatus::Parse,
                ErrorClass::Numeric => ScStatus::Numeric,
                ErrorClass::Io => ScStatus::Io,
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ScStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or null if there was none.
/// Release with [`sc_string_free`].
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        Some(msg) => CString::new(msg.replace('\0', " ")).expect("nul removed").into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-form score field of a Gaussian kernel.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sc_field_gaussian(spec: ScKernelSpec, out: *mut *mut ScField) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = GaussianKernelSpec::from(spec);
        spec.validate()?;
        *out = Box::into_raw(Box::new(ScField(Box::new(closed_form_score(&spec)))));
        Ok(())
    })
}

/// Loads a trained model file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_field_load_model(path: *const c_char, out: *mut *mut ScField) -> ScStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::Usage("model path is not valid UTF-8".into()))?;
        let model = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(ScField(Box::new(model))));
        Ok(())
    })
}

/// State dimension of a field, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_field_dim(field: *const ScField) -> usize {
    field.as_ref().map_or(0, |f| f.0.dim())
}

/// # Safety
/// `field` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_field_free(field: *mut ScField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Hyvärinen score of one transition `prev → next`, both of length `dim`.
///
/// # Safety
/// `field` must be a live handle; `prev` and `next` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn sc_hyvarinen_score(
    field: *const ScField,
    prev: *const f64,
    next: *const f64,
    dim: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let field = field.as_ref().ok_or(Failure::Null("field"))?;
        non_null(out, "out")?;
        let pair = TransitionPair::from_slices(slice(prev, dim, "prev")?, slice(next, dim, "next")?)?;
        *out = hyvarinen_score(&field.0, &pair)?;
        Ok(())
    })
}

/// Score differences `S_H(p) − S_H(q)` along a path of `n_states` row-major
/// states; writes `n_states − 1` values to `out` (nothing when `n_states < 2`).
///
/// # Safety
/// `states` must hold `n_states · dim` values and `out` room for `n_states − 1`.
#[no_mangle]
pub unsafe extern "C" fn sc_score_differences(
    p: *const ScField,
    q: *const ScField,
    states: *const f64,
    n_states: usize,
    dim: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let p = p.as_ref().ok_or(Failure::Null("p"))?;
        let q = q.as_ref().ok_or(Failure::Null("q"))?;
        if n_states < 2 {
            return Ok(());
        }
        if dim == 0 {
            return Err(Error::Usage("dim must be >= 1".into()).into());
        }
        let total = n_states
            .checked_mul(dim)
            .ok_or_else(|| Error::Usage("n_states · dim overflows".into()))?;
        let values = slice(states, total, "states")?;
        non_null(out, "out")?;
        let rows = values
            .chunks_exact(dim)
            .map(|r| StateVector::new(r.to_vec()))
            .collect::<scorecusum::Result<Vec<_>>>()?;
        let pairs = scorecusum::score::pairs_from_path(&rows);
        let diffs = score_differences(&p.0, &q.0, &pairs)?;
        std::slice::from_raw_parts_mut(out, diffs.len()).copy_from_slice(&diffs);
        Ok(())
    })
}

/// New detector with threshold `b`. Increments are clipped to `[−M, M]` when
/// `truncate` is true.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_new(threshold: f64, truncate: bool, level: f64, out: *mut *mut ScDetector) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        let truncation = if truncate {
            TruncationSpec::level(level)?
        } else {
            TruncationSpec::None
        };
        let config = DetectorConfig::new(threshold, truncation)?;
        *out = Box::into_raw(Box::new(ScDetector {
            config,
            state: DetectorState::default(),
        }));
        Ok(())
    })
}

/// Feeds one increment. `alarmed` (optional) receives whether `W ≥ b` now.
/// The detector keeps accumulating after an alarm until reset.
///
/// # Safety
/// `detector` must be a live handle; `alarmed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_update(detector: *mut ScDetector, increment: f64, alarmed: *mut bool) -> ScStatus {
    guard(|| {
        let det = detector.as_mut().ok_or(Failure::Null("detector"))?;
        det.state = detector_update(&det.state, increment, &det.config)?;
        if let Some(a) = alarmed.as_mut() {
            *a = det.state.alarmed;
        }
        Ok(())
    })
}

/// Current statistic `W_n` (NaN for a null handle).
///
/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_statistic(detector: *const ScDetector) -> f64 {
    detector.as_ref().map_or(f64::NAN, |d| d.state.statistic)
}

/// Increments consumed since creation or the last reset.
///
/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_time(detector: *const ScDetector) -> u64 {
    detector.as_ref().map_or(0, |d| d.state.time as u64)
}

/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_reset(detector: *mut ScDetector) {
    if let Some(d) = detector.as_mut() {
        d.state.reset();
    }
}

/// # Safety
/// `detector` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_detector_free(detector: *mut ScDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// `factor · M`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_heuristic_mu(truncation_level: f64, factor: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = bounds::heuristic_mu(truncation_level, factor)?;
        Ok(())
    })
}

/// `2(l+1)‖φ‖/λ`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_concentration_mu(norm_phi: f64, l: u32, lambda: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = bounds::concentration_mu(norm_phi, &DoeblinConstants::new(l, lambda)?)?;
        Ok(())
    })
}

/// Lower bound on the mean time to false alarm; requires `b > mu`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_false_alarm_lower_bound(delta: f64, mu: f64, b: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = bounds::false_alarm_lower_bound(&BoundInputs {
            delta,
            mu,
            b,
            i: 1.0,
            m: None,
        })?;
        Ok(())
    })
}

/// `n0 = ⌊(b+μ)/I⌋` and the leading-order delay bound `1 + n0`.
///
/// # Safety
/// `n0` and `bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_delay_upper_bound(b: f64, mu: f64, post_drift: f64, n0: *mut u64, bound: *mut f64) -> ScStatus {
    guard(|| {
        non_null(n0, "n0")?;
        non_null(bound, "bound")?;
        let d = bounds::delay_upper_bound(&BoundInputs {
            delta: 1.0,
            mu,
            b,
            i: post_drift,
            m: None,
        })?;
        *n0 = d.n0;
        *bound = d.asymptotic_bound;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_hoeffding_tail(n: u64, eps: f64, mu_f: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = bounds::hoeffding_tail(n, eps, mu_f)?;
        Ok(())
    })
}

/// Simulates `length` states (row-major into `out`, which holds `out_len`
/// values). `post` may be null when `change_point` is 0, meaning no change;
/// otherwise states with index `≥ change_point` follow the post kernel.
///
/// # Safety
/// `pre` must be valid; `post` null or valid; `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn sc_simulate_path(
    pre: *const ScKernelSpec,
    post: *const ScKernelSpec,
    change_point: u64,
    length: usize,
    burn_in: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> ScStatus {
    guard(|| {
        let pre = GaussianKernelSpec::from(*pre.as_ref().ok_or(Failure::Null("pre"))?);
        let post = post.as_ref().map(|k| GaussianKernelSpec::from(*k));
        let config = TrajectoryConfig {
            pre,
            post,
            change_point: if change_point == 0 {
                ChangePoint::Never
            } else {
                ChangePoint::At(change_point as usize)
            },
            length,
            seed,
            burn_in,
        };
        let needed = length
            .checked_mul(pre.dim)
            .ok_or_else(|| Error::Usage("length · dim overflows".into()))?;
        if out_len < needed {
            return Err(Error::Usage(format!("output buffer holds {out_len} values, need {needed}")).into());
        }
        let path = simulate_path(&config)?;
        if needed > 0 {
            non_null(out, "out")?;
            let buf = std::slice::from_raw_parts_mut(out, needed);
            for (row, state) in buf.chunks_exact_mut(pre.dim).zip(&path) {
                row.copy_from_slice(state.as_slice());
            }
        }
        Ok(())
    })
}
