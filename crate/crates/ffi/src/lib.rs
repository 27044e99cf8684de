//! C ABI over the `ultrainject` library.
//!
//! Every fallible call returns a [`UiStatus`]; on failure a description is
//! kept per thread and can be read with [`ui_last_error`]. Waveforms cross
//! the boundary as opaque [`UiWaveform`] handles, structured data as JSON
//! strings that the caller releases with [`ui_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ultrainject::attack::{delivery_probability, repeated_success_probability, AttackConfig, DeviceProfile};
use ultrainject::feedback::{feedback_round, parse_scan_log, FeedbackParams, Link, RecordingSink, ReplaySource};
use ultrainject::signals::{correlation, modulate, recover_baseband, NonlinearCoeffs, Waveform};
use ultrainject::sim::{simulate, EnvironmentScript};
use ultrainject::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UiStatus {
    Ok = 0,
    /// Bad argument, malformed input or violated precondition.
    InvalidArgument = 1,
    /// A required pointer was null.
    NullPointer = 2,
    /// I/O or other runtime failure.
    Runtime = 3,
    /// The library panicked; the message holds the payload.
    Panic = 4,
}

/// Opaque owned waveform.
pub struct UiWaveform(Waveform);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: UiStatus, msg: impl Into<String>) -> UiStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> UiStatus {
    let status = if e.is_validation() {
        UiStatus::InvalidArgument
    } else {
        UiStatus::Runtime
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), UiStatus>) -> UiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UiStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(UiStatus::Panic, msg)
        }
    }
}

fn check<T>(r: ultrainject::Result<T>) -> Result<T, UiStatus> {
    r.map_err(from_error)
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), UiStatus> {
    if p.is_null() {
        Err(fail(UiStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, UiStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(UiStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn json_out(text: String, out: *mut *mut c_char) -> Result<(), UiStatus> {
    let c = CString::new(text).map_err(|_| fail(UiStatus::Runtime, "output contains NUL"))?;
    // SAFETY: callers check `out` for null before producing output.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn wave_out(w: Waveform, out: *mut *mut UiWaveform) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(UiWaveform(w))) };
}

/// Last error message on this thread, or null. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ui_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ui_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or come from a `ui_*_json` call and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ui_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Copies `len` samples into a new waveform.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ui_waveform_new(
    sample_rate_hz: u32,
    samples: *const f64,
    len: usize,
    out: *mut *mut UiWaveform,
) -> UiStatus {
    guard(|| {
        non_null(out, "out")?;
        if len > 0 {
            non_null(samples, "samples")?;
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        wave_out(check(Waveform::new(sample_rate_hz, data))?, out);
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ui_waveform_free(w: *mut UiWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of samples; 0 for null.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ui_waveform_len(w: *const UiWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Sample rate in Hz; 0 for null.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ui_waveform_sample_rate(w: *const UiWaveform) -> u32 {
    w.as_ref().map_or(0, |w| w.0.sample_rate_hz())
}

/// Copies up to `cap` samples into `buf` and stores the total sample count
/// in `total` (which may exceed `cap`).
///
/// # Safety
/// `w` must be a live handle, `buf` writable for `cap` doubles (may be null
/// when `cap` is 0) and `total` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_waveform_copy(
    w: *const UiWaveform,
    buf: *mut f64,
    cap: usize,
    total: *mut usize,
) -> UiStatus {
    guard(|| {
        non_null(w, "w")?;
        non_null(total, "total")?;
        let s = (*w).0.samples();
        let n = s.len().min(cap);
        if n > 0 {
            non_null(buf, "buf")?;
            ptr::copy_nonoverlapping(s.as_ptr(), buf, n);
        }
        *total = s.len();
        Ok(())
    })
}

/// AM modulation of `baseband` onto `carrier_hz` with index `depth`.
///
/// # Safety
/// `baseband` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_modulate(
    baseband: *const UiWaveform,
    carrier_hz: f64,
    depth: f64,
    out: *mut *mut UiWaveform,
) -> UiStatus {
    guard(|| {
        non_null(baseband, "baseband")?;
        non_null(out, "out")?;
        wave_out(check(modulate(&(*baseband).0, carrier_hz, depth))?, out);
        Ok(())
    })
}

/// Microphone nonlinearity `a1·x + a2·x²`, low-pass at `cutoff_hz` and mean
/// removal. The recovered audio covers input samples from `*start_index`.
///
/// # Safety
/// `passband` must be a live handle; `out` and `start_index` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_recover_baseband(
    passband: *const UiWaveform,
    a1: f64,
    a2: f64,
    cutoff_hz: f64,
    out: *mut *mut UiWaveform,
    start_index: *mut usize,
) -> UiStatus {
    guard(|| {
        non_null(passband, "passband")?;
        non_null(out, "out")?;
        non_null(start_index, "start_index")?;
        let rec = check(recover_baseband(&(*passband).0, NonlinearCoeffs { a1, a2 }, cutoff_hz))?;
        *start_index = rec.start_index;
        wave_out(rec.waveform, out);
        Ok(())
    })
}

/// Pearson correlation of two arrays of `len` doubles.
///
/// # Safety
/// `a` and `b` must each hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_correlation(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> UiStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        if len < 2 {
            return Err(fail(UiStatus::InvalidArgument, "need at least two samples"));
        }
        *out = correlation(std::slice::from_raw_parts(a, len), std::slice::from_raw_parts(b, len));
        Ok(())
    })
}

/// Single-play success probability for a shipped device profile.
///
/// # Safety
/// `profile` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_delivery_probability(
    distance_m: f64,
    angle_offset_deg: f64,
    noise_db: f64,
    profile: *const c_char,
    out: *mut f64,
) -> UiStatus {
    guard(|| {
        non_null(profile, "profile")?;
        non_null(out, "out")?;
        let name = opt_str(profile, "profile")?.unwrap_or_default();
        let p = check(DeviceProfile::builtin(name))?;
        *out = check(delivery_probability(distance_m, angle_offset_deg, noise_db, &p))?;
        Ok(())
    })
}

/// `1 − (1 − p)^n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ui_repeated_success(p_single: f64, n: u32, out: *mut f64) -> UiStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = check(repeated_success_probability(p_single, n))?;
        Ok(())
    })
}

/// Runs the attack loop in a scripted environment. `config_json` may be
/// null for defaults. The report is written to `*report_json`.
///
/// # Safety
/// Strings must be null or NUL-terminated; `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_simulate_json(
    env_json: *const c_char,
    config_json: *const c_char,
    report_json: *mut *mut c_char,
) -> UiStatus {
    guard(|| {
        non_null(env_json, "env_json")?;
        non_null(report_json, "report_json")?;
        let env = check(EnvironmentScript::from_json(
            opt_str(env_json, "env_json")?.unwrap_or_default(),
        ))?;
        let config: AttackConfig = match opt_str(config_json, "config_json")? {
            Some(t) => check(serde_json::from_str(t).map_err(Error::from))?,
            None => AttackConfig::default(),
        };
        let run = check(simulate(&env, &config))?;
        json_out(check(run.report.to_json())?, report_json)
    })
}

/// One feedback round over a JSON-lines scan log. `params_json` may be null
/// for defaults. The outcome is written to `*outcome_json`.
///
/// # Safety
/// Strings must be null or NUL-terminated; `outcome_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ui_feedback_replay_json(
    scan_log: *const c_char,
    params_json: *const c_char,
    outcome_json: *mut *mut c_char,
) -> UiStatus {
    guard(|| {
        non_null(scan_log, "scan_log")?;
        non_null(outcome_json, "outcome_json")?;
        let text = opt_str(scan_log, "scan_log")?.unwrap_or_default();
        let params: FeedbackParams = match opt_str(params_json, "params_json")? {
            Some(t) => check(serde_json::from_str(t).map_err(Error::from))?,
            None => FeedbackParams::default(),
        };
        let snaps = check(parse_scan_log(text.as_bytes()))?;
        let mut source = ReplaySource::new(snaps);
        let mut sink = RecordingSink::default();
        let outcome = check(feedback_round(
            &mut Link {
                source: &mut source,
                sink: &mut sink,
            },
            &params,
        ))?;
        json_out(check(outcome.to_json())?, outcome_json)
    })
}
