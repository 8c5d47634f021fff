//! C ABI over the simulator. Handles are opaque; every call returns an
//! [`HsStatus`] and leaves a message for [`hs_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hydrosim::mission::Mode;
use hydrosim::power::endurance;
use hydrosim::sim::{metrics_from_log, OperatorCommand, Scenario, SimError, Simulation, Termination};
use hydrosim::telemetry::{decode_frame, encode_frame, Delivery, Message};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigInvalid = 3,
    MapLoadFailed = 4,
    LogCorrupt = 5,
    BadCommand = 6,
    BadFrame = 7,
    BufferTooSmall = 8,
    Finished = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsTermination {
    Running = 0,
    MissionSuccess = 1,
    MissionFailure = 2,
    Depleted = 3,
    MaxDuration = 4,
}

impl From<Option<Termination>> for HsTermination {
    fn from(t: Option<Termination>) -> Self {
        match t {
            None => HsTermination::Running,
            Some(Termination::MissionSuccess) => HsTermination::MissionSuccess,
            Some(Termination::MissionFailure) => HsTermination::MissionFailure,
            Some(Termination::Depleted) => HsTermination::Depleted,
            Some(Termination::MaxDuration) => HsTermination::MaxDuration,
        }
    }
}

/// Vehicle state after the latest tick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HsSnapshot {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_theta: f64,
    pub soc_wh: f64,
    pub station_distance: f64,
    /// 0 auto, 1 manual, 2 e-stopped
    pub mode: u8,
    pub mission_state: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HsDelivery {
    pub delivered: bool,
    /// Seconds; zero when dropped.
    pub latency: f64,
}

/// Opaque simulation handle.
pub struct HsSim {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let s = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: HsStatus, msg: impl ToString) -> HsStatus {
    set_error(msg.to_string());
    status
}

fn sim_status(e: SimError) -> HsStatus {
    let s = match &e {
        SimError::ConfigInvalid(_) => HsStatus::ConfigInvalid,
        SimError::MapLoadFailed(_) => HsStatus::MapLoadFailed,
        SimError::LogCorrupt(_) => HsStatus::LogCorrupt,
    };
    fail(s, e)
}

fn guard(f: impl FnOnce() -> HsStatus) -> HsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(HsStatus::Panic, "panic inside hydrosim"))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, HsStatus> {
    if p.is_null() {
        return Err(fail(HsStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(HsStatus::InvalidUtf8, e))
}

fn into_c_string(s: String, out: *mut *mut c_char) -> HsStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            HsStatus::Ok
        }
        Err(e) => fail(HsStatus::InvalidUtf8, e),
    }
}

fn snapshot(sim: &Simulation) -> HsSnapshot {
    let s = sim.snapshot();
    HsSnapshot {
        t: s.t,
        x: s.truth.x,
        y: s.truth.y,
        theta: s.truth.theta,
        est_x: s.est.x,
        est_y: s.est.y,
        est_theta: s.est.theta,
        soc_wh: s.soc_wh,
        station_distance: s.station_distance,
        mode: match s.mode {
            Mode::Auto => 0,
            Mode::Manual => 1,
            Mode::EStopped => 2,
        },
        mission_state: s.mission_state,
    }
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a simulation from scenario JSON. Relative paths inside the
/// scenario resolve against `base_dir`, which may be null for the current
/// directory.
///
/// # Safety
/// `json` and `base_dir` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_new(json: *const c_char, base_dir: *const c_char, out: *mut *mut HsSim) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return fail(HsStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let base = if base_dir.is_null() {
            Path::new(".")
        } else {
            match str_arg(base_dir) {
                Ok(b) => Path::new(b),
                Err(s) => return s,
            }
        };
        let built = Scenario::from_json(text).and_then(|sc| sc.resolve(base)).and_then(Simulation::new);
        match built {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(HsSim { sim }));
                HsStatus::Ok
            }
            Err(e) => sim_status(e),
        }
    })
}

/// # Safety
/// `sim` must come from [`hs_sim_new`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_free(sim: *mut HsSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances up to `ticks` ticks. Returns `Finished` once the run has ended,
/// with `*termination` set either way.
///
/// # Safety
/// `sim` must be a live handle; `snap` and `termination` may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_step(
    sim: *mut HsSim,
    ticks: u32,
    snap: *mut HsSnapshot,
    termination: *mut HsTermination,
) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else { return fail(HsStatus::NullPointer, "sim is null") };
        for _ in 0..ticks {
            if h.sim.step().finished.is_some() {
                break;
            }
        }
        if !snap.is_null() {
            *snap = snapshot(&h.sim);
        }
        let fin = h.sim.finished();
        if !termination.is_null() {
            *termination = fin.into();
        }
        if fin.is_some() {
            HsStatus::Finished
        } else {
            HsStatus::Ok
        }
    })
}

/// Runs to termination.
///
/// # Safety
/// `sim` must be a live handle; `snap` and `termination` may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_run(sim: *mut HsSim, snap: *mut HsSnapshot, termination: *mut HsTermination) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else { return fail(HsStatus::NullPointer, "sim is null") };
        let t = h.sim.run_to_end();
        if !snap.is_null() {
            *snap = snapshot(&h.sim);
        }
        if !termination.is_null() {
            *termination = Some(t).into();
        }
        HsStatus::Ok
    })
}

/// Sends an operator command as JSON (`{"type":"estop","engage":true}`,
/// `{"type":"command",...}` or `{"type":"motor_command",...}`) over the
/// simulated uplink at the current station distance.
///
/// # Safety
/// `sim` must be a live handle, `json` NUL-terminated, `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_command(sim: *mut HsSim, json: *const c_char, out: *mut HsDelivery) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else { return fail(HsStatus::NullPointer, "sim is null") };
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if h.sim.finished().is_some() {
            return fail(HsStatus::Finished, "run has ended");
        }
        let cmd: OperatorCommand = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(HsStatus::BadCommand, e),
        };
        match h.sim.push_uplink(&cmd) {
            Ok(d) => {
                if !out.is_null() {
                    *out = match d {
                        Delivery::Delivered { latency } => HsDelivery { delivered: true, latency },
                        Delivery::Dropped => HsDelivery { delivered: false, latency: 0.0 },
                    };
                }
                HsStatus::Ok
            }
            Err(e) => fail(HsStatus::BadCommand, e),
        }
    })
}

/// Writes the 64 hex digits of the log hash so far plus a NUL into `buf`.
///
/// # Safety
/// `sim` must be a live handle and `buf` hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_log_hash(sim: *const HsSim, buf: *mut c_char, cap: usize) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else { return fail(HsStatus::NullPointer, "sim is null") };
        if buf.is_null() {
            return fail(HsStatus::NullPointer, "buf is null");
        }
        let hash = h.sim.log_snapshot().hash();
        if cap < hash.len() + 1 {
            return fail(HsStatus::BufferTooSmall, format!("need {} bytes", hash.len() + 1));
        }
        ptr::copy_nonoverlapping(hash.as_ptr(), buf.cast::<u8>(), hash.len());
        *buf.add(hash.len()) = 0;
        HsStatus::Ok
    })
}

/// Metrics for the log so far as JSON. Free with [`hs_string_free`].
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_metrics_json(sim: *const HsSim, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else { return fail(HsStatus::NullPointer, "sim is null") };
        if out.is_null() {
            return fail(HsStatus::NullPointer, "out is null");
        }
        let parsed = match h.sim.log_snapshot().parse() {
            Ok(p) => p,
            Err(e) => return sim_status(e),
        };
        into_c_string(serde_json::to_string(&metrics_from_log(&parsed)).expect("serializable"), out)
    })
}

/// The full JSONL log so far. Free with [`hs_string_free`].
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_sim_log(sim: *const HsSim, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else { return fail(HsStatus::NullPointer, "sim is null") };
        if out.is_null() {
            return fail(HsStatus::NullPointer, "out is null");
        }
        into_c_string(h.sim.log_snapshot().as_str().to_owned(), out)
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Frames a JSON message. `*written` receives the frame length, or the
/// required length when the buffer is too small.
///
/// # Safety
/// `json` NUL-terminated; `buf` holds `cap` bytes; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_frame_encode(
    json: *const c_char,
    seq: u16,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> HsStatus {
    guard(|| {
        if buf.is_null() || written.is_null() {
            return fail(HsStatus::NullPointer, "buf or written is null");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let msg: Message = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return fail(HsStatus::BadCommand, e),
        };
        let frame = match encode_frame(seq, &msg) {
            Ok(f) => f,
            Err(e) => return fail(HsStatus::BadFrame, e),
        };
        *written = frame.len();
        if frame.len() > cap {
            return fail(HsStatus::BufferTooSmall, format!("need {} bytes", frame.len()));
        }
        ptr::copy_nonoverlapping(frame.as_ptr(), buf, frame.len());
        HsStatus::Ok
    })
}

/// Decodes one frame into its sequence number and JSON message. Free the
/// string with [`hs_string_free`].
///
/// # Safety
/// `buf` holds `len` bytes; `seq` and `json_out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_frame_decode(buf: *const u8, len: usize, seq: *mut u16, json_out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        if buf.is_null() || seq.is_null() || json_out.is_null() {
            return fail(HsStatus::NullPointer, "null argument");
        }
        let bytes = std::slice::from_raw_parts(buf, len);
        match decode_frame(bytes) {
            Ok(f) => {
                *seq = f.seq;
                into_c_string(serde_json::to_string(&f.msg).expect("serializable"), json_out)
            }
            Err(e) => fail(HsStatus::BadFrame, e),
        }
    })
}

/// Minutes of operation from `energy_wh` at a constant `power_w`.
///
/// # Safety
/// `minutes` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_endurance_minutes(energy_wh: f64, power_w: f64, minutes: *mut f64) -> HsStatus {
    guard(|| {
        if minutes.is_null() {
            return fail(HsStatus::NullPointer, "minutes is null");
        }
        match endurance(energy_wh, power_w) {
            Ok(h) => {
                *minutes = h * 60.0;
                HsStatus::Ok
            }
            Err(e) => fail(HsStatus::ConfigInvalid, e),
        }
    })
}
