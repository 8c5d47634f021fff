use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hydrosim_ffi::*;

const SCENARIO: &str = r#"{"name":"ffi","seed":3,"max_duration":120,"sensors":{"lidar_rate":0},
    "mission":{"waypoints":[{"x":6,"y":0,"module":"A","motor":1,"hold_s":0}]}}"#;

fn new_sim(json: &str) -> (HsStatus, *mut HsSim) {
    let c = CString::new(json).unwrap();
    let mut sim = ptr::null_mut();
    let st = unsafe { hs_sim_new(c.as_ptr(), ptr::null(), &mut sim) };
    (st, sim)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hs_last_error()) }.to_str().unwrap().to_owned()
}

fn hash(sim: *const HsSim) -> String {
    let mut buf = [0 as std::ffi::c_char; 65];
    assert_eq!(unsafe { hs_sim_log_hash(sim, buf.as_mut_ptr(), buf.len()) }, HsStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

#[test]
fn run_to_success_and_hash_is_deterministic() {
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let (st, sim) = new_sim(SCENARIO);
        assert_eq!(st, HsStatus::Ok);
        let mut snap = HsSnapshot::default();
        let mut term = HsTermination::Running;
        assert_eq!(unsafe { hs_sim_run(sim, &mut snap, &mut term) }, HsStatus::Ok);
        assert_eq!(term, HsTermination::MissionSuccess);
        assert!((snap.x - 6.0).abs() < 0.2, "{snap:?}");
        hashes.push(hash(sim));
        unsafe { hs_sim_free(sim) };
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn step_reports_finished() {
    let (_, sim) = new_sim(SCENARIO);
    let mut term = HsTermination::Running;
    assert_eq!(unsafe { hs_sim_step(sim, 10, ptr::null_mut(), &mut term) }, HsStatus::Ok);
    assert_eq!(term, HsTermination::Running);
    let mut st = HsStatus::Ok;
    for _ in 0..1000 {
        st = unsafe { hs_sim_step(sim, 100, ptr::null_mut(), &mut term) };
        if st == HsStatus::Finished {
            break;
        }
    }
    assert_eq!(st, HsStatus::Finished);
    assert_eq!(term, HsTermination::MissionSuccess);
    let c = CString::new(r#"{"type":"estop","engage":true}"#).unwrap();
    assert_eq!(unsafe { hs_sim_command(sim, c.as_ptr(), ptr::null_mut()) }, HsStatus::Finished);
    unsafe { hs_sim_free(sim) };
}

#[test]
fn errors_carry_messages() {
    let (st, sim) = new_sim(r#"{"dt": -1}"#);
    assert_eq!(st, HsStatus::ConfigInvalid);
    assert!(sim.is_null());
    assert!(!last_error().is_empty());

    let (st, _) = new_sim("{not json");
    assert_eq!(st, HsStatus::ConfigInvalid);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hs_sim_new(ptr::null(), ptr::null(), &mut out) }, HsStatus::NullPointer);
    assert_eq!(unsafe { hs_sim_step(ptr::null_mut(), 1, ptr::null_mut(), ptr::null_mut()) }, HsStatus::NullPointer);

    let (_, sim) = new_sim(SCENARIO);
    let bad = CString::new(r#"{"type":"warp"}"#).unwrap();
    assert_eq!(unsafe { hs_sim_command(sim, bad.as_ptr(), ptr::null_mut()) }, HsStatus::BadCommand);
    let mut small = [0 as std::ffi::c_char; 10];
    assert_eq!(unsafe { hs_sim_log_hash(sim, small.as_mut_ptr(), small.len()) }, HsStatus::BufferTooSmall);
    unsafe { hs_sim_free(sim) };
    unsafe { hs_sim_free(ptr::null_mut()) };
}

#[test]
fn commands_go_through_the_link() {
    let (_, sim) = new_sim(SCENARIO);
    let c = CString::new(r#"{"type":"estop","engage":true}"#).unwrap();
    let mut d = HsDelivery::default();
    assert_eq!(unsafe { hs_sim_command(sim, c.as_ptr(), &mut d) }, HsStatus::Ok);
    assert!(d.delivered);
    let mut snap = HsSnapshot::default();
    unsafe { hs_sim_step(sim, 50, &mut snap, ptr::null_mut()) };
    assert_eq!(snap.mode, 2);
    unsafe { hs_sim_free(sim) };
}

#[test]
fn metrics_and_log_strings() {
    let (_, sim) = new_sim(SCENARIO);
    unsafe { hs_sim_run(sim, ptr::null_mut(), ptr::null_mut()) };
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hs_sim_metrics_json(sim, &mut s) }, HsStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    assert_eq!(v["termination"], "mission_success");
    unsafe { hs_string_free(s) };
    assert_eq!(unsafe { hs_sim_log(sim, &mut s) }, HsStatus::Ok);
    let log = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { hs_string_free(s) };
    assert!(log.lines().last().unwrap().contains("\"footer\""));
    unsafe { hs_sim_free(sim) };
}

#[test]
fn frame_roundtrip_and_corruption() {
    let msg = CString::new(r#"{"type":"command","mode":"manual","v_x":0.5,"w_z":-0.25}"#).unwrap();
    let mut buf = [0u8; 256];
    let mut n = 0usize;
    assert_eq!(unsafe { hs_frame_encode(msg.as_ptr(), 42, buf.as_mut_ptr(), buf.len(), &mut n) }, HsStatus::Ok);
    let mut tiny = [0u8; 4];
    let mut need = 0usize;
    assert_eq!(
        unsafe { hs_frame_encode(msg.as_ptr(), 42, tiny.as_mut_ptr(), tiny.len(), &mut need) },
        HsStatus::BufferTooSmall
    );
    assert_eq!(need, n);

    let mut seq = 0u16;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hs_frame_decode(buf.as_ptr(), n, &mut seq, &mut out) }, HsStatus::Ok);
    assert_eq!(seq, 42);
    let back: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(out) }.to_str().unwrap()).unwrap();
    unsafe { hs_string_free(out) };
    assert_eq!(back["mode"], "manual");
    assert_eq!(back["v_x"], 0.5);

    buf[n - 3] ^= 0x80;
    assert_eq!(unsafe { hs_frame_decode(buf.as_ptr(), n, &mut seq, &mut out) }, HsStatus::BadFrame);
}

#[test]
fn endurance_minutes() {
    let mut m = 0.0;
    assert_eq!(unsafe { hs_endurance_minutes(1920.0, 1882.0, &mut m) }, HsStatus::Ok);
    assert!((m - 61.21).abs() < 0.01);
    assert_eq!(unsafe { hs_endurance_minutes(1920.0, 0.0, &mut m) }, HsStatus::ConfigInvalid);
}

#[test]
fn header_is_current_and_c_program_links() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/hydrosim.h")).unwrap();
    for sym in ["hs_sim_new", "hs_sim_step", "hs_sim_command", "hs_frame_decode", "hs_last_error", "HS_STATUS_BAD_FRAME"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link check: no cc");
        return;
    }
    // the test harness links the rlib; refresh the static archive explicitly
    let built = Command::new(env!("CARGO")).args(["build", "-p", "hydrosim-ffi", "--lib"]).status().unwrap();
    assert!(built.success());
    let lib = root.join("../../target/debug/libhydrosim_ffi.a");
    if !lib.exists() {
        eprintln!("skipping C link check: no cc or static library");
        return;
    }
    let exe = std::env::temp_dir().join(format!("hydrosim_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to compile");
    let run = Command::new(&exe).output().unwrap();
    let _ = std::fs::remove_file(&exe);
    assert!(run.status.success(), "C smoke exited with {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).split_whitespace().next().unwrap().len(), 64);
}
