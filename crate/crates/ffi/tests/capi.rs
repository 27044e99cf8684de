use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ultrainject_ffi::*;

fn last_error() -> String {
    let p = ui_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn tone(fs: u32, n: usize, f: f64, a: f64) -> Vec<f64> {
    (0..n)
        .map(|i| a * (2.0 * std::f64::consts::PI * f * i as f64 / fs as f64).sin())
        .collect()
}

#[test]
fn round_trip_through_handles() {
    let fs = 192_000;
    let base = tone(fs, 19_200, 1000.0, 0.5);
    unsafe {
        let mut bb = ptr::null_mut();
        assert_eq!(ui_waveform_new(fs, base.as_ptr(), base.len(), &mut bb), UiStatus::Ok);
        assert_eq!(ui_waveform_len(bb), base.len());
        assert_eq!(ui_waveform_sample_rate(bb), fs);

        let mut pass = ptr::null_mut();
        assert_eq!(ui_modulate(bb, 40_200.0, 1.0, &mut pass), UiStatus::Ok);
        let mut rec = ptr::null_mut();
        let mut start = 0usize;
        assert_eq!(
            ui_recover_baseband(pass, 1.0, 0.1, 4000.0, &mut rec, &mut start),
            UiStatus::Ok
        );

        let mut total = 0usize;
        assert_eq!(ui_waveform_copy(rec, ptr::null_mut(), 0, &mut total), UiStatus::Ok);
        let mut buf = vec![0.0; total];
        assert_eq!(ui_waveform_copy(rec, buf.as_mut_ptr(), total, &mut total), UiStatus::Ok);
        let mut r = 0.0;
        assert_eq!(
            ui_correlation(buf.as_ptr(), base[start..].as_ptr(), total, &mut r),
            UiStatus::Ok
        );
        assert!(r > 0.99, "{r}");

        ui_waveform_free(rec);
        ui_waveform_free(pass);
        ui_waveform_free(bb);
        ui_waveform_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            ui_waveform_new(0, [0.0].as_ptr(), 1, &mut out),
            UiStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(ui_waveform_new(8000, ptr::null(), 4, &mut out), UiStatus::NullPointer);
        assert!(last_error().contains("samples"));

        let mut p = 0.0;
        let bad = CString::new("nokia3310").unwrap();
        assert_eq!(
            ui_delivery_probability(5.0, 0.0, 55.0, bad.as_ptr(), &mut p),
            UiStatus::InvalidArgument
        );
        assert!(last_error().contains("nokia3310"));
        assert_eq!(ui_repeated_success(1.5, 5, &mut p), UiStatus::InvalidArgument);
    }
}

#[test]
fn scalar_queries() {
    unsafe {
        let mut p = 0.0;
        let avg = CString::new("average").unwrap();
        assert_eq!(
            ui_delivery_probability(9.1, 0.0, 55.0, avg.as_ptr(), &mut p),
            UiStatus::Ok
        );
        assert!((p - 0.5).abs() < 1e-9);
        assert_eq!(ui_repeated_success(0.76, 5, &mut p), UiStatus::Ok);
        let expect = 1.0 - 0.24f64.powi(5);
        assert!((p - expect).abs() < 1e-12);
        let v = CStr::from_ptr(ui_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn json_entry_points() {
    let env = CString::new(
        r#"{"devices":[{"id":"victim","ssid":"phone","role":"victim","position":[3.0,0.0]}],
            "delivery":{"kind":"fixed","p":1.0}}"#,
    )
    .unwrap();
    unsafe {
        let mut out = ptr::null_mut();
        let st = ui_simulate_json(env.as_ptr(), ptr::null(), &mut out);
        assert_eq!(st, UiStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(report["success"], true);
        ui_string_free(out);

        let cfg = CString::new(r#"{"angle_step_deg": 0}"#).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            ui_simulate_json(env.as_ptr(), cfg.as_ptr(), &mut out),
            UiStatus::InvalidArgument
        );
        assert!(out.is_null());

        let mut log = String::new();
        for t in 0..30 {
            log.push_str(&format!(
                "{{\"t\":{t},\"ssid\":\"home\",\"bssid\":\"ap\",\"rssi\":-50}}\n"
            ));
        }
        let log = CString::new(log).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            ui_feedback_replay_json(log.as_ptr(), ptr::null(), &mut out),
            UiStatus::Ok,
            "{}",
            last_error()
        );
        let outcome: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert_eq!(outcome["success"], false);
        ui_string_free(out);

        let broken = CString::new("{\"t\":0}\nnot json\n").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            ui_feedback_replay_json(broken.as_ptr(), ptr::null(), &mut out),
            UiStatus::InvalidArgument
        );
        assert!(last_error().contains("line"));
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest_dir().join("include/ultrainject.h")).unwrap();
    let src = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct UiWaveform UiWaveform;"));
}

#[test]
fn header_compiles_as_c() {
    let header = manifest_dir().join("include");
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("use.c");
    std::fs::write(
        &c,
        "#include \"ultrainject.h\"\nint main(void) { UiWaveform *w = 0; size_t n = ui_waveform_len(w); return (int)n; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg("-I")
        .arg(&header)
        .arg(&c)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}
