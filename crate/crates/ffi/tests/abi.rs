use std::ffi::{CStr, CString};
use std::ptr;

use hl_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; hl_last_error_length() + 1];
    let st = unsafe { hl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, HlStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn gaussian(l: f64, n: usize, width: f64) -> *mut HlField {
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { hl_field_gaussian(l, n, 0.0, width, &mut f) },
        HlStatus::Ok
    );
    f
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(hl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn field_round_trip() {
    let vals: Vec<f64> = (0..100)
        .map(|j| {
            if (40..60).contains(&j) {
                0.5 / 0.4 * 0.2 * 2.0
            } else {
                0.0
            }
        })
        .collect();
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { hl_field_from_values(5.0, 100, vals.as_ptr(), &mut f) },
        HlStatus::Ok
    );
    assert_eq!(unsafe { hl_field_len(f) }, 100);
    let mut back = vec![0.0; 100];
    assert_eq!(
        unsafe { hl_field_values(f, back.as_mut_ptr(), 100) },
        HlStatus::Ok
    );
    assert_eq!(back, vals);
    let mut short = vec![0.0; 10];
    assert_eq!(
        unsafe { hl_field_values(f, short.as_mut_ptr(), 10) },
        HlStatus::BufferTooSmall
    );
    assert!(last_error().contains("10"));
    unsafe { hl_field_free(f) };
}

#[test]
fn uniform_inside_unit_interval_has_zero_fluidity() {
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { hl_field_uniform(4.0, 400, -0.5, 0.5, &mut f) },
        HlStatus::Ok
    );
    let (mut m, mut d, mut tau) = (0.0, 1.0, 1.0);
    let st = unsafe { hl_field_observables(f, 0.3, &mut m, &mut d, &mut tau, ptr::null_mut()) };
    assert_eq!(st, HlStatus::Ok);
    assert!((m - 1.0).abs() < 1e-12);
    assert_eq!(d, 0.0);
    assert_eq!(tau, 0.0);
    unsafe { hl_field_free(f) };
}

#[test]
fn bad_grid_reports_grid_status_and_message() {
    let mut f = ptr::null_mut();
    let st = unsafe { hl_field_uniform(4.0, 7, -0.5, 0.5, &mut f) };
    assert_eq!(st, HlStatus::Grid);
    assert!(f.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_rejected() {
    assert_eq!(
        unsafe { hl_field_uniform(4.0, 400, -0.5, 0.5, ptr::null_mut()) },
        HlStatus::NullPointer
    );
    assert_eq!(
        unsafe { hl_field_values(ptr::null(), ptr::null_mut(), 0) },
        HlStatus::NullPointer
    );
    assert_eq!(unsafe { hl_field_len(ptr::null()) }, 0);
    assert_eq!(unsafe { hl_trajectory_records(ptr::null()) }, 0);
    unsafe {
        hl_field_free(ptr::null_mut());
        hl_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn simulate_conserves_mass_and_exposes_trace() {
    let p0 = gaussian(8.0, 800, 1.0);
    let mut tr = ptr::null_mut();
    let st = unsafe { hl_simulate(p0, 1.0, 0.3, 1e-3, 1e-3, 0.2, 1, 10, &mut tr) };
    assert_eq!(st, HlStatus::Ok, "{}", last_error());
    let n = unsafe { hl_trajectory_records(tr) };
    assert_eq!(n, 201);
    let (mut t, mut mass) = (vec![0.0; n], vec![0.0; n]);
    let st = unsafe {
        hl_trajectory_trace(
            tr,
            t.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
            mass.as_mut_ptr(),
            n,
        )
    };
    assert_eq!(st, HlStatus::Ok);
    assert_eq!(t[0], 0.0);
    assert!((t[n - 1] - 0.2).abs() < 1e-12);
    for m in &mass {
        assert!((m - mass[0]).abs() < 1e-10, "mass drift {m}");
    }
    let mut stag = f64::NAN;
    assert_eq!(
        unsafe { hl_trajectory_stagnation_time(tr, &mut stag) },
        HlStatus::Ok
    );
    assert_eq!(stag, 0.0);
    let mut last = ptr::null_mut();
    assert_eq!(unsafe { hl_trajectory_final_field(tr, &mut last) }, HlStatus::Ok);
    assert_eq!(unsafe { hl_field_len(last) }, 800);
    unsafe {
        hl_field_free(last);
        hl_trajectory_free(tr);
        hl_field_free(p0);
    }
}

#[test]
fn cfl_violation_is_reported() {
    let p0 = gaussian(8.0, 800, 1.0);
    let mut tr = ptr::null_mut();
    let st = unsafe { hl_simulate(p0, 10.0, 0.3, 1e-3, 0.1, 1.0, 1, 1, &mut tr) };
    assert_eq!(st, HlStatus::Cfl);
    assert!(tr.is_null());
    unsafe { hl_field_free(p0) };
}

#[test]
fn steady_zero_shear_and_degenerate_family() {
    let (mut d, mut tau) = (0.0, 1.0);
    let mut prof = ptr::null_mut();
    let st = unsafe { hl_steady_state(1.0, 0.0, 16.0, 1600, &mut d, &mut tau, &mut prof) };
    assert_eq!(st, HlStatus::Ok, "{}", last_error());
    // alpha = 1: c = 1/2, s = 2c/(1 + sqrt 3)
    let s = 1.0 / (1.0 + 3f64.sqrt());
    assert!((d - s * s).abs() < 1e-12, "{d}");
    assert_eq!(tau, 0.0);
    assert_eq!(unsafe { hl_field_len(prof) }, 1600);
    unsafe { hl_field_free(prof) };

    let st = unsafe { hl_steady_state(0.4, 0.0, 16.0, 1600, &mut d, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, HlStatus::DegenerateFamily);
}

#[test]
fn steady_sheared_stress_is_odd() {
    let (mut d1, mut t1, mut d2, mut t2) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(
            hl_steady_state(0.3, 0.5, 16.0, 1600, &mut d1, &mut t1, ptr::null_mut()),
            HlStatus::Ok
        );
        assert_eq!(
            hl_steady_state(0.3, -0.5, 16.0, 1600, &mut d2, &mut t2, ptr::null_mut()),
            HlStatus::Ok
        );
    }
    assert!(d1 > 0.0);
    assert!((d1 - d2).abs() < 1e-12);
    assert!((t1 + t2).abs() < 1e-12);
    assert!(t1 > 0.0);
}

#[test]
fn classify_verdicts() {
    let mut f = ptr::null_mut();
    let mut v = HlVerdict::Inconclusive;
    let mut e = 0.0;
    unsafe {
        assert_eq!(hl_field_uniform(4.0, 400, -0.5, 0.5, &mut f), HlStatus::Ok);
        assert_eq!(
            hl_classify(f, 0.3, &mut v, &mut e),
            HlStatus::Ok,
            "{}",
            last_error()
        );
        assert_ne!(v, HlVerdict::NotDegenerate);
        hl_field_free(f);

        let g = gaussian(8.0, 800, 1.0);
        assert_eq!(hl_classify(g, 0.3, &mut v, &mut e), HlStatus::Ok);
        assert_eq!(v, HlVerdict::NotDegenerate);
        assert!(e.is_nan());
        hl_field_free(g);
    }
}

#[test]
fn run_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/steady.toml")).unwrap();
    let text = CString::new(text).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let st = unsafe { hl_run_config(text.as_ptr(), ptr::null(), ptr::null(), out.as_ptr()) };
    assert_eq!(st, HlStatus::Ok, "{}", last_error());
    assert!(dir.path().join("steady.json").exists());
    assert!(dir.path().join("manifest.toml").exists());

    let bogus = CString::new("nope").unwrap();
    let st = unsafe { hl_run_config(text.as_ptr(), bogus.as_ptr(), ptr::null(), out.as_ptr()) };
    assert_eq!(st, HlStatus::Config);
    assert!(last_error().contains("nope"));
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hl_lab.h")).unwrap();
    for name in [
        "hl_version",
        "hl_last_error_message",
        "hl_field_gaussian",
        "hl_field_free",
        "hl_simulate",
        "hl_trajectory_trace",
        "hl_trajectory_free",
        "hl_steady_state",
        "hl_classify",
        "hl_run_config",
        "typedef struct HlField HlField",
        "HL_STATUS_PANIC",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}
