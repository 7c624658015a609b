use std::ffi::{CStr, CString};
use std::ptr;

use shearlab_ffi::*;

#[test]
fn schedule_field_run_roundtrip() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(shl_schedule_universal(0.5, 4, &mut s), ShlStatus::Ok);
        assert_eq!(shl_schedule_stage_count(s), 5);
        let t = shl_schedule_to_text(s);
        let mut s2 = ptr::null_mut();
        assert_eq!(shl_schedule_from_text(t, &mut s2), ShlStatus::Ok);
        assert_eq!(shl_schedule_stage_count(s2), 5);
        shl_string_free(t);

        let spec = CString::new("sinsin:1,1").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(
            shl_field_harmonic(spec.as_ptr(), 512, 512, s, &mut f),
            ShlStatus::Ok
        );
        let l2 = shl_field_l2(f);
        assert!((l2 - std::f64::consts::PI).abs() < 1e-12);
        let mut h1 = 0.0;
        assert_eq!(shl_field_sobolev(f, 1.0, &mut h1), ShlStatus::Ok);
        assert!((h1 - 2f64.sqrt() * l2).abs() < 1e-12);

        let (mut g, mut chi, mut res) = (ptr::null_mut(), 0.0, 0.0);
        assert_eq!(
            shl_run_viscous(f, s, 1e-3, 64, &mut g, &mut chi, &mut res),
            ShlStatus::Ok
        );
        assert!(chi > 0.0 && res < 1e-6);
        assert!(shl_field_l2(g) < l2);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("f.bin").to_str().unwrap()).unwrap();
        assert_eq!(shl_field_save(g, path.as_ptr()), ShlStatus::Ok);
        let mut h = ptr::null_mut();
        assert_eq!(shl_field_load(path.as_ptr(), &mut h), ShlStatus::Ok);
        assert_eq!(shl_field_l2(h), shl_field_l2(g));

        for p in [f, g, h] {
            shl_field_free(p);
        }
        shl_schedule_free(s);
        shl_schedule_free(s2);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(shl_schedule_universal(1.5, 4, &mut s), ShlStatus::Config);
        assert!(s.is_null());
        let msg = CStr::from_ptr(shl_last_error()).to_str().unwrap();
        assert!(msg.contains("alpha"));
        assert_eq!(
            shl_schedule_universal(0.5, 4, ptr::null_mut()),
            ShlStatus::NullArgument
        );

        assert_eq!(shl_schedule_universal(0.5, 6, &mut s), ShlStatus::Ok);
        let spec = CString::new("sinsin:1,1").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(
            shl_field_harmonic(spec.as_ptr(), 64, 64, s, &mut f),
            ShlStatus::Ok
        );
        let (mut g, mut chi, mut res) = (ptr::null_mut(), 0.0, 0.0);
        assert_eq!(
            shl_run_viscous(f, s, 1e-3, 64, &mut g, &mut chi, &mut res),
            ShlStatus::Resolution
        );
        assert!(g.is_null());
        let bad = CString::new("cos:1").unwrap();
        let mut f2 = ptr::null_mut();
        assert_eq!(
            shl_field_harmonic(bad.as_ptr(), 64, 64, ptr::null(), &mut f2),
            ShlStatus::Config
        );
        assert!(shl_field_l2(ptr::null()).is_nan());
        shl_field_free(f);
        shl_schedule_free(s);
    }
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/shearlab.h"))
        .unwrap();
    for name in [
        "shl_schedule_universal",
        "shl_field_harmonic",
        "shl_run_viscous",
        "shl_last_error",
        "SHL_STATUS_RESOLUTION = 3",
    ] {
        assert!(h.contains(name), "{name}");
    }
}
