use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use lensflow_ffi::*;

fn last_error() -> String {
    let p = lf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn profile(n: u32, k: u32) -> *mut LfProfile {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lf_profile_new(n, k, 128, &mut p) }, LfStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn profile_constant_and_radii() {
    let p = profile(2, 1);
    let mut c = 0.0;
    assert_eq!(unsafe { lf_profile_constant(p, &mut c) }, LfStatus::Ok);
    assert!((c - 0.527_619_519_896_959_8).abs() < 1e-12);
    let mut cr = LfCriticalRadii::default();
    assert_eq!(unsafe { lf_profile_critical_radii(p, &mut cr) }, LfStatus::Ok);
    assert!((cr.w1 - 1.988_454_526_819_57).abs() < 1e-10);
    assert!((cr.w2 - 2.384_042_239_848_33).abs() < 1e-10);
    assert!(cr.r1 < cr.r2 && cr.dlambda_dr_at_r1 > 0.0);

    let (mut l, mut a2) = (0.0, 0.0);
    assert_eq!(unsafe { lf_profile_lambda(p, cr.r1, &mut l, &mut a2) }, LfStatus::Ok);
    assert!((l + 1.0).abs() < 1e-9 && a2 > 0.0);
    assert_eq!(unsafe { lf_profile_lambda(p, cr.r2, &mut l, ptr::null_mut()) }, LfStatus::Ok);
    assert!(l.abs() < 1e-9);
    unsafe { lf_profile_free(p) };
}

#[test]
fn trajectory_round_trip() {
    let p = profile(2, 1);
    let mut cr = LfCriticalRadii::default();
    unsafe { lf_profile_critical_radii(p, &mut cr) };

    let mut t = ptr::null_mut();
    assert_eq!(unsafe { lf_flow_integrate(p, LfFlowMode::Rmcf, 0.5 * cr.r1, 1.0, &mut t) }, LfStatus::Ok);
    let mut s = LfFlowSummary {
        target: LfTarget::Stationary,
        t_prime_ode: 0.0,
        t_prime_quadrature: 0.0,
        type_i_constant: 0.0,
        sample_count: 0,
    };
    assert_eq!(unsafe { lf_trajectory_summary(t, &mut s) }, LfStatus::Ok);
    assert_eq!(s.target, LfTarget::S0);
    assert!(s.t_prime_ode < 1.0 && ((s.t_prime_ode - s.t_prime_quadrature) / s.t_prime_ode).abs() < 1e-6);
    assert!(s.sample_count > 10);

    let mut first = LfSample::default();
    assert_eq!(unsafe { lf_trajectory_sample(t, 0, &mut first) }, LfStatus::Ok);
    assert_eq!(first.r, 0.5 * cr.r1);
    assert_eq!(first.h, 1.0);
    let mut past = LfSample::default();
    assert_eq!(unsafe { lf_trajectory_sample(t, s.sample_count, &mut past) }, LfStatus::OutOfRange);
    assert!(last_error().contains("out of range"));

    let mut closed = 0.0;
    assert_eq!(
        unsafe { lf_flow_maximal_time(p, LfFlowMode::Rmcf, 0.5 * cr.r1, 1.0, &mut closed) },
        LfStatus::Ok
    );
    assert!((closed - s.t_prime_quadrature).abs() < 1e-12);
    unsafe { lf_trajectory_free(t) };

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { lf_flow_integrate(p, LfFlowMode::Mcf, cr.r2, 0.0, &mut m) }, LfStatus::Ok);
    assert_eq!(unsafe { lf_trajectory_summary(m, &mut s) }, LfStatus::Ok);
    assert_eq!(s.target, LfTarget::Stationary);
    assert!(s.t_prime_ode.is_infinite() && s.type_i_constant.is_nan());
    unsafe {
        lf_trajectory_free(m);
        lf_profile_free(p);
    }
}

#[test]
fn errors_are_reported() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lf_profile_new(2, 2, 0, &mut p) }, LfStatus::InvalidParams);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { lf_profile_new(2, 1, 0, ptr::null_mut()) }, LfStatus::NullPointer);
    let mut c = 0.0;
    assert_eq!(unsafe { lf_profile_constant(ptr::null(), &mut c) }, LfStatus::NullPointer);
    assert!(last_error().contains("profile is null"));

    let p = profile(3, 1);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { lf_flow_integrate(p, LfFlowMode::Rmcf, -1.0, 1.0, &mut t) }, LfStatus::Domain);
    assert!(t.is_null());
    let mut l = 0.0;
    assert_eq!(unsafe { lf_profile_lambda(p, 0.0, &mut l, ptr::null_mut()) }, LfStatus::Domain);
    unsafe {
        lf_profile_free(p);
        lf_profile_free(ptr::null_mut());
        lf_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(lf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lensflow.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "lf_profile_new",
        "lf_profile_free",
        "lf_profile_critical_radii",
        "lf_flow_integrate",
        "lf_trajectory_sample",
        "lf_last_error",
        "typedef struct LfProfile LfProfile",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // a C compiler is optional on the build host
    if let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
