//! C ABI over `lensflow`.
//!
//! Every fallible call returns an [`LfStatus`]; on failure the message is
//! available from [`lf_last_error`] on the same thread. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lensflow::critical::{find_critical_radii, CriticalRadii};
use lensflow::flow::{self, CollapseTarget, FlowConfig, FlowMode, FlowTrajectory};
use lensflow::geometry::radial_state;
use lensflow::soliton::{SolitonParams, SolitonProfile};
use lensflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Domain = 3,
    NoConvergence = 4,
    Integration = 5,
    Validation = 6,
    OutOfRange = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfFlowMode {
    Rmcf = 0,
    Mcf = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfTarget {
    S0 = 0,
    SInfinity = 1,
    Stationary = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfCriticalRadii {
    pub r1: f64,
    pub r2: f64,
    pub w1: f64,
    pub w2: f64,
    pub dlambda_dr_at_r1: f64,
    pub dlambda_dr_at_r2: f64,
}

/// Summary of one trajectory. Infinite maximal times are `INFINITY`, a
/// missing Type-I constant is `NAN`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfFlowSummary {
    pub target: LfTarget,
    pub t_prime_ode: f64,
    pub t_prime_quadrature: f64,
    pub type_i_constant: f64,
    pub sample_count: usize,
}

/// One trajectory sample; `sigma` is `NAN` for MCF.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfSample {
    pub t: f64,
    pub sigma: f64,
    pub r: f64,
    pub h: f64,
    pub lambda: f64,
    pub a2: f64,
}

/// A solved soliton profile with its critical radii.
pub struct LfProfile {
    profile: SolitonProfile,
    crit: CriticalRadii,
}

pub struct LfTrajectory {
    traj: FlowTrajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LfStatus {
    match e {
        Error::InvalidParams(_) => LfStatus::InvalidParams,
        Error::Domain(_) => LfStatus::Domain,
        Error::NoBracket { .. }
        | Error::ResidualMismatch { .. }
        | Error::Root(_)
        | Error::Quadrature { .. }
        | Error::FdConvergence { .. }
        | Error::Construction(_)
        | Error::CriticalRadii(_) => LfStatus::NoConvergence,
        Error::Integration { .. } => LfStatus::Integration,
        Error::Validation(_) | Error::TypeOne(_) => LfStatus::Validation,
        _ => LfStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LfStatus, String)>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LfStatus::Panic
        }
    }
}

fn lift<T>(r: lensflow::Result<T>) -> Result<T, (LfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LfStatus, String) {
    (LfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (LfStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (LfStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Solves the profile for `(n, k)`. `grid = 0` selects the default grid.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_profile_new(n: u32, k: u32, grid: usize, out: *mut *mut LfProfile) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let mut params = SolitonParams::new(n, k);
        if grid != 0 {
            params = params.with_grid(grid);
        }
        let profile = lift(SolitonProfile::build(&params))?;
        let crit = lift(find_critical_radii(&profile))?;
        out.write(Box::into_raw(Box::new(LfProfile { profile, crit })));
        Ok(())
    })
}

/// # Safety
/// `profile` must come from [`lf_profile_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lf_profile_free(profile: *mut LfProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// # Safety
/// `profile` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_profile_constant(profile: *const LfProfile, out: *mut f64) -> LfStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        write(out, p.profile.c, "out")
    })
}

/// # Safety
/// `profile` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_profile_critical_radii(profile: *const LfProfile, out: *mut LfCriticalRadii) -> LfStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let cr = &p.crit;
        let value = LfCriticalRadii {
            r1: cr.r1,
            r2: cr.r2,
            w1: cr.w1,
            w2: cr.w2,
            dlambda_dr_at_r1: cr.dlambda_dr_at_r1,
            dlambda_dr_at_r2: cr.dlambda_dr_at_r2,
        };
        write(out, value, "out")
    })
}

/// `λ(r)` and `|A(ι_r)|²`; either output may be null.
///
/// # Safety
/// `profile` must be a live handle; non-null outputs must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_profile_lambda(
    profile: *const LfProfile,
    r: f64,
    lambda: *mut f64,
    norm_a2: *mut f64,
) -> LfStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let st = lift(radial_state(&p.profile, r))?;
        if !lambda.is_null() {
            lambda.write(st.lambda);
        }
        if !norm_a2.is_null() {
            norm_a2.write(st.norm_a2);
        }
        Ok(())
    })
}

/// Integrates one trajectory. `t_horizon` is ignored for MCF.
///
/// # Safety
/// `profile` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_flow_integrate(
    profile: *const LfProfile,
    mode: LfFlowMode,
    r0: f64,
    t_horizon: f64,
    out: *mut *mut LfTrajectory,
) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let p = deref(profile, "profile")?;
        let cfg = FlowConfig::new(mode_of(mode), r0, t_horizon);
        let traj = lift(flow::integrate_with(&p.profile, &cfg, &p.crit))?;
        out.write(Box::into_raw(Box::new(LfTrajectory { traj })));
        Ok(())
    })
}

/// Closed-form maximal time without integrating.
///
/// # Safety
/// `profile` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_flow_maximal_time(
    profile: *const LfProfile,
    mode: LfFlowMode,
    r0: f64,
    t_horizon: f64,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let p = deref(profile, "profile")?;
        let cfg = FlowConfig::new(mode_of(mode), r0, t_horizon);
        let t = lift(flow::maximal_time_closed_form(&p.profile, &cfg))?;
        write(out, t, "out")
    })
}

/// # Safety
/// `traj` must come from [`lf_flow_integrate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lf_trajectory_free(traj: *mut LfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// `traj` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_trajectory_summary(traj: *const LfTrajectory, out: *mut LfFlowSummary) -> LfStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.traj;
        let value = LfFlowSummary {
            target: match t.target {
                CollapseTarget::S0 => LfTarget::S0,
                CollapseTarget::SInfinity => LfTarget::SInfinity,
                CollapseTarget::Stationary => LfTarget::Stationary,
            },
            t_prime_ode: t.t_prime_ode,
            t_prime_quadrature: t.t_prime_quadrature,
            type_i_constant: t.type_i_constant.unwrap_or(f64::NAN),
            sample_count: t.samples.len(),
        };
        write(out, value, "out")
    })
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `traj` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lf_trajectory_sample(traj: *const LfTrajectory, index: usize, out: *mut LfSample) -> LfStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.traj;
        let s = t.samples.get(index).ok_or_else(|| {
            (
                LfStatus::OutOfRange,
                format!("sample {index} out of range ({} samples)", t.samples.len()),
            )
        })?;
        let value = LfSample {
            t: s.t,
            sigma: s.sigma.unwrap_or(f64::NAN),
            r: s.r,
            h: s.h,
            lambda: s.lambda,
            a2: s.a2,
        };
        write(out, value, "out")
    })
}

fn mode_of(m: LfFlowMode) -> FlowMode {
    match m {
        LfFlowMode::Rmcf => FlowMode::Rmcf,
        LfFlowMode::Mcf => FlowMode::Mcf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, LfStatus::Panic);
        let msg = unsafe { std::ffi::CStr::from_ptr(lf_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic: boom");
    }

    #[test]
    fn error_variants_map_to_statuses() {
        assert_eq!(status_of(&Error::Domain("x".into())), LfStatus::Domain);
        assert_eq!(status_of(&Error::Root("x".into())), LfStatus::NoConvergence);
        assert_eq!(status_of(&Error::TypeOne("x".into())), LfStatus::Validation);
    }
}
