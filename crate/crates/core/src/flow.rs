//! Equivariant Ricci-mean curvature flow and mean curvature flow of the
//! round lens spaces.
//!
//! The Ricci-mean curvature flow is integrated in `x = ln R` against
//! `σ = ln(T/(T-t))`, where it is autonomous:
//! `dx/dσ = (c/2)(λ(e^x) + 1)`. The mean curvature flow is integrated as
//! `dx/dt = c λ(e^x)` with `x = ln(h r0)`. Once the radius leaves the
//! tabulated range by `x_escape`, the remaining time to collapse is added in
//! closed form from the leading power-law tail of `λ`.

use serde::{Deserialize, Serialize};

use crate::critical::{find_critical_radii, CriticalRadii};
use crate::error::{Error, Result};
use crate::geometry::{lambda_at, lambda_bracket, norm_a2_at};
use crate::ode::{self, Solution, Status};
use crate::quad;
use crate::roots::brent;
use crate::soliton::{Moment, SolitonProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    Rmcf,
    Mcf,
}

impl std::fmt::Display for FlowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowMode::Rmcf => "rmcf",
            FlowMode::Mcf => "mcf",
        })
    }
}

impl std::str::FromStr for FlowMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rmcf" => Ok(FlowMode::Rmcf),
            "mcf" => Ok(FlowMode::Mcf),
            other => Err(Error::InvalidParams(format!("unknown flow mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub mode: FlowMode,
    /// Horizon of the ambient Ricci flow (ignored for MCF).
    pub t_horizon: f64,
    pub r0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Distance in `ln R` past the grid edge at which the tail takes over.
    pub x_escape: f64,
    /// Cap on the integration variable (`σ` for RMCF, `t` for MCF).
    pub max_time: f64,
    /// Span of the integration variable sampled on a stationary solution.
    pub stationary_span: f64,
    pub samples: usize,
}

impl FlowConfig {
    pub fn rmcf(r0: f64, t_horizon: f64) -> Self {
        Self {
            mode: FlowMode::Rmcf,
            t_horizon,
            r0,
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            x_escape: 1.5,
            max_time: 200.0,
            stationary_span: 20.0,
            samples: 200,
        }
    }

    pub fn mcf(r0: f64) -> Self {
        Self {
            mode: FlowMode::Mcf,
            t_horizon: 1.0,
            r0,
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            x_escape: 1.5,
            max_time: 1e4,
            stationary_span: 10.0,
            samples: 200,
        }
    }

    pub fn new(mode: FlowMode, r0: f64, t_horizon: f64) -> Self {
        match mode {
            FlowMode::Rmcf => Self::rmcf(r0, t_horizon),
            FlowMode::Mcf => Self::mcf(r0),
        }
    }

    pub fn validate(&self, k: u32) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Domain(format!("initial radius must be positive (got {})", self.r0)));
        }
        if self.mode == FlowMode::Rmcf && !(self.t_horizon > 0.0 && self.t_horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon T must be positive (got {})", self.t_horizon)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParams("integrator tolerances must be positive".into()));
        }
        let min_escape = 3.0 / (2.0 * k as f64);
        if !(self.x_escape >= min_escape) {
            return Err(Error::InvalidParams(format!(
                "x_escape = {} is below the minimum 3/(2k) = {min_escape}",
                self.x_escape
            )));
        }
        if !(self.max_time > 0.0 && self.stationary_span > 0.0) {
            return Err(Error::InvalidParams("time caps must be positive".into()));
        }
        if self.samples < 10 {
            return Err(Error::InvalidParams(format!("need at least 10 samples (got {})", self.samples)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    /// `ln(T/(T-t))`; absent for MCF.
    pub sigma: Option<f64>,
    pub r: f64,
    pub h: f64,
    pub lambda: f64,
    /// `|A|²/(2(T-t))` for RMCF, `|A|²` for MCF.
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseTarget {
    S0,
    #[serde(rename = "S_infinity")]
    SInfinity,
    Stationary,
}

impl std::fmt::Display for CollapseTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CollapseTarget::S0 => "S0",
            CollapseTarget::SInfinity => "S_infinity",
            CollapseTarget::Stationary => "Stationary",
        })
    }
}

/// Suprema of the Type-I products over the final decade before collapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeOneReport {
    /// `sup (T'-t) |A|²`-quantity with the trajectory's sampling.
    pub curvature: f64,
    /// `sup (T'-t) R^{∓2k}` (`h^{∓2k}` for MCF).
    pub radius: f64,
    pub curvature_refined: f64,
    pub radius_refined: f64,
    /// Largest relative change of the two suprema under 2× refinement.
    pub drift: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub mode: FlowMode,
    pub r0: f64,
    pub t_horizon: f64,
    pub samples: Vec<FlowSample>,
    pub target: CollapseTarget,
    pub t_prime_ode: f64,
    pub t_prime_quadrature: f64,
    /// For collapsing flows, the sup of `(T'-t)·|A|²`-quantity over the final
    /// decade; for the stationary RMCF solution the constant `(T-t)|A_{g_t}|²`.
    pub type_i_constant: Option<f64>,
    pub type_one: Option<TypeOneReport>,
    /// Value of the integration variable when the tail took over.
    pub escape_time: Option<f64>,
    dense: Option<Solution<1>>,
    k: u32,
}

impl FlowTrajectory {
    /// Solution of the autonomous ODE for `ln(R/r0)` against `σ` (RMCF) or `t` (MCF).
    pub fn log_radius_at(&self, var: f64) -> Option<f64> {
        self.dense.as_ref().map(|d| d.eval(var)[0])
    }

    /// `h(t)` from the primary integration.
    pub fn h_at(&self, profile: &SolitonProfile, t: f64) -> Option<f64> {
        match self.mode {
            FlowMode::Rmcf => {
                let sigma = -(-t / self.t_horizon).ln_1p();
                if self.target == CollapseTarget::Stationary {
                    return Some((-0.5 * profile.c * sigma).exp());
                }
                self.log_radius_at(sigma).map(|xi| (xi - 0.5 * profile.c * sigma).exp())
            }
            FlowMode::Mcf => {
                if self.target == CollapseTarget::Stationary {
                    return Some(1.0);
                }
                self.log_radius_at(t).map(f64::exp)
            }
        }
    }
}

/// Pieces of the leading tails used for blow-up completion.
struct Tails {
    /// `λ ≈ -A e^{-2kx}` as `x → -∞`.
    a: f64,
    /// `λ ≈ B e^{2kx}` as `x → +∞`.
    b: f64,
    ck: f64,
    k: f64,
}

impl Tails {
    fn new(profile: &SolitonProfile) -> Self {
        let k = profile.k() as f64;
        let c = profile.c;
        Self {
            a: 1.0 / (2.0 * c * profile.a1 * k),
            b: 1.0 / (2.0 * c * profile.b1 * k),
            ck: c * k,
            k,
        }
    }

    /// Remaining `σ` (RMCF) from `ln R = x` until collapse.
    fn rmcf_remaining(&self, x: f64, lower: bool) -> f64 {
        if lower {
            let y = (2.0 * self.k * x).exp();
            -(-y / self.a).ln_1p() / self.ck
        } else {
            let y = (-2.0 * self.k * x).exp();
            (y / self.b).ln_1p() / self.ck
        }
    }

    /// Remaining `t` (MCF) from `ln R = x` until collapse.
    fn mcf_remaining(&self, x: f64, lower: bool) -> f64 {
        if lower {
            (2.0 * self.k * x).exp() / (2.0 * self.ck * self.a)
        } else {
            (-2.0 * self.k * x).exp() / (2.0 * self.ck * self.b)
        }
    }
}

/// `λ` at `R = e^x`; `NaN` where the profile cannot be evaluated.
pub fn lambda_of_log_radius(profile: &SolitonProfile, x: f64) -> f64 {
    match profile.moment_from_s(2.0 * x) {
        Ok(m) => lambda_at(profile.kernel(), &m),
        Err(_) => f64::NAN,
    }
}

fn moment_of_radius(profile: &SolitonProfile, r: f64) -> Result<Moment> {
    profile.moment_from_s(2.0 * r.ln())
}

fn critical_for(mode: FlowMode, crit: &CriticalRadii) -> f64 {
    match mode {
        FlowMode::Rmcf => crit.r1,
        FlowMode::Mcf => crit.r2,
    }
}

fn is_stationary(r0: f64, r_crit: f64) -> bool {
    ((r0 - r_crit) / r_crit).abs() < 1e-9
}

/// Closed-form maximal time by quadrature in the moment coordinate.
///
/// Returns `T` for RMCF started at `r1` and `+∞` for MCF started at `r2`.
pub fn maximal_time_closed_form(profile: &SolitonProfile, config: &FlowConfig) -> Result<f64> {
    config.validate(profile.k())?;
    let crit = find_critical_radii(profile)?;
    maximal_time_with(profile, config, &crit)
}

fn maximal_time_with(profile: &SolitonProfile, config: &FlowConfig, crit: &CriticalRadii) -> Result<f64> {
    let kernel = profile.kernel();
    let r_crit = critical_for(config.mode, crit);
    if is_stationary(config.r0, r_crit) {
        return Ok(match config.mode {
            FlowMode::Rmcf => config.t_horizon,
            FlowMode::Mcf => f64::INFINITY,
        });
    }
    let m0 = moment_of_radius(profile, config.r0)?;
    let (a, b) = (kernel.lower_end(), kernel.upper_end());
    let below = config.r0 < r_crit;
    let (lo, hi) = if below { (a, m0.w) } else { (m0.w, b) };
    // integrands are bounded at the endpoints of [n-k, n+k]
    let eval = |w: f64| -> (f64, f64) {
        let m = match kernel.moment(w) {
            Ok(m) => m,
            Err(_) => return (f64::NAN, f64::NAN),
        };
        let v = kernel.v(&m);
        let br = lambda_bracket(kernel, &m, v);
        (br, 2.0 * kernel.c() * v - br)
    };
    match config.mode {
        FlowMode::Rmcf => {
            // D = cV - (n-W) - (n-1)V/W = 2cV - bracket
            let q = quad::integrate(|w| 1.0 / eval(w).1, lo, hi, 0.0, 1e-14)?;
            let sigma = 2.0 * q.value.abs();
            Ok(-config.t_horizon * (-sigma).exp_m1())
        }
        FlowMode::Mcf => {
            let q = quad::integrate(|w| 1.0 / eval(w).0, lo, hi, 0.0, 1e-14)?;
            Ok(q.value.abs())
        }
    }
}

/// Ricci-mean curvature flow from `L(k;1)(r0)` in the soliton with horizon `T`.
pub fn integrate_rmcf(profile: &SolitonProfile, config: &FlowConfig) -> Result<FlowTrajectory> {
    if config.mode != FlowMode::Rmcf {
        return Err(Error::InvalidParams("integrate_rmcf needs mode = rmcf".into()));
    }
    integrate(profile, config)
}

/// Mean curvature flow from `L(k;1)(r0)` in the fixed soliton metric.
pub fn integrate_mcf(profile: &SolitonProfile, config: &FlowConfig) -> Result<FlowTrajectory> {
    if config.mode != FlowMode::Mcf {
        return Err(Error::InvalidParams("integrate_mcf needs mode = mcf".into()));
    }
    integrate(profile, config)
}

pub fn integrate(profile: &SolitonProfile, config: &FlowConfig) -> Result<FlowTrajectory> {
    config.validate(profile.k())?;
    let crit = find_critical_radii(profile)?;
    integrate_with(profile, config, &crit)
}

/// As [`integrate`] with precomputed critical radii.
pub fn integrate_with(profile: &SolitonProfile, config: &FlowConfig, crit: &CriticalRadii) -> Result<FlowTrajectory> {
    config.validate(profile.k())?;
    let r_crit = critical_for(config.mode, crit);
    let t_prime_quadrature = maximal_time_with(profile, config, crit)?;
    if is_stationary(config.r0, r_crit) {
        return Ok(stationary(profile, config, r_crit));
    }

    let c = profile.c;
    let r0 = config.r0;
    let x0 = r0.ln();
    let (factor, shift) = match config.mode {
        FlowMode::Rmcf => (0.5 * c, 1.0),
        FlowMode::Mcf => (c, 0.0),
    };
    let s = &profile.s_values;
    let x_lo = 0.5 * s[0] - config.x_escape;
    let x_hi = 0.5 * s[s.len() - 1] + config.x_escape;
    if !(x0 > x_lo && x0 < x_hi) {
        return Err(Error::Domain(format!(
            "initial radius {r0} lies beyond the escape thresholds ({}, {})",
            x_lo.exp(),
            x_hi.exp()
        )));
    }
    let rhs = |_: f64, y: &[f64; 1]| [factor * (lambda_of_log_radius(profile, x0 + y[0]) + shift)];
    let opts = ode::Options {
        rtol: config.rel_tol,
        atol: config.abs_tol,
        ..Default::default()
    };
    let sol = ode::integrate(rhs, 0.0, [0.0], config.max_time, &opts, |_, y| {
        let x = x0 + y[0];
        x <= x_lo || x >= x_hi
    });

    let lower = match sol.status {
        Status::Stopped => x0 + sol.y[0] <= x_lo,
        other => {
            let partial = vec![FlowSample {
                t: sol.t,
                sigma: None,
                r: (x0 + sol.y[0]).exp(),
                h: f64::NAN,
                lambda: lambda_of_log_radius(profile, x0 + sol.y[0]),
                a2: f64::NAN,
            }];
            return Err(Error::Integration {
                t: sol.t,
                reason: format!("integrator ended with {other:?} before leaving the tabulated range"),
                partial,
            });
        }
    };
    let expected_lower = lambda_of_log_radius(profile, x0) + shift < 0.0;
    if lower != expected_lower {
        return Err(Error::Integration {
            t: sol.t,
            reason: "trajectory escaped on the side opposite to the sign of its initial velocity".into(),
            partial: Vec::new(),
        });
    }
    let threshold = if lower { x_lo } else { x_hi } - x0;
    let seg = *sol.last_segment().expect("a stopped run has at least one step");
    let escape = brent(|v| seg.eval(v)[0] - threshold, seg.t0, seg.t1(), 1e-15, 200)
        .map(|r| r.x)
        .unwrap_or(sol.t);
    let x_escape = threshold + x0;

    let tails = Tails::new(profile);
    let t_prime_ode = match config.mode {
        FlowMode::Rmcf => {
            let sigma_star = escape + tails.rmcf_remaining(x_escape, lower);
            -config.t_horizon * (-sigma_star).exp_m1()
        }
        FlowMode::Mcf => escape + tails.mcf_remaining(x_escape, lower),
    };
    let t_escape = match config.mode {
        FlowMode::Rmcf => -config.t_horizon * (-escape).exp_m1(),
        FlowMode::Mcf => escape,
    };

    let mut traj = FlowTrajectory {
        mode: config.mode,
        r0,
        t_horizon: config.t_horizon,
        samples: Vec::new(),
        target: if lower { CollapseTarget::S0 } else { CollapseTarget::SInfinity },
        t_prime_ode,
        t_prime_quadrature,
        type_i_constant: None,
        type_one: None,
        escape_time: Some(escape),
        dense: Some(sol),
        k: profile.k(),
    };
    let tau_min = t_prime_ode - t_escape;
    if !(tau_min > 0.0) {
        return Err(Error::Integration {
            t: t_escape,
            reason: format!("non-positive remaining time {tau_min:e} at escape"),
            partial: Vec::new(),
        });
    }
    traj.samples = resample(&traj, profile, config.samples, tau_min, t_prime_ode)?;
    let report = type_one_rate(&traj, profile)?;
    traj.type_i_constant = Some(report.curvature);
    traj.type_one = Some(report);
    Ok(traj)
}

/// Samples at `t = T' - τ` with `τ` log-spaced from `T'` down to `tau_min`.
fn resample(traj: &FlowTrajectory, profile: &SolitonProfile, count: usize, tau_min: f64, t_prime: f64) -> Result<Vec<FlowSample>> {
    let ratio = (tau_min / t_prime).ln();
    let taus: Vec<f64> = (0..count)
        .map(|j| {
            if j == 0 {
                t_prime
            } else if j + 1 == count {
                tau_min
            } else {
                t_prime * (ratio * j as f64 / (count - 1) as f64).exp()
            }
        })
        .collect();
    taus.iter().map(|&tau| sample_at(traj, profile, t_prime - tau)).collect()
}

fn sample_at(traj: &FlowTrajectory, profile: &SolitonProfile, t: f64) -> Result<FlowSample> {
    let c = profile.c;
    let dense = traj.dense.as_ref().expect("collapsing trajectories keep their dense output");
    let kernel = profile.kernel();
    let (sigma, xi) = match traj.mode {
        FlowMode::Rmcf => {
            let sigma = -(-t / traj.t_horizon).ln_1p();
            (Some(sigma), dense.eval(sigma)[0])
        }
        FlowMode::Mcf => (None, dense.eval(t)[0]),
    };
    let r = traj.r0 * xi.exp();
    let m = moment_of_radius(profile, r)?;
    let lambda = lambda_at(kernel, &m);
    let a2 = norm_a2_at(kernel, &m);
    let (h, a2) = match traj.mode {
        FlowMode::Rmcf => {
            let s = sigma.unwrap_or(0.0);
            ((xi - 0.5 * c * s).exp(), a2 / (2.0 * (traj.t_horizon - t)))
        }
        FlowMode::Mcf => (xi.exp(), a2),
    };
    Ok(FlowSample { t, sigma, r, h, lambda, a2 })
}

fn stationary(profile: &SolitonProfile, config: &FlowConfig, r_crit: f64) -> FlowTrajectory {
    let c = profile.c;
    let kernel = profile.kernel();
    let m = moment_of_radius(profile, r_crit).expect("critical radius lies inside the profile");
    let lambda = lambda_at(kernel, &m);
    let a2 = norm_a2_at(kernel, &m);
    let count = config.samples;
    let span = config.stationary_span;
    let mut samples = Vec::with_capacity(count);
    for j in 0..count {
        let var = span * j as f64 / (count - 1) as f64;
        let sample = match config.mode {
            FlowMode::Rmcf => {
                let t = -config.t_horizon * (-var).exp_m1();
                let remaining = config.t_horizon * (-var).exp();
                FlowSample {
                    t,
                    sigma: Some(var),
                    r: config.r0,
                    h: (-0.5 * c * var).exp(),
                    lambda,
                    a2: a2 / (2.0 * remaining),
                }
            }
            FlowMode::Mcf => FlowSample {
                t: var,
                sigma: None,
                r: config.r0,
                h: 1.0,
                lambda,
                a2,
            },
        };
        samples.push(sample);
    }
    let (t_prime, constant) = match config.mode {
        FlowMode::Rmcf => (config.t_horizon, Some(0.5 * a2)),
        FlowMode::Mcf => (f64::INFINITY, None),
    };
    FlowTrajectory {
        mode: config.mode,
        r0: config.r0,
        t_horizon: config.t_horizon,
        samples,
        target: CollapseTarget::Stationary,
        t_prime_ode: t_prime,
        t_prime_quadrature: t_prime,
        type_i_constant: constant,
        type_one: None,
        escape_time: None,
        dense: None,
        k: profile.k(),
    }
}

fn final_decade_sups(traj: &FlowTrajectory, samples: &[FlowSample]) -> (f64, f64) {
    let t_prime = traj.t_prime_ode;
    let tau_min = samples.iter().map(|s| t_prime - s.t).fold(f64::INFINITY, f64::min);
    let k2 = 2.0 * traj.k as f64;
    let sign = match traj.target {
        CollapseTarget::S0 => -1.0,
        _ => 1.0,
    };
    let mut curv: f64 = 0.0;
    let mut rad: f64 = 0.0;
    for s in samples {
        let tau = t_prime - s.t;
        if tau > 10.0 * tau_min {
            continue;
        }
        let size = match traj.mode {
            FlowMode::Rmcf => s.r,
            FlowMode::Mcf => s.h,
        };
        curv = curv.max(tau * s.a2);
        rad = rad.max(tau * size.powf(sign * k2));
    }
    (curv, rad)
}

/// Type-I products over the final decade, and their change when the
/// trajectory is resampled twice as densely.
pub fn type_one_rate(traj: &FlowTrajectory, profile: &SolitonProfile) -> Result<TypeOneReport> {
    if traj.target == CollapseTarget::Stationary {
        return Err(Error::TypeOne("stationary trajectories do not collapse".into()));
    }
    let (curvature, radius) = final_decade_sups(traj, &traj.samples);
    let t_prime = traj.t_prime_ode;
    let tau_min = traj.samples.iter().map(|s| t_prime - s.t).fold(f64::INFINITY, f64::min);
    let refined = resample(traj, profile, 2 * traj.samples.len(), tau_min, t_prime)?;
    let (curvature_refined, radius_refined) = final_decade_sups(traj, &refined);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let drift = rel(curvature_refined, curvature).max(rel(radius_refined, radius));
    let report = TypeOneReport {
        curvature,
        radius,
        curvature_refined,
        radius_refined,
        drift,
    };
    if !(curvature.is_finite() && radius.is_finite() && curvature > 0.0 && radius > 0.0) || !(drift < 0.05) {
        return Err(Error::TypeOne(format!(
            "Type-I products are not stable over the final decade: {report:?}"
        )));
    }
    Ok(report)
}

/// Largest `|ln(R/r0)|` reached by the raw ODE over `[0, span]`, bypassing
/// the stationary branch.
pub fn ode_drift(profile: &SolitonProfile, mode: FlowMode, r0: f64, span: f64, tol: f64) -> f64 {
    let c = profile.c;
    let x0 = r0.ln();
    let (factor, shift) = match mode {
        FlowMode::Rmcf => (0.5 * c, 1.0),
        FlowMode::Mcf => (c, 0.0),
    };
    let opts = ode::Options {
        rtol: tol,
        atol: tol,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let _ = ode::integrate(
        |_, y: &[f64; 1]| [factor * (lambda_of_log_radius(profile, x0 + y[0]) + shift)],
        0.0,
        [0.0],
        span,
        &opts,
        |_, y| {
            worst = worst.max(y[0].abs());
            false
        },
    );
    worst
}
