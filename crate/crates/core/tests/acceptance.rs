//! Acceptance run: one PASS/FAIL line per criterion.

use std::process::ExitCode;

use lensflow::critical::{
    find_critical_radii, loglog_slope, shrinker_expander_classification, tail_radii, CriticalRadii, SelfSimilarKind,
};
use lensflow::flow::{self, CollapseTarget, FlowConfig, FlowMode, FlowTrajectory};
use lensflow::geometry::{self, radial_state};
use lensflow::report::{table1, table_matches_expected};
use lensflow::soliton::{soliton_constant_residual, solve_soliton_constant, SolitonParams, SolitonProfile};
use lensflow::validation::{
    self, brute_force_h_ode, h_ode_deviation, ode_residual_scan, probe_points, soliton_equation_residual_fd_with,
    FdSteps,
};

const MATRIX: [(u32, u32); 5] = [(2, 1), (3, 1), (3, 2), (4, 2), (5, 3)];

struct Case {
    n: u32,
    k: u32,
    profile: SolitonProfile,
    crit: CriticalRadii,
}

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn rmcf_radii(cr: &CriticalRadii) -> [f64; 6] {
    [0.5 * cr.r1, 0.9 * cr.r1, 1.1 * cr.r1, 0.5 * (cr.r1 + cr.r2), cr.r2, 2.0 * cr.r2]
}

fn mcf_radii(cr: &CriticalRadii) -> [f64; 4] {
    [0.5 * cr.r2, 0.9 * cr.r2, 1.1 * cr.r2, 2.0 * cr.r2]
}

fn run(case: &Case, mode: FlowMode, r0: f64) -> Result<FlowTrajectory, String> {
    let cfg = FlowConfig::new(mode, r0, 1.0);
    flow::integrate_with(&case.profile, &cfg, &case.crit).map_err(|e| format!("({},{}) {mode} r0={r0}: {e}", case.n, case.k))
}

fn soliton_constant() -> Outcome {
    let p = SolitonParams::new(2, 1);
    let i0 = soliton_constant_residual(0.0, &p).map_err(|e| e.to_string())?;
    let i1 = soliton_constant_residual(1.0, &p).map_err(|e| e.to_string())?;
    check((i0 + 2.0 / 3.0).abs() < 1e-12, format!("I(0) = {i0}"))?;
    check((i1 - (9.0 * (-3.0f64).exp() - (-1.0f64).exp())).abs() < 1e-12, format!("I(1) = {i1}"))?;
    let mut worst: f64 = 0.0;
    for (n, k) in MATRIX {
        let p = SolitonParams::new(n, k);
        let c = solve_soliton_constant(&p).map_err(|e| e.to_string())?;
        check(c > 0.0 && c < 1.0, format!("({n},{k}) c = {c}"))?;
        let r = soliton_constant_residual(c, &p).map_err(|e| e.to_string())?.abs();
        check(r < 1e-12, format!("({n},{k}) |I(c)| = {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("max |I(c)| = {worst:.1e}"))
}

fn construction(cases: &[Case]) -> Outcome {
    let mut scan: f64 = 0.0;
    for case in cases {
        let s = ode_residual_scan(&case.profile).map_err(|e| e.to_string())?;
        scan = scan.max(s.ode_residual_sup).max(s.holomorphy_residual_sup);
    }
    check(scan < validation::ODE_TOL, format!("scan sup {scan:e}"))?;
    let base = &cases[0].profile;
    let (mut fd, mut corrupted): (f64, f64) = (0.0, 0.0);
    for z in probe_points(2, validation::PROBE_COUNT, validation::DEFAULT_SEED) {
        let r = soliton_equation_residual_fd_with(base, &z, FdSteps::default()).map_err(|e| e.to_string())?;
        fd = fd.max(r.residual);
        corrupted = corrupted.max(r.corrupted_residual);
    }
    check(fd < validation::FD_TOL, format!("fd residual {fd:e}"))?;
    check(
        corrupted > validation::CORRUPTION_THRESHOLD,
        format!("scan {scan:.1e}, fd {fd:.1e} ok; corruption probe residual {corrupted:.2e} not above 1e-3"),
    )?;
    Ok(format!("scan {scan:.1e}, fd {fd:.1e}, corrupted {corrupted:.1e}"))
}

fn critical_radii(cases: &[Case]) -> Outcome {
    use SelfSimilarKind::*;
    for case in cases {
        let (p, cr) = (&case.profile, &case.crit);
        let tag = format!("({},{})", case.n, case.k);
        let l1 = radial_state(p, cr.r1).map_err(|e| e.to_string())?.lambda;
        let l2 = radial_state(p, cr.r2).map_err(|e| e.to_string())?.lambda;
        check((l1 + 1.0).abs() < 1e-10, format!("{tag} λ(r1) = {l1}"))?;
        check(l2.abs() < 1e-10, format!("{tag} λ(r2) = {l2}"))?;
        check(cr.r1 < cr.r2, format!("{tag} r1 >= r2"))?;
        check(cr.dlambda_dr_at_r1 > 0.0 && cr.dlambda_dr_at_r2 > 0.0, format!("{tag} slopes"))?;
        let lam: Vec<f64> = p
            .moments()
            .iter()
            .map(|m| geometry::lambda_at(p.kernel(), m))
            .collect();
        let plus: Vec<f64> = lam.iter().map(|l| l + 1.0).collect();
        check(lensflow_sign_changes(&lam) == 1, format!("{tag} λ sign changes"))?;
        check(lensflow_sign_changes(&plus) == 1, format!("{tag} λ+1 sign changes"))?;
        let samples = [
            (0.25 * cr.r1, f64::NEG_INFINITY, -1.0, SelfShrinker),
            (0.5 * cr.r1, f64::NEG_INFINITY, -1.0, SelfShrinker),
            (0.5 * (cr.r1 + cr.r2), -1.0, 0.0, SelfShrinker),
            (1.5 * cr.r2, 0.0, f64::INFINITY, SelfExpander),
            (4.0 * cr.r2, 0.0, f64::INFINITY, SelfExpander),
        ];
        for (r, lo, hi, kind) in samples {
            let l = radial_state(p, r).map_err(|e| e.to_string())?.lambda;
            check(l > lo && l < hi, format!("{tag} λ({r}) = {l} outside ({lo}, {hi})"))?;
            let got = shrinker_expander_classification(p, r).map_err(|e| e.to_string())?;
            check(got == kind, format!("{tag} r = {r} classified {got}"))?;
        }
        let got = shrinker_expander_classification(p, cr.r2).map_err(|e| e.to_string())?;
        check(got == Minimal, format!("{tag} r2 classified {got}"))?;
    }
    Ok("all cases".into())
}

fn lensflow_sign_changes(v: &[f64]) -> usize {
    v.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count()
}

fn asymptotics(cases: &[Case]) -> Outcome {
    let mut worst_slope: f64 = 0.0;
    let mut worst_coef: f64 = 0.0;
    for case in cases {
        let p = &case.profile;
        let tag = format!("({},{})", case.n, case.k);
        let two_k = 2.0 * case.k as f64;
        let (zero, inf) = tail_radii(p, 8);
        let states = |rs: &[f64]| -> Result<Vec<_>, String> {
            rs.iter().map(|&r| radial_state(p, r).map_err(|e| e.to_string())).collect()
        };
        let sz = states(&zero)?;
        let si = states(&inf)?;
        let slopes = [
            (loglog_slope(&zero, &sz.iter().map(|s| -s.lambda).collect::<Vec<_>>()), -two_k),
            (loglog_slope(&inf, &si.iter().map(|s| s.lambda).collect::<Vec<_>>()), two_k),
            (loglog_slope(&zero, &sz.iter().map(|s| s.norm_a2).collect::<Vec<_>>()), -two_k),
            (loglog_slope(&inf, &si.iter().map(|s| s.norm_a2).collect::<Vec<_>>()), two_k),
        ];
        for (got, want) in slopes {
            let e = rel(got, want);
            check(e < 0.01, format!("{tag} slope {got} vs {want}"))?;
            worst_slope = worst_slope.max(e);
        }
        let r = zero[zero.len() - 1];
        let coef = sz[sz.len() - 1].lambda * r.powf(two_k);
        let want = -1.0 / (2.0 * p.c * p.a1 * case.k as f64);
        let e = rel(coef, want);
        check(e < 0.005, format!("{tag} λ r^2k = {coef} vs {want}"))?;
        worst_coef = worst_coef.max(e);
    }
    Ok(format!("slope error {worst_slope:.1e}, coefficient error {worst_coef:.1e}"))
}

fn rmcf_bifurcation(cases: &[Case]) -> Outcome {
    let expected = [
        CollapseTarget::S0,
        CollapseTarget::S0,
        CollapseTarget::SInfinity,
        CollapseTarget::SInfinity,
        CollapseTarget::SInfinity,
        CollapseTarget::SInfinity,
    ];
    let mut drift: f64 = 0.0;
    for case in cases {
        let tag = format!("({},{})", case.n, case.k);
        for (r0, want) in rmcf_radii(&case.crit).into_iter().zip(expected) {
            let t = run(case, FlowMode::Rmcf, r0)?;
            check(t.target == want, format!("{tag} r0 = {r0}: {} instead of {want}", t.target))?;
            check(t.t_prime_ode < 1.0, format!("{tag} r0 = {r0}: T' = {}", t.t_prime_ode))?;
        }
        let t = run(case, FlowMode::Rmcf, case.crit.r1)?;
        check(t.target == CollapseTarget::Stationary, format!("{tag} r1 not stationary"))?;
        check(t.t_prime_ode == 1.0, format!("{tag} r1: T' = {}", t.t_prime_ode))?;
        let last = t.samples.last().and_then(|s| s.sigma).unwrap_or(0.0);
        check(last >= 20.0, format!("{tag} r1 trajectory ends at σ = {last}"))?;
        for s in &t.samples {
            drift = drift.max((s.r / case.crit.r1).ln().abs());
        }
        check(drift < 1e-6, format!("{tag} |log(R/r1)| = {drift:e}"))?;
    }
    Ok(format!("max |log(R/r1)| = {drift:.1e}"))
}

fn maximal_time(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for case in cases {
        let jobs = rmcf_radii(&case.crit)
            .map(|r| (FlowMode::Rmcf, r))
            .into_iter()
            .chain(mcf_radii(&case.crit).map(|r| (FlowMode::Mcf, r)));
        for (mode, r0) in jobs {
            let t = run(case, mode, r0)?;
            let e = rel(t.t_prime_ode, t.t_prime_quadrature);
            check(
                e < 1e-6,
                format!("({},{}) {mode} r0 = {r0}: {} vs {}", case.n, case.k, t.t_prime_ode, t.t_prime_quadrature),
            )?;
            worst = worst.max(e);
        }
    }
    Ok(format!("max relative difference {worst:.1e}"))
}

fn type_one(cases: &[Case]) -> Outcome {
    let mut worst_const: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for case in cases {
        let tag = format!("({},{})", case.n, case.k);
        let p = &case.profile;
        let t = run(case, FlowMode::Rmcf, case.crit.r1)?;
        let want = 0.5 * radial_state(p, case.crit.r1).map_err(|e| e.to_string())?.norm_a2;
        for s in &t.samples {
            // T - t = T e^{-σ}, which avoids cancellation in 1 - t near the end
            let prod = (-s.sigma.unwrap_or(f64::NAN)).exp() * s.a2;
            let e = rel(prod, want);
            check(e < 1e-8, format!("{tag} (T-t)|A|² = {prod} vs {want}"))?;
            worst_const = worst_const.max(e);
        }
        let reported = t.type_i_constant.unwrap_or(f64::NAN);
        check(rel(reported, want) < 1e-8, format!("{tag} reported constant {reported}"))?;
        let jobs = rmcf_radii(&case.crit)
            .map(|r| (FlowMode::Rmcf, r))
            .into_iter()
            .chain([0.9, 1.1].map(|f| (FlowMode::Mcf, f * case.crit.r2)));
        for (mode, r0) in jobs {
            let t = run(case, mode, r0)?;
            let rep = flow::type_one_rate(&t, p).map_err(|e| format!("{tag} {mode} r0 = {r0}: {e}"))?;
            check(
                rep.curvature.is_finite() && rep.radius.is_finite() && rep.drift < 0.05,
                format!("{tag} {mode} r0 = {r0}: {rep:?}"),
            )?;
            worst_drift = worst_drift.max(rep.drift);
        }
    }
    Ok(format!("stationary constant error {worst_const:.1e}, refinement drift {:.2}%", 100.0 * worst_drift))
}

fn mcf_bifurcation(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for case in cases {
        let tag = format!("({},{})", case.n, case.k);
        let t = run(case, FlowMode::Mcf, case.crit.r2)?;
        check(t.target == CollapseTarget::Stationary, format!("{tag} r2 not stationary"))?;
        check(t.t_prime_ode.is_infinite(), format!("{tag} r2: T' = {}", t.t_prime_ode))?;
        let last = t.samples.last().map_or(0.0, |s| s.t);
        check(last >= 10.0, format!("{tag} r2 trajectory ends at t = {last}"))?;
        for s in &t.samples {
            worst = worst.max((s.h - 1.0).abs());
        }
        check(worst < 1e-8, format!("{tag} |h-1| = {worst:e}"))?;
        for (f, want) in [(0.9, CollapseTarget::S0), (1.1, CollapseTarget::SInfinity)] {
            let t = run(case, FlowMode::Mcf, f * case.crit.r2)?;
            check(t.target == want, format!("{tag} {f} r2: {}", t.target))?;
            check(t.t_prime_ode.is_finite(), format!("{tag} {f} r2: infinite T'"))?;
            let rep = flow::type_one_rate(&t, &case.profile).map_err(|e| format!("{tag} {f} r2: {e}"))?;
            check(rep.curvature.is_finite() && rep.radius.is_finite(), format!("{tag} {f} r2: {rep:?}"))?;
        }
    }
    Ok(format!("max |h-1| = {worst:.1e}"))
}

fn dual_integrator(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_stat: f64 = 0.0;
    for case in cases {
        let tag = format!("({},{})", case.n, case.k);
        for f in [0.9, 1.1] {
            let d = h_ode_deviation(&case.profile, &case.crit, f * case.crit.r1, 0.5).map_err(|e| format!("{tag}: {e}"))?;
            check(d < 1e-8, format!("{tag} {f} r1: deviation {d:e}"))?;
            worst = worst.max(d);
        }
        let brute = brute_force_h_ode(&case.profile, &FlowConfig::rmcf(case.crit.r1, 1.0)).map_err(|e| e.to_string())?;
        for s in &brute.samples {
            let want = (1.0 - s.t).powf(0.5 * case.profile.c);
            let e = rel(s.h, want);
            check(e < 1e-8, format!("{tag} r1: h({}) = {} vs {want}", s.t, s.h))?;
            worst_stat = worst_stat.max(e);
        }
    }
    Ok(format!("mid-life {worst:.1e}, stationary {worst_stat:.1e}"))
}

fn gauge_invariance(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for case in cases {
        let tag = format!("({},{})", case.n, case.k);
        for shift in [-0.1, 0.1] {
            let params = SolitonParams::new(case.n, case.k);
            let profile =
                SolitonProfile::build_with_gauge(&params, case.n as f64 + shift).map_err(|e| e.to_string())?;
            let crit = find_critical_radii(&profile).map_err(|e| e.to_string())?;
            let moved = Case { n: case.n, k: case.k, profile, crit };
            let scale = moved.crit.r1 / case.crit.r1;
            let mut errs = vec![
                rel(moved.profile.c, case.profile.c),
                rel(moved.crit.r2 / moved.crit.r1, case.crit.r2 / case.crit.r1),
            ];
            let (lo, hi) = geometry::grid_radius_range(&case.profile);
            for j in 0..=40 {
                let r = lo * (hi / lo).powf(j as f64 / 40.0);
                let a = radial_state(&case.profile, r).map_err(|e| e.to_string())?.lambda;
                let b = radial_state(&moved.profile, scale * r).map_err(|e| e.to_string())?.lambda;
                errs.push((a - b).abs() / a.abs().max(1.0));
            }
            for f in [0.5, 0.9, 1.1, 2.0] {
                for mode in [FlowMode::Rmcf, FlowMode::Mcf] {
                    let a = run(case, mode, f * case.crit.r1)?.t_prime_ode;
                    let b = run(&moved, mode, f * moved.crit.r1)?.t_prime_ode;
                    errs.push(rel(b, a));
                }
            }
            let e = errs.iter().cloned().fold(0.0, f64::max);
            check(e < 1e-8, format!("{tag} shift {shift}: {e:e}"))?;
            worst = worst.max(e);
        }
    }
    Ok(format!("max relative change {worst:.1e}"))
}

fn table(cases: &[Case]) -> Outcome {
    for case in cases {
        let t = table1(&case.profile, &case.crit, 1.0).map_err(|e| e.to_string())?;
        check(table_matches_expected(&t), format!("({},{}) table differs", case.n, case.k))?;
    }
    Ok("all cases match".into())
}

fn main() -> ExitCode {
    let cases: Vec<Case> = MATRIX
        .iter()
        .map(|&(n, k)| {
            let profile = SolitonProfile::build(&SolitonParams::new(n, k)).expect("profile");
            let crit = find_critical_radii(&profile).expect("critical radii");
            Case { n, k, profile, crit }
        })
        .collect();
    let criteria: [(&str, &dyn Fn() -> Outcome); 11] = [
        ("soliton constant", &soliton_constant),
        ("construction certificate", &|| construction(&cases)),
        ("critical radii", &|| critical_radii(&cases)),
        ("asymptotic rates", &|| asymptotics(&cases)),
        ("RMCF bifurcation", &|| rmcf_bifurcation(&cases)),
        ("maximal-time cross-check", &|| maximal_time(&cases)),
        ("Type I", &|| type_one(&cases)),
        ("MCF bifurcation", &|| mcf_bifurcation(&cases)),
        ("dual-integrator agreement", &|| dual_integrator(&cases)),
        ("gauge invariance", &|| gauge_invariance(&cases)),
        ("table1 report", &|| table(&cases)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
