//! Radius-dependent geometry of the round lens spaces `L(k;1)(r)`.
//!
//! Everything is evaluated in the moment coordinate `(W, V)`; the profile's
//! closed form is used at any radius, including radii beyond the grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soliton::{Kernel, Moment, PointSpec, RadialPoint, Side, SolitonProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    pub r: f64,
    pub s: f64,
    pub w: f64,
    pub v: f64,
    pub dv_dw: f64,
    pub lambda: f64,
    pub norm_a2: f64,
    pub norm_h2: f64,
    pub p: f64,
    pub p_prime: f64,
    pub p_double_prime: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSpectrum {
    pub h_v1: f64,
    pub h_w: f64,
    pub grad_norm2: f64,
    pub trace_top: f64,
}

/// `n - W + cV + (n-1) V/W`.
pub fn lambda_bracket(kernel: &Kernel, m: &Moment, v: f64) -> f64 {
    let n1 = kernel.n() as f64 - 1.0;
    kernel.n_minus_w(m) + kernel.c() * v + n1 * v / m.w
}

/// `λ` at a moment coordinate.
pub fn lambda_at(kernel: &Kernel, m: &Moment) -> f64 {
    let v = kernel.v(m);
    -lambda_bracket(kernel, m, v) / (2.0 * kernel.c() * v)
}

/// `dλ/dW` in closed form.
pub fn dlambda_dw(kernel: &Kernel, m: &Moment) -> f64 {
    let c = kernel.c();
    let n1 = kernel.n() as f64 - 1.0;
    let v = kernel.v(m);
    let dv = kernel.dv_dw_with(m, v);
    let br = lambda_bracket(kernel, m, v);
    let dbr = -1.0 + c * dv + n1 * (dv / m.w - v / (m.w * m.w));
    -(dbr * v - br * dv) / (2.0 * c * v * v)
}

/// `|A(ι_r)|²` at a moment coordinate.
pub fn norm_a2_at(kernel: &Kernel, m: &Moment) -> f64 {
    let n1 = kernel.n() as f64 - 1.0;
    let v = kernel.v(m);
    let dv = kernel.dv_dw_with(m, v);
    let q = v / m.w;
    (dv * dv + 2.0 * n1 * q * q) / (2.0 * v)
}

/// `P` from its defining combination of `s`, `u'`, `u''` and `u`.
pub fn potential_at(profile: &SolitonProfile, m: &Moment, s: f64) -> f64 {
    let nf = profile.n() as f64;
    let v = profile.v(m);
    -nf * s + (nf - 1.0) * m.w.ln() + v.ln() + profile.u_of(m, s)
}

/// Limits of `P` at `r → 0` and `r → ∞`.
pub fn potential_bounds(profile: &SolitonProfile) -> (f64, f64) {
    let k = profile.k() as f64;
    let a = profile.kernel().lower_end();
    let nf = profile.n() as f64;
    let lo = (k * k * profile.a1).ln() + (nf - 1.0) * a.ln();
    (lo, lo + 2.0 * profile.c * k)
}

fn state_from_point(profile: &SolitonProfile, pt: &RadialPoint) -> RadialState {
    let kernel = profile.kernel();
    let c = profile.c;
    let m = &pt.moment;
    let v = pt.v;
    let dv = kernel.dv_dw_with(m, v);
    let lambda = -lambda_bracket(kernel, m, v) / (2.0 * c * v);
    let norm_a2 = norm_a2_at(kernel, m);
    let p = potential_at(profile, m, pt.s);
    RadialState {
        r: pt.r,
        s: pt.s,
        w: pt.w,
        v,
        dv_dw: dv,
        lambda,
        norm_a2,
        norm_h2: lambda * lambda * 2.0 * c * c * v,
        p,
        p_prime: c * v,
        p_double_prime: c * v * dv,
        gamma: p,
    }
}

fn check_state(st: &RadialState) -> Result<RadialState> {
    if !(st.v > 0.0) || !st.lambda.is_finite() || !st.norm_a2.is_finite() {
        return Err(Error::Domain(format!(
            "radius r = {:e} is beyond the representable range of the profile",
            st.r
        )));
    }
    Ok(*st)
}

/// All scalar geometry of `L(k;1)(r)`.
pub fn radial_state(profile: &SolitonProfile, r: f64) -> Result<RadialState> {
    let pt = profile.coordinate_convert(PointSpec::Radius(r))?;
    check_state(&state_from_point(profile, &pt))
}

/// As [`radial_state`] for a moment coordinate `W` in the open interval.
pub fn radial_state_at_w(profile: &SolitonProfile, w: f64) -> Result<RadialState> {
    let pt = profile.coordinate_convert(PointSpec::Moment(w))?;
    check_state(&state_from_point(profile, &pt))
}

/// `|H(ι_r)|² = λ² |∇f|²`.
pub fn mean_curvature_norm2(profile: &SolitonProfile, r: f64) -> Result<f64> {
    Ok(radial_state(profile, r)?.norm_h2)
}

/// Radius whose lens space is the level set `{f = γ}`.
///
/// `P` increases from `P(-∞)` to `P(+∞)`; values outside that open range
/// have no level set.
pub fn level_set_radius(profile: &SolitonProfile, gamma: f64) -> Result<f64> {
    let (lo, hi) = potential_bounds(profile);
    if !(gamma > lo && gamma < hi) {
        return Err(Error::Domain(format!(
            "level {gamma} outside the range ({lo}, {hi}) of the potential"
        )));
    }
    let kernel = profile.kernel();
    let c = profile.c;
    let k = kernel.k();
    // P = P(-∞) + c (W - (n-k)) exactly; polish against the defining formula
    let (side, mut x) = if gamma - lo <= c * k {
        (Side::Lower, (gamma - lo) / c)
    } else {
        (Side::Upper, (hi - gamma) / c)
    };
    for _ in 0..4 {
        let m = kernel.moment_at_offset(side, x);
        let s = profile.s_of(&m);
        let p = potential_at(profile, &m, s);
        let dx = side.sign() * (gamma - p) / c;
        x += dx;
        if dx.abs() <= 1e-16 * x {
            break;
        }
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!("level {gamma} too close to the end of the potential range")));
    }
    let m = kernel.moment_at_offset(side, x);
    Ok((0.5 * profile.s_of(&m)).exp())
}

/// The Hermitian metric matrix at `z`, its inverse and its determinant.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub g: DMatrix<Complex64>,
    pub inverse: DMatrix<Complex64>,
    pub det: f64,
}

pub fn metric_at(profile: &SolitonProfile, z: &[Complex64]) -> Result<MetricAt> {
    let n = profile.n() as usize;
    if z.len() != n {
        return Err(Error::Domain(format!("expected a point of C^{n}, got {} components", z.len())));
    }
    let norm2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    if !(norm2 > 0.0) {
        return Err(Error::Domain("the metric is not defined at z = 0".into()));
    }
    let s = norm2.ln();
    let pt = profile.coordinate_convert(PointSpec::LogSquareRadius(s))?;
    let (w, v) = (pt.w, pt.v);
    let es = (-s).exp();
    let g = DMatrix::from_fn(n, n, |a, b| {
        let diag = if a == b { es * w } else { 0.0 };
        Complex64::new(diag, 0.0) + z[a].conj() * z[b] * (es * es * (v - w))
    });
    // g^{αβ̄} indexed so that g * inverse = I
    let inverse = DMatrix::from_fn(n, n, |a, b| {
        let diag = if a == b { norm2 / w } else { 0.0 };
        Complex64::new(diag, 0.0) + z[a] * z[b].conj() * (1.0 / v - 1.0 / w)
    })
    .transpose();
    let det = (-(n as f64) * s).exp() * w.powi(n as i32 - 1) * v;
    Ok(MetricAt { g, inverse, det })
}

/// Eigenvalues of `Hess f` on the tangent space of `L(k;1)(r)` and `|∇f|²`.
pub fn hessian_spectrum(profile: &SolitonProfile, r: f64) -> Result<HessianSpectrum> {
    let st = radial_state(profile, r)?;
    Ok(spectrum_of(profile, &st))
}

pub fn spectrum_of(profile: &SolitonProfile, st: &RadialState) -> HessianSpectrum {
    let c = profile.c;
    let n1 = profile.n() as f64 - 1.0;
    let h_v1 = st.p_double_prime / st.v;
    let h_w = st.p_prime / st.w;
    HessianSpectrum {
        h_v1,
        h_w,
        grad_norm2: 2.0 * c * c * st.v,
        trace_top: h_v1 + 2.0 * n1 * h_w,
    }
}

/// Leading-order `λ` as `r → 0`.
pub fn lambda_tail_zero(profile: &SolitonProfile, r: f64) -> f64 {
    let k = profile.k() as f64;
    -r.powf(-2.0 * k) / (2.0 * profile.c * profile.a1 * k)
}

/// Leading-order `λ` as `r → ∞`.
pub fn lambda_tail_infinity(profile: &SolitonProfile, r: f64) -> f64 {
    let k = profile.k() as f64;
    r.powf(2.0 * k) / (2.0 * profile.c * profile.b1 * k)
}

/// Leading-order `|A|²` as `r → 0`.
pub fn norm_a2_tail_zero(profile: &SolitonProfile, r: f64) -> f64 {
    let k = profile.k() as f64;
    r.powf(-2.0 * k) / (2.0 * profile.a1)
}

/// Leading-order `|A|²` as `r → ∞`.
pub fn norm_a2_tail_infinity(profile: &SolitonProfile, r: f64) -> f64 {
    let k = profile.k() as f64;
    r.powf(2.0 * k) / (2.0 * profile.b1)
}

/// Radii of the first and last grid node.
pub fn grid_radius_range(profile: &SolitonProfile) -> (f64, f64) {
    let s = &profile.s_values;
    ((0.5 * s[0]).exp(), (0.5 * s[s.len() - 1]).exp())
}

/// Relative mismatch between the profile and the leading tails at the grid edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendMismatch {
    pub lambda_zero: f64,
    pub lambda_infinity: f64,
    pub norm_a2_zero: f64,
    pub norm_a2_infinity: f64,
}

impl BlendMismatch {
    pub fn max(&self) -> f64 {
        self.lambda_zero
            .max(self.lambda_infinity)
            .max(self.norm_a2_zero)
            .max(self.norm_a2_infinity)
    }
}

pub fn blend_mismatch(profile: &SolitonProfile) -> Result<BlendMismatch> {
    let (r_lo, r_hi) = grid_radius_range(profile);
    let lo = radial_state(profile, r_lo)?;
    let hi = radial_state(profile, r_hi)?;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    Ok(BlendMismatch {
        lambda_zero: rel(lo.lambda, lambda_tail_zero(profile, r_lo)),
        lambda_infinity: rel(hi.lambda, lambda_tail_infinity(profile, r_hi)),
        norm_a2_zero: rel(lo.norm_a2, norm_a2_tail_zero(profile, r_lo)),
        norm_a2_infinity: rel(hi.norm_a2, norm_a2_tail_infinity(profile, r_hi)),
    })
}

/// Log-spaced radius sweep, evaluated on scoped worker threads.
pub fn sweep(profile: &SolitonProfile, r_min: f64, r_max: f64, count: usize) -> Result<Vec<RadialState>> {
    if !(r_min > 0.0 && r_max > r_min && count >= 2) {
        return Err(Error::Domain(format!(
            "sweep needs 0 < r_min < r_max and count >= 2 (got {r_min}, {r_max}, {count})"
        )));
    }
    let radii: Vec<f64> = (0..count)
        .map(|i| (r_min.ln() + (r_max / r_min).ln() * i as f64 / (count - 1) as f64).exp())
        .collect();
    par_map(&radii, |&r| radial_state(profile, r)).into_iter().collect()
}

/// Order-preserving parallel map over a slice.
pub(crate) fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync>(items: &[T], f: F) -> Vec<U> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::SolitonParams;
    use std::sync::OnceLock;

    fn profile21() -> &'static SolitonProfile {
        static P: OnceLock<SolitonProfile> = OnceLock::new();
        P.get_or_init(|| SolitonProfile::build(&SolitonParams::new(2, 1)).unwrap())
    }

    #[test]
    fn reference_values_at_unit_radius() {
        let st = radial_state(profile21(), 1.0).unwrap();
        assert!((st.v - 0.467_325_877_831_358_64).abs() < 1e-14);
        assert!((st.lambda + 0.973_826_290_674_048_08).abs() < 1e-12);
        assert!((st.gamma - st.p).abs() == 0.0);
    }

    #[test]
    fn lambda_matches_spectrum_trace() {
        let p = profile21();
        for &r in &[0.3, 0.987_720_823_090_222, 1.0, 1.536_732_144_381_32, 3.0] {
            let st = radial_state(p, r).unwrap();
            let h = spectrum_of(p, &st);
            assert!((-h.trace_top / h.grad_norm2 - st.lambda).abs() < 1e-10 * st.lambda.abs().max(1.0));
            assert!(h.h_w > 0.0);
            assert_eq!(h.trace_top, h.h_v1 + 2.0 * h.h_w);
        }
    }

    #[test]
    fn norm_a2_at_first_critical_radius() {
        let st = radial_state(profile21(), 0.987_720_823_090_222).unwrap();
        assert!((st.norm_a2 - 0.118_710_278_107_229_35).abs() < 1e-11);
    }

    #[test]
    fn holomorphy_identity_for_potential() {
        let p = profile21();
        let (lo, hi) = potential_bounds(p);
        for &r in &[0.05, 0.5, 1.0, 2.0, 9.0] {
            let st = radial_state(p, r).unwrap();
            let want = lo + p.c * (st.w - 1.0);
            assert!((st.p - want).abs() < 1e-12, "r = {r}: {} vs {want}", st.p);
            assert!(st.p > lo && st.p < hi);
        }
    }

    #[test]
    fn potential_limits_are_consistent_at_both_ends() {
        let p = profile21();
        let (_, hi) = potential_bounds(p);
        let far = radial_state(p, 300.0).unwrap();
        let y = 3.0 - far.w;
        assert!(y < 1e-4);
        assert!((far.p - (hi - p.c * y)).abs() < 1e-11, "{} vs {}", far.p, hi - p.c * y);
    }

    #[test]
    fn level_sets_round_trip() {
        let p = profile21();
        for &r in &[0.5, 1.0, 2.0] {
            let g = radial_state(p, r).unwrap().gamma;
            let back = level_set_radius(p, g).unwrap();
            assert!((back - r).abs() < 1e-10 * r, "{r} -> {back}");
        }
        assert!(level_set_radius(p, potential_bounds(p).1 + 1.0).is_err());
    }

    #[test]
    fn metric_on_axis_and_inverse() {
        let p = profile21();
        let z = [Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.0)];
        let m = metric_at(p, &z).unwrap();
        let st = radial_state(p, 0.8).unwrap();
        let es = (-st.s).exp();
        assert!((m.g[(0, 0)].re - es * st.v).abs() < 1e-12);
        assert!((m.g[(1, 1)].re - es * st.w).abs() < 1e-12);
        assert!(m.g[(0, 1)].norm() < 1e-15);

        let z = [Complex64::new(0.3, -0.7), Complex64::new(1.1, 0.4)];
        let m = metric_at(p, &z).unwrap();
        let id = &m.g * &m.inverse;
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((id[(a, b)] - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
        let det = m.g.determinant();
        assert!((det.re - m.det).abs() < 1e-10 * m.det && det.im.abs() < 1e-10 * m.det);
    }

    #[test]
    fn blend_mismatch_is_small() {
        let b = blend_mismatch(profile21()).unwrap();
        assert!(b.max() < 5e-3, "{b:?}");
    }

    #[test]
    fn sweep_is_ordered() {
        let states = sweep(profile21(), 0.1, 10.0, 33).unwrap();
        assert_eq!(states.len(), 33);
        assert!(states.windows(2).all(|w| w[1].r > w[0].r && w[1].lambda > w[0].lambda));
    }

    #[test]
    fn rejects_nonpositive_radius() {
        assert!(matches!(radial_state(profile21(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(radial_state(profile21(), -1.0), Err(Error::Domain(_))));
    }
}
