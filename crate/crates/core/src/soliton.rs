//! Soliton constant and the profile `V(W)` in moment coordinates.
//!
//! With `W = u'(s)` and `V = u''(s)` the soliton equation becomes the linear
//! first-order problem `dV/dW = n - W - ((n-1)/W - c) V` on `[n-k, n+k]`
//! with `V = 0` at both ends. Its solution is
//! `V(W) = e^{cW} W^{1-n} ∫_{n-k}^{W} t^{n-1} e^{-ct} (n-t) dt`,
//! and `c` is fixed by requiring the integral over the whole interval to vanish.
//!
//! Points are addressed by [`Moment`], which stores the distance to the
//! nearer endpoint so that quantities such as `V` and `1/V` keep full
//! relative precision as `W` approaches `n ± k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quad::{self, gk15};
use crate::roots;

/// Terms kept in the endpoint power series.
const SERIES_TERMS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub n: u32,
    pub k: u32,
    pub grid_size: usize,
    pub tol_c: f64,
    pub tol_ode: f64,
}

impl SolitonParams {
    pub const DEFAULT_GRID: usize = 512;

    pub fn new(n: u32, k: u32) -> Self {
        Self {
            n,
            k,
            grid_size: Self::DEFAULT_GRID,
            tol_c: 1e-13,
            tol_ode: 1e-8,
        }
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("n must be at least 2 (got {})", self.n)));
        }
        if self.k < 1 || self.k > self.n - 1 {
            return Err(Error::InvalidParams(format!(
                "k must satisfy 1 <= k <= n-1 (got n = {}, k = {})",
                self.n, self.k
            )));
        }
        if self.grid_size < 64 {
            return Err(Error::InvalidParams(format!(
                "grid_size must be at least 64 (got {})",
                self.grid_size
            )));
        }
        if !(self.tol_c > 0.0 && self.tol_ode > 0.0) {
            return Err(Error::InvalidParams("tolerances must be strictly positive".into()));
        }
        Ok(())
    }

    fn lower(&self) -> f64 {
        (self.n - self.k) as f64
    }

    fn upper(&self) -> f64 {
        (self.n + self.k) as f64
    }
}

/// Which half of `[n-k, n+k]` a point lies in; `Lower` includes `W = n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => 1.0,
            Side::Upper => -1.0,
        }
    }
}

/// A moment coordinate `W` together with its distance to the nearer endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub w: f64,
    pub side: Side,
    /// `W - (n-k)` on the lower side, `(n+k) - W` on the upper side.
    pub offset: f64,
}

/// `p(t) = t^{n-1} (n - t)` as ascending coefficients.
fn p_coeffs(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[n - 1] = n as f64;
    p[n] = -1.0;
    p
}

fn poly_eval(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn poly_derivative(coef: &[f64]) -> Vec<f64> {
    coef.iter().enumerate().skip(1).map(|(i, &a)| a * i as f64).collect()
}

fn series_mul(a: &[f64], b: &[f64], terms: usize) -> Vec<f64> {
    let mut out = vec![0.0; terms];
    for (i, &ai) in a.iter().enumerate().take(terms) {
        for (j, &bj) in b.iter().enumerate().take(terms - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Power series data about one endpoint.
#[derive(Debug, Clone)]
struct EndSeries {
    sigma: f64,
    e: f64,
    /// `Q(e)` with `Q = Σ_j p^{(j)} / c^{j+1}`.
    q_e: f64,
    /// `G(x) = σ Σ_m g_m x^{m+1}` up to the factor `e^{-ce}`.
    g: Vec<f64>,
    /// `V(x)/x = Σ_m v_m x^m`.
    vhat: Vec<f64>,
    /// Offsets below which `g` is summed instead of the closed form.
    g_limit: f64,
    /// Offsets below which `vhat` is used for the regularised integrands.
    vhat_limit: f64,
}

/// Closed-form evaluation of `V` for a given constant `c`.
#[derive(Debug, Clone)]
pub struct Kernel {
    n: u32,
    nf: f64,
    kf: f64,
    c: f64,
    a: f64,
    b: f64,
    /// Coefficients of `Q(t)` in powers of `t`.
    q: Vec<f64>,
    lower: EndSeries,
    upper: EndSeries,
}

impl Kernel {
    pub fn new(params: &SolitonParams, c: f64) -> Result<Self> {
        params.validate()?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("soliton constant must be positive (got {c})")));
        }
        let n = params.n as usize;
        let p = p_coeffs(n);
        let mut q = vec![0.0; n + 1];
        let mut deriv = p.clone();
        let mut cpow = c;
        while !deriv.is_empty() {
            for (i, &d) in deriv.iter().enumerate() {
                q[i] += d / cpow;
            }
            deriv = poly_derivative(&deriv);
            cpow *= c;
        }
        let a = params.lower();
        let b = params.upper();
        let lower = Self::end_series(&p, &q, n, params.k as f64, c, a, 1.0);
        let upper = Self::end_series(&p, &q, n, params.k as f64, c, b, -1.0);
        Ok(Self {
            n: params.n,
            nf: n as f64,
            kf: params.k as f64,
            c,
            a,
            b,
            q,
            lower,
            upper,
        })
    }

    fn end_series(p: &[f64], q: &[f64], n: usize, k: f64, c: f64, e: f64, sigma: f64) -> EndSeries {
        // Taylor coefficients of p(e + σξ) in ξ
        let mut taylor = Vec::with_capacity(n + 1);
        let mut deriv = p.to_vec();
        let mut fact = 1.0;
        for i in 0..=n {
            if i > 0 {
                fact *= i as f64;
            }
            taylor.push(sigma.powi(i as i32) * poly_eval(&deriv, e) / fact);
            deriv = poly_derivative(&deriv);
        }
        let mut expo = vec![1.0; SERIES_TERMS];
        for j in 1..SERIES_TERMS {
            expo[j] = expo[j - 1] * (-c * sigma) / j as f64;
        }
        let r = series_mul(&taylor, &expo, SERIES_TERMS);
        let g: Vec<f64> = r.iter().enumerate().map(|(m, &rm)| rm / (m + 1) as f64).collect();

        // V/x = W^{1-n} e^{cσx} σ Σ g_m x^m with W = e + σx
        let alpha = 1.0 - n as f64;
        let mut binom = vec![0.0; SERIES_TERMS];
        binom[0] = e.powf(alpha);
        for j in 1..SERIES_TERMS {
            binom[j] = binom[j - 1] * (alpha - (j - 1) as f64) / j as f64 * (sigma / e);
        }
        let mut grow = vec![1.0; SERIES_TERMS];
        for j in 1..SERIES_TERMS {
            grow[j] = grow[j - 1] * (c * sigma) / j as f64;
        }
        let sg: Vec<f64> = g.iter().map(|v| sigma * v).collect();
        let vhat = series_mul(&series_mul(&binom, &grow, SERIES_TERMS), &sg, SERIES_TERMS);

        EndSeries {
            sigma,
            e,
            q_e: poly_eval(q, e),
            g,
            vhat,
            g_limit: k.min(0.75 / c),
            vhat_limit: 0.1 * e.min(1.0 / c).min(k),
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> f64 {
        self.kf
    }

    pub fn lower_end(&self) -> f64 {
        self.a
    }

    pub fn upper_end(&self) -> f64 {
        self.b
    }

    fn series(&self, side: Side) -> &EndSeries {
        match side {
            Side::Lower => &self.lower,
            Side::Upper => &self.upper,
        }
    }

    /// Moment for a value of `W` in `[n-k, n+k]`.
    pub fn moment(&self, w: f64) -> Result<Moment> {
        if !(w >= self.a && w <= self.b) {
            return Err(Error::Domain(format!(
                "W = {w} outside [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(if w <= self.nf {
            Moment { w, side: Side::Lower, offset: w - self.a }
        } else {
            Moment { w, side: Side::Upper, offset: self.b - w }
        })
    }

    /// Moment at a given offset from the endpoint of `side`.
    pub fn moment_at_offset(&self, side: Side, offset: f64) -> Moment {
        let w = match side {
            Side::Lower => self.a + offset,
            Side::Upper => self.b - offset,
        };
        Moment { w, side, offset }
    }

    /// `n - W`, computed from the offset.
    pub fn n_minus_w(&self, m: &Moment) -> f64 {
        m.side.sign() * (self.kf - m.offset)
    }

    /// `V(W)`.
    pub fn v(&self, m: &Moment) -> f64 {
        let es = self.series(m.side);
        let x = m.offset;
        if x <= 0.0 {
            return 0.0;
        }
        let wpow = m.w.powf(1.0 - self.nf);
        if x <= es.g_limit {
            let sum = es.g.iter().rev().fold(0.0, |acc, &g| acc * x + g) * x;
            wpow * (self.c * es.sigma * x).exp() * es.sigma * sum
        } else {
            wpow * (es.q_e * (self.c * es.sigma * x).exp() - poly_eval(&self.q, m.w))
        }
    }

    /// `dV/dW` from the differential equation, using the closed-form `V`.
    pub fn dv_dw(&self, m: &Moment) -> f64 {
        let v = self.v(m);
        self.dv_dw_with(m, v)
    }

    pub fn dv_dw_with(&self, m: &Moment, v: f64) -> f64 {
        self.n_minus_w(m) - ((self.nf - 1.0) / m.w - self.c) * v
    }

    /// `V/x` as `x → 0` is `k`; returns `V(x)/x` for any offset.
    pub fn v_over_offset(&self, m: &Moment) -> f64 {
        let es = self.series(m.side);
        if m.offset <= es.vhat_limit {
            es.vhat.iter().rev().fold(0.0, |acc, &v| acc * m.offset + v)
        } else {
            self.v(m) / m.offset
        }
    }

    /// Regular part `1/V - 1/(k x)` of the integrand of `s`.
    pub fn rho(&self, side: Side, x: f64) -> f64 {
        let es = self.series(side);
        if x <= es.vhat_limit {
            let vh = es.vhat.iter().rev().fold(0.0, |acc, &v| acc * x + v);
            let dv = es.vhat[1..].iter().rev().fold(0.0, |acc, &v| acc * x + v);
            -dv / (self.kf * vh)
        } else {
            let m = self.moment_at_offset(side, x);
            1.0 / self.v(&m) - 1.0 / (self.kf * x)
        }
    }

    /// Bounded integrand `x / V` of the potential.
    pub fn x_over_v(&self, side: Side, x: f64) -> f64 {
        let m = self.moment_at_offset(side, x);
        1.0 / self.v_over_offset(&m)
    }

    /// `∫_e^{e+σx} t^{n-1} e^{-ct} (n-t) dt` by adaptive quadrature.
    pub fn g_quadrature(&self, m: &Moment) -> Result<f64> {
        let es = self.series(m.side);
        let n = self.nf;
        let c = self.c;
        let q = quad::integrate(
            |t: f64| t.powf(n - 1.0) * (-c * t).exp() * (n - t),
            es.e,
            m.w,
            1e-16,
            1e-14,
        )?;
        Ok(q.value)
    }
}

/// `∫_{n-k}^{n+k} t^{n-1} e^{-ct} (n-t) dt` from the exact antiderivative.
fn residual_exact(c: f64, n: usize, a: f64, b: f64) -> f64 {
    if c * b < 2.0 {
        // power series in c; exact polynomial moments
        let nf = n as f64;
        let mut sum = 0.0;
        let mut coef = 1.0;
        let mut m = 0usize;
        loop {
            let mf = m as f64;
            let p1 = nf + mf;
            let moment = nf * (b.powf(p1) - a.powf(p1)) / p1 - (b.powf(p1 + 1.0) - a.powf(p1 + 1.0)) / (p1 + 1.0);
            let term = coef * moment;
            sum += term;
            if m > 5 && term.abs() <= 1e-18 * sum.abs().max(1e-300) {
                break;
            }
            if m > 400 || coef == 0.0 {
                break;
            }
            m += 1;
            coef *= -c / m as f64;
        }
        sum
    } else {
        let p = p_coeffs(n);
        let mut q = vec![0.0; n + 1];
        let mut deriv = p;
        let mut cpow = c;
        while !deriv.is_empty() {
            for (i, &d) in deriv.iter().enumerate() {
                q[i] += d / cpow;
            }
            deriv = poly_derivative(&deriv);
            cpow *= c;
        }
        (-c * a).exp() * poly_eval(&q, a) - (-c * b).exp() * poly_eval(&q, b)
    }
}

/// Residual `I(c)` whose zero defines the soliton constant.
///
/// The exact antiderivative is returned; an adaptive quadrature of the same
/// integral must agree with it to `1e-10` relative to `∫|integrand|`.
pub fn soliton_constant_residual(c: f64, params: &SolitonParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("c = {c} outside [0, 1]")));
    }
    let n = params.n as usize;
    let nf = n as f64;
    let (a, b) = (params.lower(), params.upper());
    let exact = residual_exact(c, n, a, b);
    let integrand = |t: f64| t.powf(nf - 1.0) * (-c * t).exp() * (nf - t);
    let lo = quad::integrate(integrand, a, nf, 0.0, 1e-14)?;
    let hi = quad::integrate(integrand, nf, b, 0.0, 1e-14)?;
    let quadrature = lo.value + hi.value;
    // the integrand is positive below n and negative above
    let scale = lo.value.abs() + hi.value.abs();
    if (exact - quadrature).abs() > 1e-10 * scale {
        return Err(Error::ResidualMismatch { c, exact, quadrature });
    }
    Ok(exact)
}

/// Root of [`soliton_constant_residual`] in `(0, 1)`.
pub fn solve_soliton_constant(params: &SolitonParams) -> Result<f64> {
    params.validate()?;
    let at_zero = soliton_constant_residual(0.0, params)?;
    let at_one = soliton_constant_residual(1.0, params)?;
    if !(at_zero.signum() != at_one.signum() && at_zero != 0.0 && at_one != 0.0) {
        return Err(Error::NoBracket { at_zero, at_one });
    }
    let mut failure = None;
    let root = roots::brent_with_values(
        |c| match soliton_constant_residual(c, params) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        at_zero,
        1.0,
        at_one,
        0.0,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;
    if !(root.x > 0.0 && root.x < 1.0) || root.fx.abs() >= params.tol_c {
        return Err(Error::Root(format!(
            "soliton constant c = {} has residual {:e} (tolerance {:e})",
            root.x, root.fx, params.tol_c
        )));
    }
    Ok(root.x)
}

/// `V(W)` for a given constant `c`.
pub fn profile_v(c: f64, params: &SolitonParams, w: f64) -> Result<f64> {
    let kernel = Kernel::new(params, c)?;
    let m = kernel.moment(w)?;
    Ok(kernel.v(&m))
}

/// `dV/dW` for a given constant `c`, by the product rule on the closed form.
pub fn profile_dv(c: f64, params: &SolitonParams, w: f64) -> Result<f64> {
    let kernel = Kernel::new(params, c)?;
    let m = kernel.moment(w)?;
    Ok(kernel.dv_dw(&m))
}

/// Cumulative integrals along one half of the interval, indexed by offset.
#[derive(Debug, Clone)]
struct SideTable {
    side: Side,
    /// Node offsets, ascending, all `<= k`.
    x: Vec<f64>,
    /// `R(x_j) = ∫_0^{x_j} (1/V - 1/(kξ)) dξ`.
    r: Vec<f64>,
    /// `U(x_j) = ∫_0^{x_j} ξ/V dξ`.
    u: Vec<f64>,
    r_k: f64,
    u_k: f64,
    /// `S(x)` as a function of `log x` at the nodes, for initial guesses.
    guess: Pchip,
}

impl SideTable {
    fn build(kernel: &Kernel, side: Side, offsets: Vec<f64>) -> Result<Self> {
        let k = kernel.k();
        let mut r = Vec::with_capacity(offsets.len());
        let mut u = Vec::with_capacity(offsets.len());
        let (mut racc, mut uacc) = (0.0, 0.0);
        let mut prev = 0.0;
        let rho = |x: f64| kernel.rho(side, x);
        let xov = |x: f64| kernel.x_over_v(side, x);
        for &x in &offsets {
            racc += quad::integrate(rho, prev, x, 1e-16, 1e-14)?.value;
            uacc += quad::integrate(xov, prev, x, 1e-16, 1e-14)?.value;
            r.push(racc);
            u.push(uacc);
            prev = x;
        }
        let r_k = racc + quad::integrate(rho, prev, k, 1e-16, 1e-14)?.value;
        let u_k = uacc + quad::integrate(xov, prev, k, 1e-16, 1e-14)?.value;

        let mut gs: Vec<f64> = offsets
            .iter()
            .zip(&r)
            .map(|(&x, &rx)| (x / k).ln() / k + rx - r_k)
            .collect();
        let mut gl: Vec<f64> = offsets.iter().map(|x| x.ln()).collect();
        if offsets.last().map_or(true, |&x| x < k) {
            gs.push(0.0);
            gl.push(k.ln());
        }
        let guess = Pchip::new(gs, gl)?;
        Ok(Self {
            side,
            x: offsets,
            r,
            u,
            r_k,
            u_k,
            guess,
        })
    }

    fn cumulative<F: Fn(f64) -> f64>(&self, table: &[f64], f: F, x: f64) -> f64 {
        let j = self.x.partition_point(|&xi| xi <= x);
        let (base, from) = if j == 0 { (0.0, 0.0) } else { (table[j - 1], self.x[j - 1]) };
        if x == from {
            return base;
        }
        let part = match quad::integrate(&f, from, x, 1e-16, 1e-14) {
            Ok(q) => q.value,
            Err(_) => gk15(&f, from, x).value,
        };
        base + part
    }

    fn r_at(&self, kernel: &Kernel, x: f64) -> f64 {
        self.cumulative(&self.r, |t| kernel.rho(self.side, t), x)
    }

    fn u_at(&self, kernel: &Kernel, x: f64) -> f64 {
        self.cumulative(&self.u, |t| kernel.x_over_v(self.side, t), x)
    }

    /// `S(x) = ∫_k^x dξ / V`.
    fn big_s(&self, kernel: &Kernel, x: f64) -> f64 {
        let k = kernel.k();
        (x / k).ln() / k + self.r_at(kernel, x) - self.r_k
    }

    /// Offset `x` with `S(x) = target`, `target <= 0`.
    fn invert(&self, kernel: &Kernel, target: f64) -> Result<f64> {
        let k = kernel.k();
        let t_top = k.ln();
        if target >= 0.0 {
            return Ok(k);
        }
        let s_first = self.guess.x()[0];
        let mut t = if target >= s_first {
            self.guess.eval(target)
        } else {
            t_top + k * (target + self.r_k)
        }
        .min(t_top);
        let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, t_top);
        for _ in 0..200 {
            let x = t.exp();
            if x < 1e-300 {
                return Err(Error::Domain(format!(
                    "log-square radius too far into the tail to resolve (S = {target})"
                )));
            }
            let f = self.big_s(kernel, x) - target;
            if f == 0.0 {
                return Ok(x);
            }
            if f > 0.0 {
                t_hi = t_hi.min(t);
            } else {
                t_lo = t_lo.max(t);
            }
            let m = kernel.moment_at_offset(self.side, x);
            // dS/dt = x / V
            let dt = -f * kernel.v_over_offset(&m);
            let mut next = t + dt;
            if !(next > t_lo && next < t_hi) {
                next = if t_lo.is_finite() { 0.5 * (t_lo + t_hi) } else { t_hi - 2.0 * (t_hi - t).abs().max(1.0) };
            }
            let step = (next - t).abs();
            t = next;
            if step <= 4.0 * f64::EPSILON * t.abs().max(1.0) || (t_hi - t_lo) <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                return Ok(t.exp());
            }
        }
        Err(Error::Root(format!("inversion of s did not converge (target {target})")))
    }
}

/// A point on the radial line in all three coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPoint {
    pub r: f64,
    pub s: f64,
    pub w: f64,
    pub v: f64,
    pub moment: Moment,
}

/// Input for [`SolitonProfile::coordinate_convert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointSpec {
    Radius(f64),
    LogSquareRadius(f64),
    Moment(f64),
}

/// The solved soliton, tabulated on an endpoint-clustered grid in `W`.
#[derive(Debug, Clone)]
pub struct SolitonProfile {
    pub params: SolitonParams,
    pub c: f64,
    pub w_grid: Vec<f64>,
    pub v_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub u_values: Vec<f64>,
    pub a1: f64,
    pub b1: f64,
    kernel: Kernel,
    lower: SideTable,
    upper: SideTable,
    moments: Vec<Moment>,
    gauge_w: f64,
    s_gauge: f64,
    u_shift: f64,
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`; returns value and the
/// change contributed by the last point.
fn neville_at_zero(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut p = y.to_vec();
    let m = x.len();
    let mut last_change = f64::INFINITY;
    for level in 1..m {
        for i in 0..m - level {
            let j = i + level;
            let prev = p[i];
            p[i] = (x[j] * p[i] - x[i] * p[i + 1]) / (x[j] - x[i]);
            if i == 0 {
                last_change = (p[0] - prev).abs();
            }
        }
    }
    (p[0], last_change)
}

impl SolitonProfile {
    /// Solves for `c` and tabulates the profile with `s = 0` at `W = n`.
    pub fn build(params: &SolitonParams) -> Result<Self> {
        Self::build_with_gauge(params, params.n as f64)
    }

    /// As [`build`](Self::build) but with `s = 0` at `W = w_gauge`.
    pub fn build_with_gauge(params: &SolitonParams, w_gauge: f64) -> Result<Self> {
        params.validate()?;
        let c = solve_soliton_constant(params)?;
        Self::from_constant(params, c, w_gauge)
    }

    /// Tabulates the profile for a given constant.
    pub fn from_constant(params: &SolitonParams, c: f64, w_gauge: f64) -> Result<Self> {
        let kernel = Kernel::new(params, c)?;
        let nf = params.n as f64;
        let k = params.k as f64;
        let gauge = kernel.moment(w_gauge).map_err(|_| {
            Error::InvalidParams(format!("gauge point W = {w_gauge} outside the moment interval"))
        })?;
        if gauge.offset <= 0.0 {
            return Err(Error::InvalidParams("gauge point must be interior".into()));
        }

        let size = params.grid_size;
        let mut moments = Vec::with_capacity(size);
        for i in 0..size {
            let theta = std::f64::consts::PI * (i + 1) as f64 / (size + 1) as f64;
            let cos = theta.cos();
            let m = if cos >= 0.0 {
                let x = 2.0 * k * (0.5 * theta).sin().powi(2);
                kernel.moment_at_offset(Side::Lower, x)
            } else {
                let y = 2.0 * k * (0.5 * theta).cos().powi(2);
                kernel.moment_at_offset(Side::Upper, y)
            };
            moments.push(m);
        }
        let lower_x: Vec<f64> = moments.iter().filter(|m| m.side == Side::Lower).map(|m| m.offset).collect();
        let mut upper_x: Vec<f64> = moments.iter().filter(|m| m.side == Side::Upper).map(|m| m.offset).collect();
        upper_x.reverse();
        let lower = SideTable::build(&kernel, Side::Lower, lower_x)?;
        let upper = SideTable::build(&kernel, Side::Upper, upper_x)?;

        let mut profile = Self {
            params: *params,
            c,
            w_grid: moments.iter().map(|m| m.w).collect(),
            v_values: Vec::new(),
            s_values: Vec::new(),
            u_values: Vec::new(),
            a1: 0.0,
            b1: 0.0,
            kernel,
            lower,
            upper,
            moments,
            gauge_w: w_gauge,
            s_gauge: 0.0,
            u_shift: 0.0,
        };
        profile.s_gauge = profile.s_raw(&gauge);
        profile.u_shift = profile.lower.u_k - profile.upper.u_k + 2.0 * k * profile.s_gauge;
        profile.a1 = (k * (profile.lower.r_k + profile.s_gauge)).exp();
        profile.b1 = (k * (profile.upper.r_k - profile.s_gauge)).exp();

        let moments = profile.moments.clone();
        profile.v_values = moments.iter().map(|m| profile.kernel.v(m)).collect();
        profile.s_values = moments.iter().map(|m| profile.s_of(m)).collect();
        profile.u_values = moments
            .iter()
            .zip(&profile.s_values)
            .map(|(m, &s)| profile.u_of(m, s))
            .collect();

        if let Some((i, v)) = profile.v_values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Construction(format!(
                "V = {v:e} is not positive at interior node {i} (W = {})",
                profile.w_grid[i]
            )));
        }
        if let Some(i) = profile.s_values.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Construction(format!(
                "s is not increasing between nodes {i} and {} ({} -> {})",
                i + 1,
                profile.s_values[i],
                profile.s_values[i + 1]
            )));
        }
        profile.check_tail_coefficients()?;
        let _ = nf;
        Ok(profile)
    }

    fn check_tail_coefficients(&self) -> Result<()> {
        let k = self.kernel.k();
        let m = 8;
        let lo: Vec<&Moment> = self.moments.iter().take(m).collect();
        let hi: Vec<&Moment> = self.moments.iter().rev().take(m).collect();
        let xs: Vec<f64> = lo.iter().map(|m| m.offset).collect();
        let phi: Vec<f64> = lo.iter().map(|m| m.offset * (-k * self.s_of(m)).exp() / k).collect();
        let (a1_fit, _) = neville_at_zero(&xs, &phi);
        let ys: Vec<f64> = hi.iter().map(|m| m.offset).collect();
        let psi: Vec<f64> = hi.iter().map(|m| m.offset * (k * self.s_of(m)).exp() / k).collect();
        let (b1_fit, _) = neville_at_zero(&ys, &psi);
        let rel_a = (a1_fit - self.a1).abs() / self.a1;
        let rel_b = (b1_fit - self.b1).abs() / self.b1;
        if !(rel_a <= 1e-8 && rel_b <= 1e-8) {
            return Err(Error::Construction(format!(
                "tail coefficient extrapolation disagrees with the closed form: \
                 a1 {a1_fit} vs {} (rel {rel_a:e}), b1 {b1_fit} vs {} (rel {rel_b:e})",
                self.a1, self.b1
            )));
        }
        Ok(())
    }

    /// Richardson-extrapolated tail coefficients `(a1, b1)` from the grid.
    pub fn extrapolated_tail_coefficients(&self) -> (f64, f64) {
        let k = self.kernel.k();
        let lo: Vec<&Moment> = self.moments.iter().take(8).collect();
        let hi: Vec<&Moment> = self.moments.iter().rev().take(8).collect();
        let xs: Vec<f64> = lo.iter().map(|m| m.offset).collect();
        let phi: Vec<f64> = lo.iter().map(|m| m.offset * (-k * self.s_of(m)).exp() / k).collect();
        let ys: Vec<f64> = hi.iter().map(|m| m.offset).collect();
        let psi: Vec<f64> = hi.iter().map(|m| m.offset * (k * self.s_of(m)).exp() / k).collect();
        (neville_at_zero(&xs, &phi).0, neville_at_zero(&ys, &psi).0)
    }

    /// One-sided slopes of `V` at `n-k` and `n+k`, extrapolated from the grid.
    pub fn endpoint_slopes(&self) -> (f64, f64) {
        let lo: Vec<&Moment> = self.moments.iter().take(8).collect();
        let hi: Vec<&Moment> = self.moments.iter().rev().take(8).collect();
        let xs: Vec<f64> = lo.iter().map(|m| m.offset).collect();
        let sl: Vec<f64> = lo.iter().map(|m| self.kernel.v(m) / m.offset).collect();
        let ys: Vec<f64> = hi.iter().map(|m| m.offset).collect();
        let su: Vec<f64> = hi.iter().map(|m| -self.kernel.v(m) / m.offset).collect();
        (neville_at_zero(&xs, &sl).0, neville_at_zero(&ys, &su).0)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn k(&self) -> u32 {
        self.params.k
    }

    pub fn moments(&self) -> &[Moment] {
        &self.moments
    }

    /// The `W` at which `s = 0`.
    pub fn gauge_w(&self) -> f64 {
        self.gauge_w
    }

    /// Gauge label written to reports.
    pub fn gauge_label(&self) -> String {
        if self.gauge_w == self.params.n as f64 {
            "s0_at_W_eq_n".to_string()
        } else {
            format!("s0_at_W_eq_{}", self.gauge_w)
        }
    }

    /// Copy of this profile whose constant `c` is replaced, with all tables kept.
    pub fn with_constant_override(&self, c: f64) -> Result<Self> {
        let mut p = self.clone();
        p.c = c;
        p.kernel = Kernel::new(&self.params, c)?;
        Ok(p)
    }

    fn table(&self, side: Side) -> &SideTable {
        match side {
            Side::Lower => &self.lower,
            Side::Upper => &self.upper,
        }
    }

    /// Tail integral `R_lower(k)`, `R_upper(k)`.
    pub fn tail_integrals(&self) -> (f64, f64) {
        (self.lower.r_k, self.upper.r_k)
    }

    fn s_raw(&self, m: &Moment) -> f64 {
        m.side.sign() * self.table(m.side).big_s(&self.kernel, m.offset)
    }

    /// `s` at a moment (gauge applied).
    pub fn s_of(&self, m: &Moment) -> f64 {
        self.s_raw(m) - self.s_gauge
    }

    /// `u` at a moment with known `s`.
    pub fn u_of(&self, m: &Moment, s: f64) -> f64 {
        let t = self.table(m.side);
        let uu = t.u_at(&self.kernel, m.offset);
        match m.side {
            Side::Lower => self.kernel.lower_end() * s + uu,
            Side::Upper => self.kernel.upper_end() * s + uu + self.u_shift,
        }
    }

    pub fn v(&self, m: &Moment) -> f64 {
        self.kernel.v(m)
    }

    pub fn dv_dw(&self, m: &Moment) -> f64 {
        self.kernel.dv_dw(m)
    }

    pub fn moment_from_w(&self, w: f64) -> Result<Moment> {
        self.kernel.moment(w)
    }

    /// Moment with the given `s`, by Newton iteration on the tabulated integral.
    pub fn moment_from_s(&self, s: f64) -> Result<Moment> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("s = {s} is not finite")));
        }
        let raw = s + self.s_gauge;
        let side = if raw <= 0.0 { Side::Lower } else { Side::Upper };
        let x = self.table(side).invert(&self.kernel, -raw.abs())?;
        Ok(self.kernel.moment_at_offset(side, x))
    }

    /// Converts between radius, log-square radius and moment coordinate.
    pub fn coordinate_convert(&self, point: PointSpec) -> Result<RadialPoint> {
        let (s, moment) = match point {
            PointSpec::Radius(r) => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::Domain(format!("radius must be positive and finite (got {r})")));
                }
                let s = 2.0 * r.ln();
                (s, self.moment_from_s(s)?)
            }
            PointSpec::LogSquareRadius(s) => (s, self.moment_from_s(s)?),
            PointSpec::Moment(w) => {
                let m = self.kernel.moment(w)?;
                if m.offset <= 0.0 {
                    return Err(Error::Domain(format!("W = {w} is an endpoint (s is infinite there)")));
                }
                (self.s_of(&m), m)
            }
        };
        let r = match point {
            PointSpec::Radius(r) => r,
            _ => (0.5 * s).exp(),
        };
        Ok(RadialPoint {
            r,
            s,
            w: moment.w,
            v: self.kernel.v(&moment),
            moment,
        })
    }

    /// `V` at an arbitrary `W` by monotone interpolation of the grid values.
    pub fn v_interpolated(&self, w: f64) -> Result<f64> {
        let mut xs = vec![self.kernel.lower_end()];
        xs.extend_from_slice(&self.w_grid);
        xs.push(self.kernel.upper_end());
        let mut ys = vec![0.0];
        ys.extend_from_slice(&self.v_values);
        ys.push(0.0);
        let p = Pchip::new(xs, ys)?;
        self.kernel.moment(w)?;
        Ok(p.eval(w))
    }
}
