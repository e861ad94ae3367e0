//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Fixed-size state `[f64; N]`. Every accepted step stores its
//! fourth-order interpolation polynomial so the solution can be evaluated
//! anywhere in the integrated range after the fact.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    /// Step-size floor relative to `|t|`; smaller steps count as a collapse.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h0: None,
            h_max: f64::INFINITY,
            h_min_rel: 1e-14,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Reached the requested end point.
    Completed,
    /// The stop predicate fired after an accepted step.
    Stopped,
    StepSizeCollapse,
    MaxSteps,
    NonFinite,
}

/// Interpolation data of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub segments: Vec<Segment<N>>,
    pub t: f64,
    pub y: [f64; N],
    pub status: Status,
    pub evaluations: usize,
    pub rejected: usize,
}

impl<const N: usize> Solution<N> {
    /// Dense-output value at `t` inside the integrated range (clamped at its ends).
    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.segments.is_empty() {
            return self.y0;
        }
        let forward = self.segments[0].h > 0.0;
        let idx = self.segments.partition_point(|s| {
            if forward {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        if idx >= self.segments.len() {
            return self.y;
        }
        let seg = &self.segments[idx];
        if (forward && t <= seg.t0) || (!forward && t >= seg.t0) {
            return if idx == 0 { self.y0 } else { seg.eval(seg.t0) };
        }
        seg.eval(t)
    }

    pub fn last_segment(&self) -> Option<&Segment<N>> {
        self.segments.last()
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

fn err_norm<const N: usize>(e: &[f64; N], y: &[f64; N], ynew: &[f64; N], opts: &Options) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
        acc += (e[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], dir: f64, opts: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc: [f64; N] = std::array::from_fn(|i| opts.atol + opts.rtol * y0[i].abs());
    let norm = |v: &[f64; N]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.h_max);
    let y1 = axpy(y0, dir * h, &[(1.0, f0)]);
    let f1 = f(t0 + dir * h, &y1);
    let df: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = norm(&df) / h;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (1e-6f64).max(h * 1e-3) } else { (0.01 / dmax).powf(0.2) };
    (100.0 * h).min(h1).min(opts.h_max)
}

/// Integrates `y' = f(t, y)` from `t0` toward `t_end`.
///
/// `stop(t, y)` is called after every accepted step; returning `true` ends
/// the integration with [`Status::Stopped`].
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Options,
    mut stop: S,
) -> Solution<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N]) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut sol = Solution {
        t0,
        y0,
        segments: Vec::new(),
        t: t0,
        y: y0,
        status: Status::Completed,
        evaluations: 0,
        rejected: 0,
    };
    if t_end == t0 {
        return sol;
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    sol.evaluations += 1;
    let mut h = match opts.h0 {
        Some(h) => h.abs(),
        None => {
            sol.evaluations += 1;
            initial_step(&mut f, t0, &y0, &k1, dir, opts)
        }
    };
    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= opts.max_steps {
            sol.status = Status::MaxSteps;
            break;
        }
        let remaining = (t_end - t) * dir;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = dir * h;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let ynew = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + hs, &ynew);
        sol.evaluations += 6;
        steps += 1;

        let e: [f64; N] = std::array::from_fn(|i| {
            hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err = err_norm(&e, &y, &ynew, opts);
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            // shrink and retry; a persistently non-finite field ends the run
            h *= 0.2;
            sol.rejected += 1;
            if h < opts.h_min_rel * t.abs().max(1.0) {
                sol.status = Status::NonFinite;
                break;
            }
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let r2: [f64; N] = std::array::from_fn(|i| ynew[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| r2[i] - hs * k7[i] - bspl[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            sol.segments.push(Segment {
                t0: t,
                h: hs,
                rcont: [y, r2, bspl, r4, r5],
            });
            t = if last { t_end } else { t + hs };
            y = ynew;
            k1 = k7;
            sol.t = t;
            sol.y = y;
            if stop(t, &y) {
                sol.status = Status::Stopped;
                break;
            }
            if last {
                sol.status = Status::Completed;
                break;
            }
            let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.h_max);
            last_rejected = false;
        } else {
            sol.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            last_rejected = true;
        }
        if h < opts.h_min_rel * t.abs().max(1.0) {
            sol.status = Status::StepSizeCollapse;
            break;
        }
    }
    sol
}
