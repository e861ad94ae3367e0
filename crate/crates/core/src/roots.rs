//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Outcome of a converged root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Terminates when the bracket half-width falls below `2 eps |x| + xtol/2`
/// or an exact zero is hit. The sign change is checked, not assumed.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<Root> {
    let fa = f(a);
    let fb = f(b);
    brent_with_values(f, a, fa, b, fb, xtol, max_iter)
}

pub fn brent_with_values<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Root> {
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::Root(format!(
            "non-finite function value at bracket: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Root(format!(
            "no sign change on [{a}, {b}]: f(a) = {fa:e}, f(b) = {fb:e}"
        )));
    }

    let (mut a, mut fa, mut b, mut fb) = (a, fa, b, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Root(format!("non-finite function value at x = {b}")));
        }
    }
    Err(Error::Root(format!(
        "Brent iteration did not converge in {max_iter} steps (last x = {b}, f = {fb:e})"
    )))
}

/// Indices `i` where `values[i]` and `values[i + 1]` have strictly opposite
/// signs, or `values[i + 1]` is an exact zero.
pub fn sign_changes(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        let (u, v) = (values[i], values[i + 1]);
        if (u < 0.0 && v > 0.0) || (u > 0.0 && v < 0.0) || (u != 0.0 && v == 0.0) {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_cube_root_of_two() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 100).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        assert!(matches!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50), Err(Error::Root(_))));
    }

    #[test]
    fn sign_change_scan_counts_crossings() {
        assert_eq!(sign_changes(&[-2.0, -1.0, 0.5, 0.7, -0.1]), vec![1, 3]);
        assert!(sign_changes(&[1.0, 2.0, 3.0]).is_empty());
    }

    proptest! {
        #[test]
        fn brent_recovers_linear_roots(root in -10.0f64..10.0, slope in 0.1f64..100.0) {
            let r = brent(|x| slope * (x - root), -20.0, 20.0, 1e-13, 200).unwrap();
            prop_assert!((r.x - root).abs() < 1e-11);
        }
    }
}
