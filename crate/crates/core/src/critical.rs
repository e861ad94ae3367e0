//! The radii where `λ = -1` and `λ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, lambda_at};
use crate::roots::{brent, sign_changes};
use crate::soliton::SolitonProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRadii {
    pub r1: f64,
    pub r2: f64,
    pub w1: f64,
    pub w2: f64,
    pub s1: f64,
    pub s2: f64,
    pub dlambda_dr_at_r1: f64,
    pub dlambda_dr_at_r2: f64,
    /// `dλ/ds` at the crossings.
    pub dlambda_ds_at_r1: f64,
    pub dlambda_ds_at_r2: f64,
    /// `1/(2c) + (n-1) V / (2c W²)` at the crossings.
    pub slope_bound_at_r1: f64,
    pub slope_bound_at_r2: f64,
    pub tail_slope_zero: f64,
    pub tail_slope_infinity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfSimilarKind {
    SelfShrinker,
    Minimal,
    SelfExpander,
}

impl std::fmt::Display for SelfSimilarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelfSimilarKind::SelfShrinker => "self-shrinker",
            SelfSimilarKind::Minimal => "minimal",
            SelfSimilarKind::SelfExpander => "self-expander",
        })
    }
}

/// Half-width of the band in `λ` classified as minimal.
pub const MINIMAL_BAND: f64 = 1e-8;

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Radii spaced by `ln r = 1/4` stepping outward from the grid edges.
pub fn tail_radii(profile: &SolitonProfile, count: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = geometry::grid_radius_range(profile);
    let zero = (0..count).map(|j| lo * (-0.25 * j as f64).exp()).collect();
    let inf = (0..count).map(|j| hi * (0.25 * j as f64).exp()).collect();
    (zero, inf)
}

pub fn find_critical_radii(profile: &SolitonProfile) -> Result<CriticalRadii> {
    let kernel = profile.kernel();
    let c = profile.c;
    let n1 = profile.n() as f64 - 1.0;
    let lam: Vec<f64> = profile.moments().iter().map(|m| lambda_at(kernel, m)).collect();
    let plus_one: Vec<f64> = lam.iter().map(|l| l + 1.0).collect();

    let locate = |values: &[f64], shift: f64, label: &str| -> Result<f64> {
        let changes = sign_changes(values);
        if changes.len() != 1 {
            return Err(Error::CriticalRadii(format!(
                "expected exactly one sign change of {label} over the grid, found {}",
                changes.len()
            )));
        }
        let i = changes[0];
        let f = |w: f64| match kernel.moment(w) {
            Ok(m) => lambda_at(kernel, &m) + shift,
            Err(_) => f64::NAN,
        };
        let root = brent(f, profile.w_grid[i], profile.w_grid[i + 1], 1e-15, 200)?;
        Ok(root.x)
    };
    let w1 = locate(&plus_one, 1.0, "lambda + 1")?;
    let w2 = locate(&lam, 0.0, "lambda")?;

    let crossing = |w: f64| -> Result<(f64, f64, f64, f64, f64)> {
        let m = kernel.moment(w)?;
        let s = profile.s_of(&m);
        let r = (0.5 * s).exp();
        let v = kernel.v(&m);
        let dlds = v * geometry::dlambda_dw(kernel, &m);
        let bound = 1.0 / (2.0 * c) + n1 * v / (2.0 * c * w * w);
        Ok((r, s, 2.0 * dlds / r, dlds, bound))
    };
    let (r1, s1, dr1, ds1, b1) = crossing(w1)?;
    let (r2, s2, dr2, ds2, b2) = crossing(w2)?;
    if !(r1 < r2) {
        return Err(Error::CriticalRadii(format!("radii out of order: r1 = {r1}, r2 = {r2}")));
    }

    let (zero, inf) = tail_radii(profile, 5);
    let lz: Vec<f64> = zero
        .iter()
        .map(|&r| geometry::radial_state(profile, r).map(|st| -st.lambda))
        .collect::<Result<_>>()?;
    let li: Vec<f64> = inf
        .iter()
        .map(|&r| geometry::radial_state(profile, r).map(|st| st.lambda))
        .collect::<Result<_>>()?;

    Ok(CriticalRadii {
        r1,
        r2,
        w1,
        w2,
        s1,
        s2,
        dlambda_dr_at_r1: dr1,
        dlambda_dr_at_r2: dr2,
        dlambda_ds_at_r1: ds1,
        dlambda_ds_at_r2: ds2,
        slope_bound_at_r1: b1,
        slope_bound_at_r2: b2,
        tail_slope_zero: loglog_slope(&zero, &lz),
        tail_slope_infinity: loglog_slope(&inf, &li),
    })
}

pub fn classify_lambda(lambda: f64) -> SelfSimilarKind {
    if lambda.abs() < MINIMAL_BAND {
        SelfSimilarKind::Minimal
    } else if lambda < 0.0 {
        SelfSimilarKind::SelfShrinker
    } else {
        SelfSimilarKind::SelfExpander
    }
}

pub fn shrinker_expander_classification(profile: &SolitonProfile, r: f64) -> Result<SelfSimilarKind> {
    Ok(classify_lambda(geometry::radial_state(profile, r)?.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::SolitonParams;

    #[test]
    fn reference_radii_for_all_cases() {
        let cases = [
            (2, 1, 1.988_454_526_819_57, 2.384_042_239_848_33, 0.987_720_823_090_222, 1.536_732_144_381_32),
            (3, 1, 2.993_442_172_643_31, 3.470_720_624_149_02, 0.993_080_102_476_843, 1.710_857_385_976_13),
            (3, 2, 2.921_519_860_299_02, 4.275_913_727_914, 0.975_042_370_476_204, 1.573_373_849_906_29),
            (4, 2, 3.950_147_875_758_87, 5.349_888_644_723_66, 0.984_914_204_080_179, 1.606_169_780_305_14),
            (5, 3, 4.876_206_668_321, 7.306_001_217_915_72, 0.980_026_815_028_752, 1.545_275_815_151_12),
        ];
        for (n, k, w1, w2, r1, r2) in cases {
            let prof = SolitonProfile::build(&SolitonParams::new(n, k)).unwrap();
            let cr = find_critical_radii(&prof).unwrap();
            assert!((cr.w1 - w1).abs() < 1e-11, "n={n} k={k} W1 {}", cr.w1);
            assert!((cr.w2 - w2).abs() < 1e-11, "n={n} k={k} W2 {}", cr.w2);
            assert!((cr.r1 - r1).abs() < 1e-11 * r1, "n={n} k={k} r1 {}", cr.r1);
            assert!((cr.r2 - r2).abs() < 1e-11 * r2, "n={n} k={k} r2 {}", cr.r2);
            assert!(cr.dlambda_dr_at_r1 > 0.0 && cr.dlambda_dr_at_r2 > 0.0);
            assert!(cr.dlambda_ds_at_r1 >= cr.slope_bound_at_r1);
            assert!(cr.dlambda_ds_at_r2 >= cr.slope_bound_at_r2);
        }
    }

    #[test]
    fn classification_around_minimal_radius() {
        let prof = SolitonProfile::build(&SolitonParams::new(3, 1).with_grid(128)).unwrap();
        let cr = find_critical_radii(&prof).unwrap();
        use SelfSimilarKind::*;
        assert_eq!(shrinker_expander_classification(&prof, 0.5 * cr.r2).unwrap(), SelfShrinker);
        assert_eq!(shrinker_expander_classification(&prof, cr.r2).unwrap(), Minimal);
        assert_eq!(shrinker_expander_classification(&prof, 2.0 * cr.r2).unwrap(), SelfExpander);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-14);
    }
}
