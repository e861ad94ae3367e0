use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use lensflow::critical::{find_critical_radii, CriticalRadii};
use lensflow::flow::{self, CollapseTarget, FlowConfig, FlowMode};
use lensflow::geometry::{self, metric_at, radial_state};
use lensflow::soliton::{PointSpec, SolitonParams, SolitonProfile};

fn setup() -> &'static (SolitonProfile, CriticalRadii) {
    static CELL: OnceLock<(SolitonProfile, CriticalRadii)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = SolitonProfile::build(&SolitonParams::new(3, 1).with_grid(256)).unwrap();
        let cr = find_critical_radii(&p).unwrap();
        (p, cr)
    })
}

fn point() -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coordinates_round_trip(log_r in -3.0f64..3.0) {
        let (p, _) = setup();
        let r = log_r.exp();
        let a = p.coordinate_convert(PointSpec::Radius(r)).unwrap();
        let b = p.coordinate_convert(PointSpec::Moment(a.w)).unwrap();
        prop_assert!((b.r - r).abs() <= 1e-10 * r);
        prop_assert!((b.s - 2.0 * log_r).abs() <= 1e-10);
        prop_assert!(a.w > 2.0 && a.w < 4.0);
    }

    #[test]
    fn potential_stays_between_its_limits(log_r in -3.0f64..3.0) {
        let (p, _) = setup();
        let (lo, hi) = geometry::potential_bounds(p);
        let st = radial_state(p, log_r.exp()).unwrap();
        prop_assert!(st.p > lo && st.p < hi);
        prop_assert!(st.p_prime > 0.0);
        let r = geometry::level_set_radius(p, st.p).unwrap();
        prop_assert!((r - st.r).abs() <= 1e-8 * st.r);
    }

    #[test]
    fn lambda_sign_follows_minimal_radius(log_f in -2.0f64..2.0) {
        let (p, cr) = setup();
        prop_assume!(log_f.abs() > 1e-3);
        let st = radial_state(p, cr.r2 * log_f.exp()).unwrap();
        prop_assert_eq!(st.lambda > 0.0, log_f > 0.0);
        prop_assert!(st.norm_a2 > 0.0 && st.norm_h2 >= 0.0);
    }

    #[test]
    fn metric_is_hermitian_positive_with_exact_inverse(z in point()) {
        let (p, _) = setup();
        let m = metric_at(p, &z).unwrap();
        let g = &m.g;
        prop_assert!((g - g.adjoint()).norm() <= 1e-12 * g.norm());
        let id = g * &m.inverse;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((id[(i, j)] - want).norm() < 1e-9);
            }
        }
        let det = g.determinant();
        prop_assert!(det.re > 0.0 && (det.re - m.det).abs() <= 1e-9 * m.det);
    }

    #[test]
    fn metric_is_unitarily_invariant(z in point(), theta in 0.0f64..6.3) {
        let (p, _) = setup();
        // a diagonal unitary followed by a coordinate swap
        let w: Vec<Complex64> = vec![
            z[1] * Complex64::from_polar(1.0, theta),
            z[0],
            z[2] * Complex64::from_polar(1.0, -theta),
        ];
        let a = metric_at(p, &z).unwrap();
        let b = metric_at(p, &w).unwrap();
        prop_assert!((a.det - b.det).abs() <= 1e-12 * a.det);
        prop_assert!((a.g.trace() - b.g.trace()).norm() <= 1e-12 * a.g.trace().norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rmcf_is_monotone_and_finite(f in prop_oneof![0.2f64..0.97, 1.03f64..3.0]) {
        let (p, cr) = setup();
        let r0 = f * cr.r1;
        let t = flow::integrate_with(p, &FlowConfig::rmcf(r0, 1.0), cr).unwrap();
        let want = if f < 1.0 { CollapseTarget::S0 } else { CollapseTarget::SInfinity };
        prop_assert_eq!(t.target, want);
        prop_assert!(t.t_prime_ode < 1.0);
        prop_assert!(((t.t_prime_ode - t.t_prime_quadrature) / t.t_prime_quadrature).abs() < 1e-6);
        let rs: Vec<f64> = t.samples.iter().map(|s| s.r).collect();
        let monotone = if f < 1.0 {
            rs.windows(2).all(|w| w[1] <= w[0])
        } else {
            rs.windows(2).all(|w| w[1] >= w[0])
        };
        prop_assert!(monotone);
        prop_assert_eq!(rs[0], r0);
    }

    #[test]
    fn mcf_collapses_on_the_side_of_its_start(f in prop_oneof![0.3f64..0.97, 1.03f64..3.0]) {
        let (p, cr) = setup();
        let t = flow::integrate_with(p, &FlowConfig::mcf(f * cr.r2), cr).unwrap();
        let want = if f < 1.0 { CollapseTarget::S0 } else { CollapseTarget::SInfinity };
        prop_assert_eq!(t.target, want);
        prop_assert!(t.t_prime_ode.is_finite());
        prop_assert!(((t.t_prime_ode - t.t_prime_quadrature) / t.t_prime_quadrature).abs() < 1e-6);
        let hs: Vec<f64> = t.samples.iter().map(|s| s.h).collect();
        prop_assert!(hs.windows(2).all(|w| (w[1] - w[0]) * (f - 1.0) >= 0.0));
        prop_assert_eq!(t.mode, FlowMode::Mcf);
    }
}
