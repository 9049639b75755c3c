//! Property-based checks of the cheap structural layers.

use boltzspec::basis::{BasisSpec, Weight};
use boltzspec::collision::SignedPermutation;
use boltzspec::fit::{exp_fit, loglog_slope};
use boltzspec::fourier::FrequencyPoint;
use boltzspec::multiindex::{count, graded_lex};
use boltzspec::quadrature::{gauss_legendre, gauss_maxwell_1d, SphereRule};
use boltzspec::weighted::Cutoff;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiindex_count_formula(d in 2usize..=3, n in 0usize..=9) {
        prop_assert_eq!(graded_lex(d, n).len(), count(d, n));
    }

    #[test]
    fn frequency_point_polar_roundtrip(r in 1e-6f64..10.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let xi = FrequencyPoint::from_polar(r, &[x, y]).unwrap();
        prop_assert!((xi.magnitude() - r).abs() < 1e-12 * r.max(1.0));
        let dir = xi.direction().unwrap();
        let norm: f64 = dir.iter().map(|t| t * t).sum::<f64>();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signed_permutations_compose_to_identity(axis in 0usize..3, a in 0usize..3, b in 0usize..3) {
        prop_assume!(a != b);
        let v = [0.3, -0.7, 1.1];
        let refl = SignedPermutation::reflect(3, axis);
        let swap = SignedPermutation::swap(3, a, b);
        // both are involutions
        prop_assert_eq!(refl.apply(&refl.apply(&v)), v.to_vec());
        prop_assert_eq!(swap.apply(&swap.apply(&v)), v.to_vec());
    }

    #[test]
    fn cutoff_is_monotone_and_clamped(rc in 0.5f64..8.0, delta in 0.05f64..2.0, s in 0.0f64..20.0) {
        let c = Cutoff { r_cut: rc, delta };
        let v = c.eval(s);
        prop_assert!((0.0..=1.0).contains(&v));
        let v2 = c.eval(s + 0.1);
        prop_assert!(v2 <= v + 1e-12);
    }

    #[test]
    fn legendre_rule_integrates_random_cubics(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let q = gauss_legendre(6);
        let got = q.integrate(|x| a * x * x * x + b * x * x + c);
        let exact = 2.0 * (b / 3.0 + c);
        prop_assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn maxwell_rule_odd_moments_vanish(k in 0usize..5) {
        let q = gauss_maxwell_1d(12);
        let got = q.integrate(|x| x.powi(2 * k as i32 + 1));
        prop_assert!(got.abs() < 1e-9);
    }

    #[test]
    fn sphere_rule_total_measure(deg in 2usize..20) {
        for d in [2usize, 3] {
            let s = SphereRule::new(d, deg).unwrap();
            let total: f64 = s.weights.iter().sum();
            let expect = boltzspec::quadrature::sphere_measure(d);
            prop_assert!((total - expect).abs() < 1e-11 * expect);
        }
    }

    #[test]
    fn loglog_slope_recovers_order(order in 0.5f64..3.5, scale in 0.1f64..10.0) {
        let xs: Vec<f64> = (1..=8).map(|i| 0.01 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| scale * x.powf(order)).collect();
        prop_assert!((loglog_slope(&xs, &ys) - order).abs() < 1e-9);
    }

    #[test]
    fn exp_fit_recovers_rate(rate in -5.0f64..-0.1, c in 0.1f64..10.0) {
        let ts: Vec<f64> = (0..12).map(|i| 0.25 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| c * (rate * t).exp()).collect();
        let (r, cc) = exp_fit(&ts, &ys);
        prop_assert!((r - rate).abs() < 1e-9 && (cc - c).abs() < 1e-9 * c);
    }

    #[test]
    fn basis_spec_validation_rules(d in 2usize..=3, n in 2usize..=8, kk in 5.3f64..9.0) {
        let spec = BasisSpec {
            dim: d,
            max_degree: n,
            weight: Weight::Polynomial { k: kk, p: BasisSpec::required_p(d, n, kk) },
        };
        prop_assert!(spec.validate().is_ok());
        let bad = BasisSpec {
            dim: d,
            max_degree: n,
            weight: Weight::Polynomial { k: kk, p: 2 },
        };
        prop_assert!(bad.validate().is_err());
    }
}
