use hardylab_core::measure::WeightedMeasure;
use hardylab_core::quadrature::QuadOptions;
use hardylab_core::spaces::{luxemburg_norm, modular, modular_scaled, validate_exponent};
use hardylab_core::{parse, Interval};
use proptest::prelude::*;

fn unit() -> Interval {
    Interval::open(0.0, 1.0).unwrap()
}

fn poly(c: &[f64]) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |x| c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn constant_exponent_norm_is_classical(
        coeffs in prop::collection::vec(-3.0f64..3.0, 1..5),
        p in 1.2f64..5.0,
    ) {
        let vp = validate_exponent(&parse(&format!("{p}")).unwrap(), &unit()).unwrap();
        let f = poly(&coeffs);
        let o = QuadOptions::default();
        let m = modular(&f, &vp, &WeightedMeasure::lebesgue(unit()), &o).unwrap().value;
        prop_assume!(m > 1e-12);
        let classical = m.powf(1.0 / p);
        let n = luxemburg_norm(&f, &vp, &o).unwrap();
        prop_assert!((n - classical).abs() <= 1e-6 * classical, "{} vs {}", n, classical);
    }

    #[test]
    fn norm_is_homogeneous(coeffs in prop::collection::vec(-3.0f64..3.0, 1..5), c in -4.0f64..4.0) {
        let vp = validate_exponent(&parse("x + 2").unwrap(), &unit()).unwrap();
        let f = poly(&coeffs);
        let o = QuadOptions::default();
        let n = luxemburg_norm(&f, &vp, &o).unwrap();
        prop_assume!(n > 1e-6);
        let cf = |x: f64| c * f(x);
        let nc = luxemburg_norm(&cf, &vp, &o).unwrap();
        prop_assert!((nc - c.abs() * n).abs() <= 1e-6 * (c.abs() * n).max(1e-12));
    }

    #[test]
    fn unit_ball_and_monotone_objective(coeffs in prop::collection::vec(-3.0f64..3.0, 1..5)) {
        let vp = validate_exponent(&parse("x + 2").unwrap(), &unit()).unwrap();
        let mu = WeightedMeasure::lebesgue(unit());
        let f = poly(&coeffs);
        let o = QuadOptions::default();
        let n = luxemburg_norm(&f, &vp, &o).unwrap();
        prop_assume!(n > 1e-6);
        let at_norm = modular_scaled(&f, n, &vp, &mu, &o).unwrap().value;
        prop_assert!((at_norm - 1.0).abs() <= 1e-4, "{}", at_norm);
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let lambda = n * 2f64.powf(k as f64 / 3.0 - 2.0);
            let m = modular_scaled(&f, lambda, &vp, &mu, &o).unwrap().value;
            prop_assert!(m <= prev);
            prev = m;
        }
    }
}
