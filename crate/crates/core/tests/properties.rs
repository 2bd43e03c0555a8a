use nonlocal_sphere::fields::{heat_semigroup, sample_gaussian_field, IsotropicSpectrum, SolutionParams, SpectralSolver};
use nonlocal_sphere::special::mittag_leffler;
use nonlocal_sphere::sphere::{analyze, eval_ylm, synthesize, SphericalGrid, SphericalPoint};
use nonlocal_sphere::symbols::{catalog, BernsteinSymbol, SpectralSymbol};
use nonlocal_sphere::timechange::{ltilde, Method};
use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

fn symbol() -> impl Strategy<Value = BernsteinSymbol> {
    (0..catalog().len()).prop_map(|i| catalog()[i].clone())
}

fn stable() -> impl Strategy<Value = BernsteinSymbol> {
    (0.2f64..0.95).prop_map(|a| BernsteinSymbol::stable(a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bernstein_symbols_are_increasing_and_vanish_at_zero(s in symbol(), a in 1e-3f64..50.0, b in 1e-3f64..50.0) {
        prop_assert_eq!(s.phi(0.0), 0.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(s.phi(lo) > 0.0);
        prop_assert!(s.phi(lo) <= s.phi(hi) * (1.0 + 1e-14));
    }

    #[test]
    fn multiplier_in_unit_interval_and_monotone(s in stable(), t in 0.0f64..5.0, l1 in 0.0f64..200.0, l2 in 0.0f64..200.0) {
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let a = ltilde(&s, t, lo, Method::ClosedForm).unwrap();
        let b = ltilde(&s, t, hi, Method::ClosedForm).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b > 0.0 && b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn mittag_leffler_order_one_is_exponential(z in -30.0f64..3.0) {
        let e = mittag_leffler(1.0, z).unwrap();
        prop_assert!((e - z.exp()).abs() <= 1e-12 * z.exp().max(1e-300) + 1e-300);
    }

    #[test]
    fn solution_preserves_reality(seed in any::<u64>(), s in stable(), t in 0.01f64..3.0, gamma in 0.0f64..2.0) {
        let spec = IsotropicSpectrum::power_law(1.0, 3.0).unwrap();
        let c = sample_gaussian_field(&spec, 8, seed).unwrap();
        let p = SolutionParams::new(s, SpectralSymbol::riesz_bessel(0.8, 0.5).unwrap(), gamma, t).unwrap();
        let solved = SpectralSolver::new(p).solve(&c).unwrap();
        prop_assert!(solved.reality_defect() <= 1e-15);
    }

    #[test]
    fn heat_semigroup_commutes_with_solution(seed in any::<u64>(), s in stable(), t in 0.01f64..2.0, h in 0.0f64..1.0) {
        let spec = IsotropicSpectrum::power_law(2.0, 3.5).unwrap();
        let c = sample_gaussian_field(&spec, 6, seed).unwrap();
        let solver = SpectralSolver::new(SolutionParams::new(s, BernsteinSymbol::stable(0.6).unwrap(), 0.0, t).unwrap());
        let a = heat_semigroup(&solver.solve(&c).unwrap(), h).unwrap();
        let b = solver.solve(&heat_semigroup(&c, h).unwrap()).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).norm() <= 1e-14 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn heat_semigroup_is_a_semigroup(seed in any::<u64>(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let spec = IsotropicSpectrum::power_law(1.0, 3.0).unwrap();
        let c = sample_gaussian_field(&spec, 6, seed).unwrap();
        let a = heat_semigroup(&heat_semigroup(&c, s).unwrap(), t).unwrap();
        let b = heat_semigroup(&c, s + t).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).norm() <= 1e-13 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn analysis_inverts_synthesis(seed in any::<u64>(), lmax in 0usize..14, extra in 0usize..4) {
        let spec = IsotropicSpectrum::table(vec![1.0; lmax + 1]).unwrap();
        let c = sample_gaussian_field(&spec, lmax, seed).unwrap();
        let grid = SphericalGrid::new(lmax + 1 + extra, 2 * lmax + 1 + extra).unwrap();
        let back = analyze(&synthesize(&c, &grid), &grid, lmax).unwrap();
        for (x, y) in c.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn harmonics_satisfy_conjugation(l in 0usize..30, m in 0i64..30, theta in 0.0f64..PI, phi in 0.0f64..TAU) {
        prop_assume!(m as usize <= l);
        let p = SphericalPoint::new(theta, phi).unwrap();
        let pos = eval_ylm(l, m, p).unwrap();
        let neg = eval_ylm(l, -m, p).unwrap();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((neg - pos.conj() * sign).norm() <= 1e-12 * (1.0 + pos.norm()));
    }

    #[test]
    fn moving_a_point_travels_the_requested_angle(theta in 0.0f64..PI, phi in 0.0f64..TAU, g in 0.0f64..3.1, az in 0.0f64..TAU) {
        let p = SphericalPoint::new(theta, phi).unwrap();
        let q = p.moved(g, az);
        prop_assert!((p.angle_to(&q) - g).abs() <= 1e-9);
    }
}
