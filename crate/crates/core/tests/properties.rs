//! Invariants that must hold for every admissible input.

use lee2d::analysis::{appendix_f, appendix_minimizer, InequalityParams};
use lee2d::heatkernel::{heat_kernel, heat_kernel_at_distance};
use lee2d::meanfield::{chi_equation_lhs, interaction_functional, TrialState};
use lee2d::renorm::{principal_scalar, solve_bound_state, PhysicalParams};
use lee2d::{Manifold, Point};
use proptest::prelude::*;

fn manifold() -> impl Strategy<Value = Manifold<f64>> {
    prop_oneof![
        Just(Manifold::plane()),
        (0.5f64..3.0, 0.5f64..3.0).prop_map(|(a, b)| Manifold::torus(a, b).unwrap()),
        (0.5f64..3.0).prop_map(|r| Manifold::sphere(r).unwrap()),
        (0.5f64..3.0).prop_map(|r| Manifold::hyperbolic(r).unwrap()),
    ]
}

fn point_on(man: &Manifold<f64>, u: f64, v: f64) -> Point<f64> {
    match *man {
        Manifold::Plane => Point::new(4.0 * u - 2.0, 4.0 * v - 2.0),
        Manifold::Torus { l1, l2 } => Point::new(u * l1, v * l2),
        Manifold::Sphere { .. } => Point::new(u * std::f64::consts::PI, v * std::f64::consts::TAU),
        Manifold::HyperbolicPlane { radius } => {
            Point::new(3.0 * radius * u, v * std::f64::consts::TAU)
        }
    }
}

fn params() -> impl Strategy<Value = PhysicalParams<f64>> {
    (0.1f64..3.0, 0.05f64..0.95, 0.1f64..2.0).prop_map(|(m, frac, lambda)| {
        // μ spans (−m, m).
        PhysicalParams::new(m, m * (2.0 * frac - 1.0), lambda, 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_positive_and_symmetric(man in manifold(), u in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
                                     ls in -3.0f64..1.0) {
        let x = point_on(&man, u.0, u.1);
        let y = point_on(&man, u.2, u.3);
        let s = 10f64.powf(ls);
        let kxy = heat_kernel(&man, &x, &y, s, 0.5).unwrap();
        let kyx = heat_kernel(&man, &y, &x, s, 0.5).unwrap();
        prop_assert!(kxy >= 0.0);
        let diag = heat_kernel(&man, &x, &x, s, 0.5).unwrap();
        prop_assert!((kxy - kyx).abs() <= 1e-12 * diag);
        prop_assert!(kxy <= diag * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_decreases_with_distance(r in 0.5f64..3.0, ls in -2.0f64..1.0, d in 0.01f64..0.9) {
        let s = 10f64.powf(ls);
        for man in [Manifold::plane(), Manifold::sphere(r).unwrap(), Manifold::hyperbolic(r).unwrap()] {
            let span = match man { Manifold::Sphere { radius } => std::f64::consts::PI * radius, _ => 3.0 * r };
            let near = heat_kernel_at_distance(&man, d * span * 0.9, s, 0.5).unwrap();
            let far = heat_kernel_at_distance(&man, d * span, s, 0.5).unwrap();
            prop_assert!(far <= near * (1.0 + 1e-10) + 1e-14 * heat_kernel_at_distance(&man, 0.0, s, 0.5).unwrap());
        }
    }

    #[test]
    fn renormalization_fixed_point(p in params(), man in manifold(), u in (0.0f64..1.0, 0.0f64..1.0)) {
        let p = p.with_source(point_on(&man, u.0, u.1));
        let b = solve_bound_state(&p, &man, None).unwrap();
        prop_assert!(((b.energy - p.mu) / p.m.max(p.mu.abs())).abs() < 1e-9);
    }

    #[test]
    fn principal_function_decreasing(p in params(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let man = Manifold::sphere(1.0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let e1 = p.m - 2.0 * p.m * (1.0 - lo);
        let e2 = p.m - 2.0 * p.m * (1.0 - hi);
        let f1 = principal_scalar(e1, &p, &man).unwrap().value;
        let f2 = principal_scalar(e2, &p, &man).unwrap().value;
        prop_assert!(f2 < f1);
    }

    #[test]
    fn chi_equation_monotone(p in params(), c1 in 0.0f64..5.0, c2 in 0.0f64..5.0, n in 1u64..10_000) {
        prop_assume!((c1 - c2).abs() > 1e-3);
        let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
        let man = Manifold::sphere(1.0).unwrap();
        let p = p.with_n(n);
        let (x1, x2) = (lo * p.m - 0.9 * p.m, hi * p.m - 0.9 * p.m);
        prop_assert!(chi_equation_lhs(x2, &p, &man).unwrap() > chi_equation_lhs(x1, &p, &man).unwrap());
        let u1 = interaction_functional(&TrialState::Constant, x1, &p, &man).unwrap();
        let u2 = interaction_functional(&TrialState::Constant, x2, &p, &man).unwrap();
        prop_assert!(u2 < u1);
    }

    #[test]
    fn inequality_function_positive(lx in -6.0f64..6.0, eps in 1e-4f64..0.4999, ld in -3.0f64..3.0) {
        let delta = 10f64.powf(ld);
        let f = appendix_f(&InequalityParams::new(10f64.powf(lx), eps, delta).unwrap()).unwrap();
        prop_assert!(f > 0.0);
        let xs = appendix_minimizer(eps, delta);
        let fmin = appendix_f(&InequalityParams::new(xs, eps, delta).unwrap()).unwrap();
        prop_assert!(fmin <= f * (1.0 + 1e-12));
        prop_assert!(fmin > delta * eps);
    }

    #[test]
    fn single_precision_tracks_double(ls in -2.0f64..1.0, d in 0.0f64..2.0) {
        let s = 10f64.powf(ls);
        let k64 = heat_kernel_at_distance(&Manifold::<f64>::sphere(1.0).unwrap(), d, s, 0.5).unwrap();
        let k32 = heat_kernel_at_distance(&Manifold::<f32>::sphere(1.0).unwrap(), d as f32, s as f32, 0.5).unwrap();
        let scale = heat_kernel_at_distance(&Manifold::<f64>::sphere(1.0).unwrap(), 0.0, s, 0.5).unwrap();
        prop_assert!((k64 - k32 as f64).abs() < 1e-4 * scale);
    }
}
