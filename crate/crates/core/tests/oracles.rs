//! Library results against values computed by independent means: closed
//! forms, direct series written here, or high-precision external quadrature.

use lee2d::bounds::norm_bound_u;
use lee2d::heatkernel::{heat_kernel, heat_kernel_at_distance};
use lee2d::meanfield::{chi_equation_lhs, constant_ansatz_energy, AnsatzForm};
use lee2d::renorm::{mu_bare, principal_scalar, solve_bound_state, PhysicalParams};
use lee2d::{Manifold, Point};
use std::f64::consts::PI;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn hyperbolic_kernel_matches_high_precision_quadrature() {
    // McKean's integral in its original form, evaluated at 30 digits.
    let h = Manifold::hyperbolic(1.0).unwrap();
    let cases = [
        (0.5, 1.0, 0.075726752643569164727),
        (2.0, 0.3, 0.020688854287628532949),
        (0.1, 2.0, 0.000025992377363947752735),
        (5.0, 4.0, 0.00064765024947562434766),
    ];
    for (t, rho, want) in cases {
        let got = heat_kernel_at_distance(&h, rho, t, 0.5).unwrap();
        assert!(rel(got, want) < 1e-9, "t={t} rho={rho}: {got} vs {want}");
    }
}

#[test]
fn hyperbolic_radius_scaling() {
    // K on radius R at distance d and time t equals K on radius 1 at d/R, t/R², over R².
    let r = 2.5;
    let big = Manifold::hyperbolic(r).unwrap();
    let unit = Manifold::hyperbolic(1.0).unwrap();
    let got = heat_kernel_at_distance(&big, 2.0 * r, 0.7 * r * r, 0.5).unwrap();
    let want = heat_kernel_at_distance(&unit, 2.0, 0.7, 0.5).unwrap() / (r * r);
    assert!(rel(got, want) < 1e-12);
}

#[test]
fn torus_kernel_matches_fourier_series() {
    let (l1, l2) = (1.0, 1.7);
    let torus = Manifold::torus(l1, l2).unwrap();
    let x = Point::<f64>::new(0.1, 0.3);
    let y = Point::new(0.8, 1.5);
    for &t in &[0.002, 0.05, 0.4] {
        let mut sum = 0.0;
        for k1 in -200i32..=200 {
            for k2 in -200i32..=200 {
                let q1 = 2.0 * PI * k1 as f64 / l1;
                let q2 = 2.0 * PI * k2 as f64 / l2;
                let w = (-(q1 * q1 + q2 * q2) * t).exp();
                if w < 1e-300 {
                    continue;
                }
                sum += w * (q1 * (x.x1 - y.x1) + q2 * (x.x2 - y.x2)).cos();
            }
        }
        let want = sum / (l1 * l2);
        let got = heat_kernel(&torus, &x, &y, 2.0 * 0.5 * t, 0.5).unwrap();
        assert!(
            (got - want).abs() < 1e-12 * want.abs().max(1.0 / (4.0 * PI * t)),
            "t={t}"
        );
    }
}

#[test]
fn sphere_kernel_matches_direct_legendre_sum() {
    let s2 = Manifold::sphere(1.0).unwrap();
    let x = Point::<f64>::new(0.2, 0.0);
    let y = Point::<f64>::new(1.1, 0.9);
    let cosd = x.x1.cos() * y.x1.cos() + x.x1.sin() * y.x1.sin() * (x.x2 - y.x2).cos();
    for &t in &[0.01f64, 0.3, 2.0] {
        // Legendre values from Bonnet's recurrence, written out independently.
        let (mut p0, mut p1) = (1.0f64, cosd);
        let mut sum = 1.0 + 3.0 * cosd * (-2.0 * t).exp();
        for l in 2..2000usize {
            let lf = l as f64;
            let p2 = ((2.0 * lf - 1.0) * cosd * p1 - (lf - 1.0) * p0) / lf;
            sum += (2.0 * lf + 1.0) * p2 * (-t * lf * (lf + 1.0)).exp();
            p0 = p1;
            p1 = p2;
        }
        let want = sum / (4.0 * PI);
        let got = heat_kernel(&s2, &x, &y, t, 0.5).unwrap();
        assert!(
            (got - want).abs() < 1e-11 * (1.0 / (4.0 * PI * t)),
            "t={t}: {got} {want}"
        );
    }
}

#[test]
fn plane_principal_function_closed_form() {
    // Φ(E) = μ − E + λ² ∫ K_s(a,a)(e^{-s(m−μ)} − e^{-s(m−E)}) ds and on the
    // plane the integral is (m/2π) ln((m−E)/(m−μ)).
    let p = PhysicalParams::new(0.5, 0.1, 0.8, 1).unwrap();
    let plane = Manifold::plane();
    for &e in &[-1.0, 0.0, 0.3, 0.45] {
        let want =
            p.mu - e + p.m * p.lambda * p.lambda / (2.0 * PI) * ((p.m - e) / (p.m - p.mu)).ln();
        let got = principal_scalar(e, &p, &plane).unwrap().value;
        assert!((got - want).abs() < 1e-12, "E={e}: {got} vs {want}");
    }
}

#[test]
fn plane_bare_mass_closed_form() {
    // μ(ε) = μ + λ² ∫_ε^∞ K_s(a,a) e^{-(m−μ)s} ds = μ + (mλ²/2π) E₁(ε(m−μ)).
    let p = PhysicalParams::new(0.5, 0.1, 0.8, 1).unwrap();
    for &eps in &[1e-6, 1e-3, 0.5] {
        let got = mu_bare(&p, &Manifold::plane(), eps).unwrap();
        let e1 = lee2d::numerics::expint_e1(eps * (p.m - p.mu));
        let want = p.mu + p.m * p.lambda * p.lambda / (2.0 * PI) * e1;
        assert!(rel(got, want) < 1e-10, "eps={eps}: {got} vs {want}");
    }
}

#[test]
fn bound_state_is_mu_on_every_geometry() {
    let p = PhysicalParams::new(0.7, -0.2, 1.3, 1)
        .unwrap()
        .with_source(Point::new(0.4, 0.5));
    for man in [
        Manifold::plane(),
        Manifold::torus(2.0, 3.0).unwrap(),
        Manifold::sphere(1.5).unwrap(),
        Manifold::hyperbolic(0.8).unwrap(),
    ] {
        let b = solve_bound_state(&p, &man, None).unwrap();
        assert!(rel(b.energy, p.mu) < 1e-9, "{man:?}: {}", b.energy);
    }
}

#[test]
fn plane_chi_lhs_closed_form() {
    // lhs(χ) = χ + μ + (mλ²/2π) ln((χ+m)/(m−μ)) on the plane.
    let p = PhysicalParams::new(0.5, 0.1, 0.9, 10).unwrap();
    for &chi in &[-0.3, 0.0, 2.0, 50.0] {
        let want =
            chi + p.mu + p.m * p.lambda * p.lambda / (2.0 * PI) * ((chi + p.m) / (p.m - p.mu)).ln();
        let got = chi_equation_lhs(chi, &p, &Manifold::plane()).unwrap();
        assert!(
            (got - want).abs() < 1e-11 * want.abs().max(1.0),
            "chi={chi}"
        );
    }
}

#[test]
fn printed_ansatz_solves_its_equation() {
    let s2 = Manifold::sphere(1.0).unwrap();
    let p = PhysicalParams::new(0.5, 0.1, 1.0, 1000).unwrap();
    let sol = constant_ansatz_energy(&p, &s2, AnsatzForm::Printed).unwrap();
    let v = 4.0 * PI;
    let d = sol.gap;
    let lhs = d + p.mu + p.m * p.lambda * p.lambda / (2.0 * PI) * (d / (p.m - p.mu)).ln();
    let rhs = p.n as f64 * p.lambda * p.lambda / (v * d);
    assert!(rel(lhs, rhs) < 1e-12);
    assert!((sol.energy - (p.n as f64 * p.m - d)).abs() < 1e-9);
}

#[test]
fn plane_norm_bound_closed_form() {
    // K_s(a,a) = m/(2πs) on the plane, so the bound factorizes into an
    // s-integral and a simplex integral with known values.
    let p = PhysicalParams::new(0.5, 0.1, 1.0, 3).unwrap();
    let e = -0.4;
    let got = norm_bound_u(e, &p, &Manifold::plane()).unwrap().value();
    let delta = p.n as f64 * p.m + p.mu - e;
    // ∫∫_{u1+u2≤1} (u1u2)^{-1/2} ((1−u1)(1−u2))^{-1/2} du = π²/2 by u = sin²θ.
    // K_{2s(1−u)} = m/(2π·2s(1−u)), so the s-integral is ∫ s e^{-sΔ} /(2s) ds.
    let want = p.n as f64 * p.lambda * p.lambda / PI * (p.m / (4.0 * PI)) * (PI * PI / 2.0) / delta;
    assert!(rel(got, want) < 1e-10, "{got} vs {want}");
}
