//! Integral identities and elementary inequalities behind the energy bounds,
//! and the short-time divergence that keeps the trial state out of the
//! domain of the free Hamiltonian.

use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::heatkernel::diag_unchecked;
use crate::numerics::{gamma, GaussJacobi, GaussLegendre, TanhSinh};
use crate::renorm::{diag_integral, geometry_time_scale, PhysicalParams};
use crate::scalar::{c, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seed used by the randomized suite unless overridden.
pub const DEFAULT_SEED: u64 = 0x1ee_2d;

/// Arguments of `f(x) = δ + (ε/δ)^{ε/(1−ε)} x − x^{1−ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityParams<T> {
    pub x: T,
    pub epsilon: T,
    pub delta: T,
}

impl<T: Scalar> InequalityParams<T> {
    pub fn new(x: T, epsilon: T, delta: T) -> Result<Self> {
        let ip = Self { x, epsilon, delta };
        ip.validate()?;
        Ok(ip)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > T::zero() && self.x.is_finite()) {
            return Err(Error::domain("x must be positive and finite"));
        }
        check_eps_delta(self.epsilon, self.delta)
    }

    /// The minimizer of `f` in `x` for this `(ε, δ)`.
    pub fn minimizer(&self) -> T {
        appendix_minimizer(self.epsilon, self.delta)
    }
}

fn check_eps_delta<T: Scalar>(eps: T, delta: T) -> Result<()> {
    if !(eps > T::zero() && eps < c(0.5)) {
        return Err(Error::domain("epsilon must lie in (0, 1/2)"));
    }
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::domain("delta must be positive and finite"));
    }
    Ok(())
}

pub fn appendix_f<T: Scalar>(ip: &InequalityParams<T>) -> Result<T> {
    ip.validate()?;
    let (x, eps, delta) = (ip.x, ip.epsilon, ip.delta);
    let slope = ((eps / delta).ln() * eps / (T::one() - eps)).exp();
    Ok(delta + slope * x - x.powf(T::one() - eps))
}

/// `x*` with `x*^ε = (1−ε)(δ/ε)^{ε/(1−ε)}`.
pub fn appendix_minimizer<T: Scalar>(eps: T, delta: T) -> T {
    ((T::one() - eps).ln() / eps + (delta / eps).ln() / (T::one() - eps)).exp()
}

/// Closed form `f(x*) = δ(1 − (1−ε)^{(1−ε)/ε})`.
pub fn appendix_minimum<T: Scalar>(eps: T, delta: T) -> T {
    -delta * ((T::one() - eps).ln() * (T::one() - eps) / eps).exp_m1()
}

/// `∫_0^1 (1−u)^{−ε} g(u) du` where `g` may have a pole at `u = −σ`.
///
/// Geometric Gauss–Legendre panels resolve the pole on `[0, 1/2]`; a
/// Gauss–Jacobi rule carries the endpoint weight on `[1/2, 1]`.
fn weighted_unit<T: Scalar, G: Fn(T) -> T>(g: G, eps: T, sigma: T) -> Result<T> {
    let half = c::<T>(0.5);
    let gl = GaussLegendre::<T>::new(32);
    let mut edges = vec![T::zero()];
    let mut e = sigma;
    while e < half {
        edges.push(e);
        e = e + e;
    }
    edges.push(half);
    let mut left = T::zero();
    for w in edges.windows(2) {
        left = left + gl.integrate(|u| (T::one() - u).powf(-eps) * g(u), w[0], w[1]);
    }
    let gj = GaussJacobi::new(40, -eps, T::zero())?;
    let right = half.powf(T::one() - eps) * gj.integrate_unit(|x| g(half + half * x));
    let total = left + right;
    if !total.is_finite() {
        return Err(Error::Accuracy {
            what: "Feynman-parameter quadrature".into(),
            achieved: f64::INFINITY,
            requested: 1e-8,
        });
    }
    Ok(total)
}

/// Residuals of the two Feynman parametrizations
/// `1/((1+σ)²σ^{1−ε}) = Γ(3−ε)/Γ(1−ε) ∫ u(1−u)^{−ε}(u+σ)^{ε−3} du` and
/// `1/((1+σ)σ^{1−ε}) = Γ(2−ε)/Γ(1−ε) ∫ (1−u)^{−ε}(u+σ)^{ε−2} du`,
/// each relative to the left side. Returns the larger.
pub fn feynman_param_check<T: Scalar>(sigma: T, eps: T) -> Result<T> {
    if !(sigma > T::zero() && sigma.is_finite()) {
        return Err(Error::domain("sigma must be positive and finite"));
    }
    if !(eps > T::zero() && eps < c(0.5)) {
        return Err(Error::domain("epsilon must lie in (0, 1/2)"));
    }
    let one = T::one();
    let three = c::<T>(3.0);
    let two = c::<T>(2.0);
    let lhs1 = one / ((one + sigma) * (one + sigma) * sigma.powf(one - eps));
    let q1 = weighted_unit(|u| u * (u + sigma).powf(eps - three), eps, sigma)?;
    let rhs1 = gamma(three - eps) / gamma(one - eps) * q1;
    let lhs2 = one / ((one + sigma) * sigma.powf(one - eps));
    let q2 = weighted_unit(|u| (u + sigma).powf(eps - two), eps, sigma)?;
    let rhs2 = gamma(two - eps) / gamma(one - eps) * q2;
    Ok(((rhs1 - lhs1) / lhs1)
        .abs()
        .max(((rhs2 - lhs2) / lhs2).abs()))
}

/// Outcome of the Beta-function checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCheck<T> {
    /// Relative error of `∫_0^1 u^{ε−1}(1−u)^{−ε} du` against `π/sin πε`.
    pub residual: T,
    /// Absolute error of `B(1/2, 1/2)` against `π`.
    pub arcsine_residual: T,
    /// Whether `sin πε ≥ 2ε`.
    pub sine_bound: bool,
}

pub fn beta_identity_check<T: Scalar>(eps: T) -> Result<BetaCheck<T>> {
    if !(eps > T::zero() && eps <= c(0.5)) {
        return Err(Error::domain("epsilon must lie in (0, 1/2]"));
    }
    let one = T::one();
    let half = c::<T>(0.5);
    // Split at 1/2 so each rule sees one algebraic endpoint.
    let left = GaussJacobi::new(40, T::zero(), eps - one)?;
    let right = GaussJacobi::new(40, -eps, T::zero())?;
    let ql = half.powf(eps) * left.integrate_unit(|x| (one - half * x).powf(-eps));
    let qr = half.powf(one - eps) * right.integrate_unit(|x| (half + half * x).powf(eps - one));
    let exact = T::PI() / (T::PI() * eps).sin();
    let arcsine = GaussJacobi::new(8, -half, -half)?.integrate_unit(|_| one);
    Ok(BetaCheck {
        residual: ((ql + qr - exact) / exact).abs(),
        arcsine_residual: (arcsine - T::PI()).abs(),
        sine_bound: (T::PI() * eps).sin() >= eps + eps,
    })
}

/// Relative error of `Γ(k+1)^{-1} ∫_0^∞ s^k e^{−as} ds` against `a^{−(k+1)}`.
pub fn exp_integral_identity_check<T: Scalar>(a: T, k: T) -> Result<T> {
    if !(a > T::zero() && a.is_finite()) {
        return Err(Error::domain("a must be positive and finite"));
    }
    if !(k > -T::one() && k.is_finite()) {
        return Err(Error::domain("k must exceed -1"));
    }
    let ts = TanhSinh::<T> {
        max_level: 12,
        ..TanhSinh::with_tol(c(1e-13))
    };
    let f = |s: T| {
        if s > T::zero() {
            s.powf(k) * (-a * s).exp()
        } else {
            T::zero()
        }
    };
    let knee = T::one() / a;
    let far = (c::<T>(60.0) + c::<T>(4.0) * k.max(T::zero())) / a;
    let head = ts.integrate(f, T::zero(), knee);
    let tail = ts.integrate(f, knee, far);
    let q = head.value + tail.value;
    let exact = -(k + T::one()) * a.ln();
    Ok((q / gamma(k + T::one()) / exact.exp() - T::one()).abs())
}

/// Short-time behaviour of `∫_ε ds e^{−sΔ} K_s(a,a)` and of its finite
/// companion `Δ ∫_ε du u e^{−uΔ} K_u(a,a)` as the cutoff is removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport<T> {
    pub gap: T,
    pub epsilons: Vec<T>,
    pub cutoff_integrals: Vec<T>,
    /// Least-squares slope of the cutoff integral against `ln(1/ε)`.
    pub slope: T,
    /// `m/(2π)`, the coefficient of the universal `1/s` singularity.
    pub expected_slope: T,
    pub slope_error: T,
    pub companion: Vec<T>,
    /// `(max − min)/|mean|` of the companion over the grid.
    pub companion_spread: T,
    pub slope_ok: bool,
    pub companion_ok: bool,
}

/// Relative tolerance on the fitted slope.
pub const SLOPE_TOL: f64 = 0.02;
/// Relative tolerance on the companion's spread.
pub const COMPANION_TOL: f64 = 1e-6;

/// Cutoff grid from `1e-6` to `1e-10` of the shortest intrinsic time, nine
/// points per four decades.
pub fn default_epsilon_grid<T: Scalar>(p: &PhysicalParams<T>, man: &Manifold<T>, gap: T) -> Vec<T> {
    let mut s0 = T::one() / gap;
    if let Some(tg) = geometry_time_scale(man, p.m) {
        s0 = s0.min(tg);
    }
    (0..9)
        .map(|i| s0 * c::<T>(10f64.powf(-6.0 - 0.5 * i as f64)))
        .collect()
}

pub fn domain_divergence_diagnostic<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    gap: T,
    epsilons: &[T],
) -> Result<DivergenceReport<T>> {
    p.validate()?;
    if !(gap > T::zero() && gap.is_finite()) {
        return Err(Error::domain("the gap nm - E must be positive"));
    }
    if epsilons.len() < 2 || epsilons.iter().any(|&e| !(e > T::zero() && e.is_finite())) {
        return Err(Error::domain("need at least two positive cutoffs"));
    }
    let lo = epsilons.iter().copied().fold(T::infinity(), T::min);
    let hi = epsilons.iter().copied().fold(T::zero(), T::max);
    if (hi / lo).log10() < c(3.0) {
        return Err(Error::domain(
            "cutoff grid must span at least three decades",
        ));
    }
    let m = p.m;
    let s_hi = c::<T>(46.0) / gap;
    let mut breaks = vec![T::one() / gap];
    if let Some(tg) = geometry_time_scale(man, m) {
        breaks.push(tg);
    }
    let mut cutoff = Vec::with_capacity(epsilons.len());
    let mut companion = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps >= s_hi {
            return Err(Error::domain(
                "cutoff exceeds the decay time of the integrand",
            ));
        }
        let q = diag_integral(man, m, eps, s_hi, &breaks, |s| (-s * gap).exp())?;
        cutoff.push(q.value);
        let q = diag_integral(man, m, eps, s_hi, &breaks, |s| s * (-s * gap).exp())?;
        companion.push(gap * q.value);
    }
    // Sanity: the kernel must be finite at the smallest cutoff.
    diag_unchecked(man, lo, m)?;

    let xs: Vec<T> = epsilons.iter().map(|&e| -e.ln()).collect();
    let nf = T::from_count(xs.len());
    let xm = xs.iter().copied().sum::<T>() / nf;
    let ym = cutoff.iter().copied().sum::<T>() / nf;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&cutoff) {
        sxy = sxy + (x - xm) * (y - ym);
        sxx = sxx + (x - xm) * (x - xm);
    }
    let slope = sxy / sxx;
    let expected = m / T::TAU();
    let slope_error = ((slope - expected) / expected).abs();
    let cmax = companion.iter().copied().fold(T::neg_infinity(), T::max);
    let cmin = companion.iter().copied().fold(T::infinity(), T::min);
    let cmean = companion.iter().copied().sum::<T>() / nf;
    let spread = (cmax - cmin) / cmean.abs();
    Ok(DivergenceReport {
        gap,
        epsilons: epsilons.to_vec(),
        cutoff_integrals: cutoff,
        slope,
        expected_slope: expected,
        slope_error,
        companion,
        companion_spread: spread,
        slope_ok: slope_error < c(SLOPE_TOL),
        companion_ok: spread < c(COMPANION_TOL),
    })
}

/// Sizes of the randomized identity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub positivity_draws: usize,
    pub minimum_draws: usize,
    pub identity_draws: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            positivity_draws: 100_000,
            minimum_draws: 10_000,
            identity_draws: 200,
        }
    }
}

/// One line of the suite report. `worst` is the least favourable sample:
/// the largest residual for identities, the smallest margin for
/// inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub all_passed: bool,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn below(name: &str, samples: usize, worst: f64, threshold: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        samples,
        worst,
        threshold,
        passed: worst < threshold,
    }
}

fn above(name: &str, samples: usize, worst: f64, threshold: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        samples,
        worst,
        threshold,
        passed: worst > threshold,
    }
}

/// Runs every identity and inequality on random parameters in `f64`.
pub fn run_identity_suite(cfg: &SuiteConfig) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    // f(x)/δ over log-uniform x, δ and uniform ε.
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.positivity_draws {
        let x = log_uniform(&mut rng, 1e-6, 1e6);
        let eps = rng.gen_range(1e-4..0.5);
        let delta = log_uniform(&mut rng, 1e-3, 1e3);
        let f = appendix_f(&InequalityParams::new(x, eps, delta)?)?;
        worst = worst.min(f / delta);
    }
    checks.push(above("f_positive", cfg.positivity_draws, worst, 0.0));

    // (f(x*) − δε)/δ, the closed-form minimum, and (1−ε) − (1−ε)^{(1−ε)/ε}.
    let (mut margin, mut closed, mut power) = (f64::INFINITY, 0f64, f64::INFINITY);
    for _ in 0..cfg.minimum_draws {
        let eps = rng.gen_range(1e-4..0.5);
        let delta = log_uniform(&mut rng, 1e-3, 1e3);
        let xs = appendix_minimizer(eps, delta);
        let f = appendix_f(&InequalityParams::new(xs, eps, delta)?)?;
        margin = margin.min((f - delta * eps) / delta);
        let exact = appendix_minimum(eps, delta);
        closed = closed.max(((f - exact) / exact).abs());
        power = power.min((1.0 - eps) - (1.0 - eps).powf((1.0 - eps) / eps));
    }
    checks.push(above(
        "f_minimum_exceeds_delta_eps",
        cfg.minimum_draws,
        margin,
        0.0,
    ));
    checks.push(below(
        "f_minimum_closed_form",
        cfg.minimum_draws,
        closed,
        1e-10,
    ));
    checks.push(above("power_inequality", cfg.minimum_draws, power, 0.0));

    let (mut feyn, mut beta, mut arcsine, mut sine, mut expi) = (0f64, 0f64, 0f64, true, 0f64);
    for _ in 0..cfg.identity_draws {
        let eps = rng.gen_range(1e-4..0.5);
        let sigma = log_uniform(&mut rng, 1e-2, 1e2);
        feyn = feyn.max(feynman_param_check(sigma, eps)?);
        let b = beta_identity_check(eps)?;
        beta = beta.max(b.residual);
        arcsine = arcsine.max(b.arcsine_residual);
        sine &= b.sine_bound;
        let a = log_uniform(&mut rng, 0.1, 10.0);
        let k = rng.gen_range(-0.9..4.0);
        expi = expi.max(exp_integral_identity_check(a, k)?);
    }
    let n = cfg.identity_draws;
    checks.push(below("feynman_parametrization", n, feyn, 1e-8));
    checks.push(below("beta_reflection", n, beta, 1e-8));
    checks.push(below("beta_half_half", n, arcsine, 1e-10));
    checks.push(CheckOutcome {
        name: "sine_lower_bound".into(),
        samples: n,
        worst: if sine { 0.0 } else { 1.0 },
        threshold: 0.5,
        passed: sine,
    });
    checks.push(below("exponential_integral", n, expi, 1e-9));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(IdentityReport {
        seed: cfg.seed,
        checks,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::numerics::expint_e1;

    #[test]
    fn f_hand_value_and_small_x_limit() {
        let f: f64 = appendix_f(&InequalityParams::new(1.0, 0.25, 0.1).unwrap()).unwrap();
        assert!((f - (0.1 + 2.5f64.powf(1.0 / 3.0) - 1.0)).abs() < 1e-15);
        assert!((f - 0.4572).abs() < 1e-4);
        let f: f64 = appendix_f(&InequalityParams::new(1e-300, 0.25, 0.1).unwrap()).unwrap();
        assert!((f - 0.1).abs() < 1e-60);
        assert!(InequalityParams::new(1.0, 0.5, 0.1).is_err());
        assert!(InequalityParams::new(1.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn minimizer_is_stationary() {
        for &(eps, delta) in &[(0.25, 0.1), (0.01, 3.0), (0.49, 100.0)] {
            let xs: f64 = appendix_minimizer(eps, delta);
            let f = |x: f64| appendix_f(&InequalityParams::new(x, eps, delta).unwrap()).unwrap();
            let h = 1e-4 * xs;
            assert!(f(xs) < f(xs + h) && f(xs) < f(xs - h));
            assert!((f(xs) - appendix_minimum(eps, delta)).abs() < 1e-12 * delta);
            assert!(f(xs) > delta * eps);
        }
    }

    #[test]
    fn feynman_examples() {
        assert!(feynman_param_check(1.0, 0.25).unwrap() < 1e-8);
        assert!(feynman_param_check(2.0, 1e-4).unwrap() < 1e-8);
        assert!(feynman_param_check(1e3, 0.3).unwrap() < 1e-8);
        assert!(feynman_param_check(1e-3, 0.3).unwrap() < 1e-8);
        assert!(feynman_param_check(0.0, 0.3).is_err());
    }

    #[test]
    fn beta_examples() {
        let b = beta_identity_check(0.25).unwrap();
        assert!(b.residual < 1e-8 && b.arcsine_residual < 1e-10 && b.sine_bound);
        let b = beta_identity_check(0.5).unwrap();
        assert!(b.residual < 1e-8);
        assert!((0.49 * std::f64::consts::PI).sin() >= 0.98);
        assert!(beta_identity_check(1e-3).unwrap().residual < 1e-8);
    }

    #[test]
    fn exp_integral_examples() {
        assert!(exp_integral_identity_check(1.0, 0.0).unwrap() < 1e-12);
        assert!(exp_integral_identity_check(2.0, 1.0).unwrap() < 1e-12);
        assert!(exp_integral_identity_check(0.7, 1.3).unwrap() < 1e-9);
        assert!(exp_integral_identity_check(0.7, -0.9).unwrap() < 1e-9);
        assert!(exp_integral_identity_check(0.7, -1.0).is_err());
    }

    #[test]
    fn plane_divergence_matches_exponential_integral() {
        let p = PhysicalParams::<f64>::new(0.5, 0.1, 1.0, 1).unwrap();
        let man = Manifold::plane();
        let grid = default_epsilon_grid(&p, &man, 1.0);
        let r = domain_divergence_diagnostic(&p, &man, 1.0, &grid).unwrap();
        for (&e, &v) in r.epsilons.iter().zip(&r.cutoff_integrals) {
            let exact = 0.5 / std::f64::consts::TAU * expint_e1(e);
            assert!((v - exact).abs() < 1e-9 * exact, "{v} {exact}");
        }
        assert!(r.slope_ok && r.companion_ok, "{r:?}");
        assert!((r.slope - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-6);
        let mean = r.companion.iter().sum::<f64>() / r.companion.len() as f64;
        assert!((mean - 0.5 / std::f64::consts::TAU).abs() < 1e-6);
    }

    #[test]
    fn sphere_slope_matches_plane() {
        let p = PhysicalParams::<f64>::new(0.5, 0.1, 1.0, 1)
            .unwrap()
            .with_source(Point::new(0.4, 0.2));
        let sph = Manifold::sphere(1.0).unwrap();
        let grid = default_epsilon_grid(&p, &sph, 1.0);
        let r = domain_divergence_diagnostic(&p, &sph, 1.0, &grid).unwrap();
        let q = domain_divergence_diagnostic(&p, &Manifold::plane(), 1.0, &grid).unwrap();
        assert!(((r.slope - q.slope) / q.slope).abs() < 0.02);
        assert!(r.companion_ok);
        assert!(domain_divergence_diagnostic(&p, &sph, 1.0, &grid[..3]).is_err());
    }

    #[test]
    fn small_suite_passes() {
        let cfg = SuiteConfig {
            positivity_draws: 2000,
            minimum_draws: 500,
            identity_draws: 20,
            ..Default::default()
        };
        let r = run_identity_suite(&cfg).unwrap();
        assert!(r.all_passed, "{r:?}");
    }
}
