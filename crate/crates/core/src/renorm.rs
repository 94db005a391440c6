//! Cutoff renormalization and the bound-state condition in the sector with
//! no spectator bosons, where the principal operator is the scalar
//!
//! `Φ(E) = μ − E + λ² ∫₀^∞ ds K_s(a,a) [e^{-s(m−μ)} − e^{-s(m−E)}]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, Point};
use crate::heatkernel::diag_unchecked;
use crate::numerics::{solve_bracketed, Quad, RootOptions, TanhSinh};
use crate::scalar::{c, Scalar};

/// Boson mass, physical binding energy, coupling, boson count and source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T> {
    pub m: T,
    pub mu: T,
    pub lambda: T,
    pub n: u64,
    pub source: Point<T>,
}

impl<T: Scalar> PhysicalParams<T> {
    pub fn new(m: T, mu: T, lambda: T, n: u64) -> Result<Self> {
        let p = Self {
            m,
            mu,
            lambda,
            n,
            source: Point::new(T::zero(), T::zero()),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_n(self, n: u64) -> Self {
        Self { n, ..self }
    }

    pub fn with_source(self, source: Point<T>) -> Self {
        Self { source, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > T::zero() && self.m.is_finite()) {
            return Err(Error::domain(format!("m must be positive, got {}", self.m)));
        }
        if !self.mu.is_finite() || self.mu >= self.m {
            return Err(Error::domain(format!(
                "mu must be finite and below m = {}, got {}",
                self.m, self.mu
            )));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::domain(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn n_real(&self) -> T {
        T::lit(self.n as f64)
    }

    /// `m − μ`, the decay rate of the subtraction term.
    pub fn alpha(&self) -> T {
        self.m - self.mu
    }
}

/// Value of the principal function with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalValue<T> {
    pub value: T,
    pub integral_residual: T,
}

/// Result of the bound-state root search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState<T> {
    pub energy: T,
    /// `|Φ(E*)|` at the returned root.
    pub residual: T,
    pub iterations: usize,
    pub bracket: (T, T),
}

/// Natural time scale `2mρ²` of a geometry, where curvature or topology
/// starts to matter.
pub(crate) fn geometry_time_scale<T: Scalar>(man: &Manifold<T>, m: T) -> Option<T> {
    man.length_scale().map(|l| (m + m) * l * l)
}

/// `∫_lo^hi ds K_s(a,a) w(s)` in the variable `ln s`, split at the given
/// breakpoints.
pub(crate) fn diag_integral<T: Scalar, W: Fn(T) -> T>(
    man: &Manifold<T>,
    m: T,
    lo: T,
    hi: T,
    breaks: &[T],
    weight: W,
) -> Result<Quad<T>> {
    let mut cuts: Vec<T> = breaks
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = vec![lo];
    edges.extend(cuts);
    edges.push(hi);
    let ts = TanhSinh::<T> {
        max_level: 12,
        ..TanhSinh::default()
    };
    let mut total = Quad {
        value: T::zero(),
        error: T::zero(),
        evals: 0,
        converged: true,
    };
    let mut failure = None;
    for w in edges.windows(2) {
        let q = ts.integrate_log(
            |s| {
                let wt = weight(s);
                if wt == T::zero() {
                    return T::zero();
                }
                match diag_unchecked(man, s, m) {
                    Ok(k) => k * wt,
                    Err(e) => {
                        failure.get_or_insert(e);
                        T::zero()
                    }
                }
            },
            w[0],
            w[1],
        );
        total.value = total.value + q.value;
        total.error = total.error + q.error;
        total.evals += q.evals;
        total.converged &= q.converged;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if !total.converged && total.error > c::<T>(1e3) * T::quad_tol() * total.value.abs() {
        return Err(Error::Accuracy {
            what: "heat-kernel time integral".into(),
            achieved: (total.error / total.value.abs()).to_f64_lossy(),
            requested: T::quad_tol().to_f64_lossy(),
        });
    }
    Ok(total)
}

fn breakpoints<T: Scalar>(man: &Manifold<T>, m: T, rates: &[T]) -> Vec<T> {
    let mut b: Vec<T> = rates
        .iter()
        .filter(|r| **r > T::zero())
        .map(|&r| T::one() / r)
        .collect();
    if let Some(s) = geometry_time_scale(man, m) {
        b.push(s);
    }
    b
}

/// `∫₀^∞ ds K_s(a,a) [e^{-sα} − e^{-sβ}]` for `α, β > 0`.
///
/// The bracket is formed as `e^{-s·min(α,β)}·(1 − e^{-s|β−α|})` so the
/// `1/s` singularity of the kernel cancels without loss of digits.
pub fn kernel_exp_difference<T: Scalar>(
    man: &Manifold<T>,
    m: T,
    alpha: T,
    beta: T,
) -> Result<Quad<T>> {
    if !(alpha > T::zero() && beta > T::zero()) {
        return Err(Error::domain("decay rates must be positive"));
    }
    if alpha == beta {
        return Ok(Quad {
            value: T::zero(),
            error: T::zero(),
            evals: 0,
            converged: true,
        });
    }
    let (lo_rate, hi_rate) = if alpha < beta {
        (alpha, beta)
    } else {
        (beta, alpha)
    };
    let gap = hi_rate - lo_rate;
    let sign = if beta > alpha { T::one() } else { -T::one() };
    let s_lo = c::<T>(1e-18) / hi_rate;
    let s_hi = c::<T>(46.0) / lo_rate;
    let q = diag_integral(
        man,
        m,
        s_lo,
        s_hi,
        &breakpoints(man, m, &[alpha, beta]),
        |s| (-s * lo_rate).exp() * -(-s * gap).exp_m1(),
    )?;
    Ok(Quad {
        value: sign * q.value,
        ..q
    })
}

/// Bare mass difference `μ(ε) = μ + λ² ∫_ε^∞ ds K_s(a,a) e^{-s(m−μ)}`.
pub fn mu_bare<T: Scalar>(p: &PhysicalParams<T>, man: &Manifold<T>, eps: T) -> Result<T> {
    mu_bare_with_residual(p, man, eps).map(|v| v.value)
}

/// [`mu_bare`] together with the quadrature error estimate.
pub fn mu_bare_with_residual<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    eps: T,
) -> Result<PrincipalValue<T>> {
    p.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::domain("cutoff epsilon must be positive"));
    }
    let alpha = p.alpha();
    let s_hi = c::<T>(46.0) / alpha;
    if p.lambda == T::zero() || eps >= s_hi {
        return Ok(PrincipalValue {
            value: p.mu,
            integral_residual: T::zero(),
        });
    }
    let q = diag_integral(man, p.m, eps, s_hi, &breakpoints(man, p.m, &[alpha]), |s| {
        (-s * alpha).exp()
    })?;
    let l2 = p.lambda * p.lambda;
    Ok(PrincipalValue {
        value: p.mu + l2 * q.value,
        integral_residual: l2 * q.error,
    })
}

fn check_energy<T: Scalar>(e: T, p: &PhysicalParams<T>) -> Result<()> {
    p.validate()?;
    if !e.is_finite() || e >= p.m {
        return Err(Error::domain(format!(
            "E must lie below the threshold m = {}, got {e}",
            p.m
        )));
    }
    Ok(())
}

/// Renormalized principal function `Φ(E)`.
pub fn principal_scalar<T: Scalar>(
    e: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<PrincipalValue<T>> {
    check_energy(e, p)?;
    let l2 = p.lambda * p.lambda;
    if l2 == T::zero() || e == p.mu {
        return Ok(PrincipalValue {
            value: p.mu - e,
            integral_residual: T::zero(),
        });
    }
    let q = kernel_exp_difference(man, p.m, p.alpha(), p.m - e)?;
    Ok(PrincipalValue {
        value: p.mu - e + l2 * q.value,
        integral_residual: l2 * q.error,
    })
}

/// Cutoff principal function
/// `Φ_ε(E) = μ(ε) − E − λ² ∫_ε^∞ ds K_s(a,a) e^{-(s−ε)(m−E)}`,
/// evaluated as a single convergent integral.
pub fn principal_scalar_cutoff<T: Scalar>(
    e: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    eps: T,
) -> Result<PrincipalValue<T>> {
    check_energy(e, p)?;
    if !(eps > T::zero()) {
        return Err(Error::domain("cutoff epsilon must be positive"));
    }
    let l2 = p.lambda * p.lambda;
    if l2 == T::zero() {
        return Ok(PrincipalValue {
            value: p.mu - e,
            integral_residual: T::zero(),
        });
    }
    let (alpha, beta) = (p.alpha(), p.m - e);
    let s_hi = eps + c::<T>(46.0) / alpha.min(beta);
    let q = diag_integral(
        man,
        p.m,
        eps,
        s_hi,
        &breakpoints(man, p.m, &[alpha, beta]),
        |s| (-s * alpha).exp() - (-(s - eps) * beta).exp(),
    )?;
    Ok(PrincipalValue {
        value: p.mu - e + l2 * q.value,
        integral_residual: l2 * q.error,
    })
}

/// `dΦ/dE = −1 − λ² ∫₀^∞ ds s K_s(a,a) e^{-s(m−E)}`, always below −1.
pub fn principal_derivative<T: Scalar>(
    e: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<T> {
    check_energy(e, p)?;
    let l2 = p.lambda * p.lambda;
    if l2 == T::zero() {
        return Ok(-T::one());
    }
    let beta = p.m - e;
    let q = diag_integral(
        man,
        p.m,
        c::<T>(1e-18) / beta,
        c::<T>(50.0) / beta,
        &breakpoints(man, p.m, &[beta]),
        |s| s * (-s * beta).exp(),
    )?;
    Ok(-T::one() - l2 * q.value)
}

/// Default bracket `[μ − max(|μ|, m), μ + (m − μ)/2]`.
pub fn default_bracket<T: Scalar>(p: &PhysicalParams<T>) -> (T, T) {
    (p.mu - p.mu.abs().max(p.m), p.mu + p.alpha() * c(0.5))
}

/// Root of `Φ(E) + shift` below the threshold `m`.
///
/// With `bracket = None` the default bracket is widened until it encloses a
/// sign change: downwards by doubling, upwards by halving the distance to `m`.
pub fn solve_principal_root<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    shift: T,
    bracket: Option<(T, T)>,
    opts: &RootOptions<T>,
) -> Result<BoundState<T>> {
    p.validate()?;
    let f = |e: T| principal_scalar(e, p, man).map(|v| v.value + shift);
    let (lo, hi) = match bracket {
        Some((lo, hi)) => {
            if !(lo < hi) || hi >= p.m {
                return Err(Error::domain("bracket must satisfy lo < hi < m"));
            }
            (lo, hi)
        }
        None => {
            let (mut lo, mut hi) = default_bracket(p);
            let mut width = p.mu.abs().max(p.m);
            for _ in 0..200 {
                if f(lo)? >= T::zero() {
                    break;
                }
                width = width + width;
                lo = p.mu - width;
            }
            for _ in 0..200 {
                if f(hi)? <= T::zero() {
                    break;
                }
                hi = p.m - (p.m - hi) * c(0.5);
                if hi >= p.m {
                    break;
                }
            }
            (lo, hi)
        }
    };
    let root = solve_bracketed(f, lo, hi, *opts)?;
    Ok(BoundState {
        energy: root.x,
        residual: root.fx.abs(),
        iterations: root.iterations,
        bracket: (lo, hi),
    })
}

/// Bound-state energy, the root of `Φ(E) = 0`.
pub fn solve_bound_state<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    bracket: Option<(T, T)>,
) -> Result<BoundState<T>> {
    solve_principal_root(p, man, T::zero(), bracket, &default_root_options(p))
}

/// Root tolerances: `1e-9` relative on the energy scale and `1e-10` on `Φ`.
pub fn default_root_options<T: Scalar>(p: &PhysicalParams<T>) -> RootOptions<T> {
    let scale = p.m.max(p.mu.abs());
    RootOptions {
        x_tol: (scale * T::root_tol() * c(0.1)).max(scale * T::epsilon() * c(8.0)),
        f_tol: (scale * c(1e-10) * c(0.1)).max(scale * T::epsilon() * c(8.0)),
        ..RootOptions::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expint_e1;
    use std::f64::consts::PI;

    fn plane_params() -> PhysicalParams<f64> {
        PhysicalParams::new(0.5, 0.0, 1.0, 1).unwrap()
    }

    #[test]
    fn plane_closed_form() {
        let p = plane_params();
        let man = Manifold::plane();
        let v = principal_scalar(-1.0, &p, &man).unwrap();
        assert!(
            (v.value - (1.0 + 3f64.ln() / (4.0 * PI))).abs() < 1e-11,
            "{v:?}"
        );
    }

    #[test]
    fn fixed_point_is_exact() {
        let p = PhysicalParams::new(0.5, 0.2, 1.3, 1).unwrap();
        for man in [Manifold::<f64>::plane(), Manifold::sphere(1.0).unwrap()] {
            assert_eq!(principal_scalar(0.2, &p, &man).unwrap().value, 0.0);
            let root = solve_bound_state(&p, &man, None).unwrap();
            assert!((root.energy - 0.2).abs() < 1e-10);
        }
    }

    #[test]
    fn free_theory() {
        let p = PhysicalParams::new(0.5, 0.2, 0.0, 1).unwrap();
        let man = Manifold::<f64>::torus(1.0, 2.0).unwrap();
        assert_eq!(principal_scalar(0.1, &p, &man).unwrap().value, 0.1);
        assert_eq!(principal_derivative(0.1, &p, &man).unwrap(), -1.0);
        assert_eq!(mu_bare(&p, &man, 1e-3).unwrap(), 0.2);
    }

    #[test]
    fn mu_bare_matches_exponential_integral() {
        let p = plane_params();
        let man = Manifold::plane();
        for &eps in &[1e-6, 1e-3, 0.5] {
            let want = expint_e1(eps / 2.0) / (4.0 * PI);
            assert!((mu_bare(&p, &man, eps).unwrap() - want).abs() < 1e-11 * want.max(1.0));
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let p = plane_params();
        let man = Manifold::plane();
        let h = 1e-5;
        let fd = (principal_scalar(-1.0 + h, &p, &man).unwrap().value
            - principal_scalar(-1.0 - h, &p, &man).unwrap().value)
            / (2.0 * h);
        let d = principal_derivative(-1.0, &p, &man).unwrap();
        assert!((fd - d).abs() < 1e-6);
        // Closed form on the plane: −1 − 1/(4π(m − E)).
        assert!((d + 1.0 + 1.0 / (4.0 * PI * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn shifted_root_matches_bisection() {
        // On the plane Φ(E) + δ = −E + ln((1/2 − E)/(1/2))/(4π) + δ.
        let p = plane_params();
        let man = Manifold::plane();
        let g = |e: f64| -e + ((0.5 - e) / 0.5).ln() / (4.0 * PI) + 0.05;
        let (mut a, mut b) = (-0.5, 0.49);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                a = mid
            } else {
                b = mid
            }
        }
        let root = solve_principal_root(&p, &man, 0.05, None, &default_root_options(&p)).unwrap();
        assert!((root.energy - 0.5 * (a + b)).abs() < 1e-10, "{root:?}");
    }

    #[test]
    fn energy_above_threshold_is_rejected() {
        let p = plane_params();
        assert!(matches!(
            principal_scalar(0.5, &p, &Manifold::plane()),
            Err(Error::Domain(_))
        ));
        assert!(PhysicalParams::new(0.5, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn cutoff_version_converges() {
        let p = PhysicalParams::new(0.5, 0.1, 1.0, 1).unwrap();
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let full = principal_scalar(-0.3, &p, &man).unwrap().value;
        let mut prev = f64::INFINITY;
        for &eps in &[1e-3, 1e-4, 1e-5, 1e-6] {
            let d = (principal_scalar_cutoff(-0.3, &p, &man, eps).unwrap().value - full).abs();
            assert!(d < prev);
            assert!(d < 5.0 * eps * (1.0 / eps).ln());
            prev = d;
        }
    }
}
