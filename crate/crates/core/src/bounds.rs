//! Lower bounds on the ground-state energy from positivity of the principal
//! operator, for Cartan–Hadamard and compact surfaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometryClass, Manifold};
use crate::heatkernel::{diag_unchecked, diagonal_bound_check, log_grid};
use crate::numerics::{gamma, GaussLegendre, TanhSinh};
use crate::renorm::{geometry_time_scale, PhysicalParams};
use crate::scalar::{c, Scalar};

/// Norm bound value; infinite when `nm + μ − E` vanishes at working precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum NormBound<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> NormBound<T> {
    pub fn value(&self) -> T {
        match *self {
            NormBound::Finite(v) => v,
            NormBound::Infinite => T::infinity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<T> {
    pub geometry_class: GeometryClass,
    /// Cartan–Hadamard constant in `K_s(x,x) ≤ C/(s/2m)`.
    pub c: Option<T>,
    /// `C̃ = CπΓ(2)`.
    pub c_tilde: Option<T>,
    /// Compact constant in `K_s(x,x) ≤ 1/V + A/(s/2m)`.
    pub a: Option<T>,
    pub f: Option<T>,
    pub lower_bound: T,
    /// Norm bound evaluated at `E = lower_bound`.
    pub norm_bound_at_e: NormBound<T>,
}

/// Bound on `‖Ũ′(E)‖`:
/// `(nλ²/π) ∫₀^∞ ds s e^{-sΔ} ∫∫_{u₁+u₂≤1} du₁du₂ (u₁u₂)^{-1/2}
///  K_{2s(1−u₂)}(a,a)^{1/2} K_{2s(1−u₁)}(a,a)^{1/2}` with `Δ = nm + μ − E`.
///
/// With `u = sin²θ` the weights become constants and the simplex becomes
/// the triangle `θ₁ + θ₂ ≤ π/2`, integrated with a tensor Gauss rule.
pub fn norm_bound_u<T: Scalar>(
    e: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<NormBound<T>> {
    p.validate()?;
    if p.lambda == T::zero() || p.n == 0 {
        return Ok(NormBound::Finite(T::zero()));
    }
    let delta = p.n_real() * p.m + p.mu - e;
    if !(delta > T::zero()) {
        return Err(Error::domain(format!(
            "E must lie below nm + mu, got gap {delta}"
        )));
    }
    if delta < c::<T>(1e-12) * p.m {
        return Ok(NormBound::Infinite);
    }
    let m = p.m;
    let gl = GaussLegendre::<T>::new(24);
    let half_pi = T::FRAC_PI_2();
    // g(σ) = K_σ(a,a)·2πσ/m, equal to 1 for the plane.
    let root_g = |sigma: T| -> Result<T> {
        Ok((diag_unchecked(man, sigma, m)? * T::TAU() * sigma / m).sqrt())
    };
    let inner = |s: T| -> Result<T> {
        let mut outer = T::zero();
        for (t1, w1) in gl.mapped(T::zero(), half_pi) {
            let h1 = root_g(c::<T>(2.0) * s * t1.cos().powi(2))?;
            let mut acc = T::zero();
            for (t2, w2) in gl.mapped(T::zero(), half_pi - t1) {
                acc = acc + w2 * root_g(c::<T>(2.0) * s * t2.cos().powi(2))?;
            }
            outer = outer + w1 * h1 * acc;
        }
        Ok(c::<T>(4.0) * outer)
    };
    let mut failure = None;
    let mut breaks = vec![T::one() / delta];
    if let Some(s0) = geometry_time_scale(man, m) {
        breaks.push(s0);
    }
    let lo = c::<T>(1e-16) / delta;
    let hi = c::<T>(46.0) / delta;
    breaks.retain(|b| *b > lo && *b < hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges = vec![lo];
    edges.extend(breaks);
    edges.push(hi);
    let ts = TanhSinh::<T>::with_tol(c(1e-10));
    let mut total = T::zero();
    for w in edges.windows(2) {
        let q = ts.integrate_log(
            |s| match inner(s) {
                Ok(v) => (-s * delta).exp() * v,
                Err(err) => {
                    failure.get_or_insert(err);
                    T::zero()
                }
            },
            w[0],
            w[1],
        );
        total = total + q.value;
    }
    if let Some(err) = failure {
        return Err(err);
    }
    let pref = p.n_real() * p.lambda * p.lambda / T::PI() * m / (c::<T>(4.0) * T::PI());
    Ok(NormBound::Finite(pref * total))
}

/// `E_gr ≥ nm + μ − nC̃λ²m` with `C̃ = CπΓ(2)`.
pub fn lower_bound_cartan<T: Scalar>(p: &PhysicalParams<T>, c_const: T) -> Result<T> {
    p.validate()?;
    if !(c_const >= T::zero()) {
        return Err(Error::domain("kernel constant C must be nonnegative"));
    }
    let n = p.n_real();
    Ok(n * p.m + p.mu - n * c_tilde(c_const) * p.lambda * p.lambda * p.m)
}

pub fn c_tilde<T: Scalar>(c_const: T) -> T {
    c_const * T::PI() * gamma(c::<T>(2.0))
}

/// `F = Γ(2)/Γ(1/2)² [4/(Vμ) + 4√(Am)√π Γ(3/2)Γ(1/2)/(√μ √V) + AmπΓ(1/2)²]`.
pub fn compact_f<T: Scalar>(p: &PhysicalParams<T>, man: &Manifold<T>, a: T) -> Result<T> {
    p.validate()?;
    let v = man
        .volume()
        .ok_or_else(|| Error::Unsupported("compact bound needs a finite volume".into()))?;
    if !(p.mu > T::zero()) {
        return Err(Error::domain(format!(
            "compact bound needs mu > 0, got {}",
            p.mu
        )));
    }
    if !(a >= T::zero()) {
        return Err(Error::domain("kernel constant A must be nonnegative"));
    }
    let half = c::<T>(0.5);
    let g_half = gamma(half);
    let g_3half = gamma(c::<T>(1.5));
    let pi = T::PI();
    let m = p.m;
    let bracket = c::<T>(4.0) / (v * p.mu)
        + c::<T>(4.0) * (a * m).sqrt() * pi.sqrt() * g_3half * g_half / (p.mu.sqrt() * v.sqrt())
        + a * m * pi * g_half * g_half;
    Ok(gamma(c::<T>(2.0)) / (g_half * g_half) * bracket)
}

/// `E_gr ≥ nm + μ − nλ²F`.
pub fn lower_bound_compact<T: Scalar>(p: &PhysicalParams<T>, man: &Manifold<T>, a: T) -> Result<T> {
    let f = compact_f(p, man, a)?;
    let n = p.n_real();
    Ok(n * p.m + p.mu - n * p.lambda * p.lambda * f)
}

/// Default time grid for fitting the diagonal constants: 8 decades around
/// the geometry's own time scale.
pub fn default_fit_grid<T: Scalar>(man: &Manifold<T>, m: T) -> Vec<T> {
    let s0 = geometry_time_scale(man, m).unwrap_or(T::one() / m);
    log_grid(s0 * c(1e-6), s0 * c(1e2), 81)
}

/// Fits the relevant kernel constant on `s_grid`, evaluates the matching
/// lower bound and the norm bound there.
pub fn bound_report<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    s_grid: &[T],
) -> Result<BoundReport<T>> {
    let fit = diagonal_bound_check(man, s_grid, p.m)?;
    let report = match fit.class {
        GeometryClass::CartanHadamard => {
            let lb = lower_bound_cartan(p, fit.constant)?;
            BoundReport {
                geometry_class: fit.class,
                c: Some(fit.constant),
                c_tilde: Some(c_tilde(fit.constant)),
                a: None,
                f: None,
                lower_bound: lb,
                norm_bound_at_e: norm_bound_u(lb, p, man)?,
            }
        }
        GeometryClass::Compact => {
            let f = compact_f(p, man, fit.constant)?;
            let lb = lower_bound_compact(p, man, fit.constant)?;
            BoundReport {
                geometry_class: fit.class,
                c: None,
                c_tilde: None,
                a: Some(fit.constant),
                f: Some(f),
                lower_bound: lb,
                norm_bound_at_e: norm_bound_u(lb, p, man)?,
            }
        }
    };
    Ok(report)
}
