//! Heat kernels `K_s(x, y; g)` of the semigroup generated by `(1/2m)∇²`, so that
//! the diffusion time is `t = s/(2m)`, together with checks of their
//! structural properties.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    from_sphere_vector, sphere_vector, torus_offset, GeometryClass, Manifold, Point,
};
use crate::numerics::special::{ln_sinh, sinhc};
use crate::numerics::{GaussLegendre, TanhSinh};
use crate::scalar::{c, Scalar};

/// Sphere diagonal switches to its short-time series below this `t/R²`.
const SPHERE_SERIES_TAU: f64 = 1e-4;
/// Hyperbolic diagonal switches to its short-time series below this `t/R²`.
const HYPERBOLIC_SERIES_TAU: f64 = 1e-3;

/// Truncation and quadrature controls for kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct KernelOptions<T> {
    /// Neglected spectral or image tail relative to the diagonal scale.
    pub tail_tol: T,
    /// Relative tolerance of the hyperbolic quadrature.
    pub quad_tol: T,
    /// Largest spectral degree summed on the sphere before giving up.
    pub max_degree: usize,
}

impl<T: Scalar> Default for KernelOptions<T> {
    fn default() -> Self {
        Self {
            tail_tol: (T::epsilon() * c(0.5)).max(c(1e-16)),
            quad_tol: T::quad_tol(),
            max_degree: 2_000_000,
        }
    }
}

/// One kernel evaluation request.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernelQuery<T> {
    pub man: Manifold<T>,
    pub x: Point<T>,
    pub y: Point<T>,
    /// The model's time parameter; diffusion time is `s/(2m)`.
    pub s: T,
    pub m: T,
}

impl<T: Scalar> HeatKernelQuery<T> {
    pub fn evaluate(&self) -> Result<T> {
        heat_kernel(&self.man, &self.x, &self.y, self.s, self.m)
    }
}

fn check_time<T: Scalar>(s: T, m: T) -> Result<T> {
    if !(s > T::zero() && s.is_finite()) {
        return Err(Error::domain(format!(
            "kernel time s must be positive, got {s}"
        )));
    }
    if !(m > T::zero() && m.is_finite()) {
        return Err(Error::domain(format!("mass m must be positive, got {m}")));
    }
    Ok(s / (m + m))
}

/// `K_s(x, y; g)` with default options.
pub fn heat_kernel<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    y: &Point<T>,
    s: T,
    m: T,
) -> Result<T> {
    heat_kernel_with(man, x, y, s, m, &KernelOptions::default())
}

pub fn heat_kernel_with<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    y: &Point<T>,
    s: T,
    m: T,
    opts: &KernelOptions<T>,
) -> Result<T> {
    let t = check_time(s, m)?;
    man.validate_point(x)?;
    man.validate_point(y)?;
    match *man {
        Manifold::Torus { l1, l2 } => Ok(periodic_1d(x.x1 - y.x1, t, l1, opts.tail_tol)
            * periodic_1d(x.x2 - y.x2, t, l2, opts.tail_tol)),
        _ => radial_kernel(man, man.distance_unchecked(x, y), t, opts),
    }
}

/// Kernel as a function of geodesic distance on the isotropic geometries.
pub fn heat_kernel_at_distance<T: Scalar>(man: &Manifold<T>, d: T, s: T, m: T) -> Result<T> {
    let t = check_time(s, m)?;
    if !(d >= T::zero()) {
        return Err(Error::domain("distance must be nonnegative"));
    }
    if let Manifold::Torus { .. } = man {
        return Err(Error::Unsupported(
            "the torus kernel is not a function of distance alone".into(),
        ));
    }
    radial_kernel(man, d, t, &KernelOptions::default())
}

/// Diagonal value `K_s(x, x; g)`.
pub fn heat_kernel_diag<T: Scalar>(man: &Manifold<T>, x: &Point<T>, s: T, m: T) -> Result<T> {
    man.validate_point(x)?;
    diag_unchecked(man, s, m)
}

/// Diagonal value on these homogeneous spaces; independent of the point.
pub(crate) fn diag_unchecked<T: Scalar>(man: &Manifold<T>, s: T, m: T) -> Result<T> {
    let t = check_time(s, m)?;
    let opts = KernelOptions::default();
    match *man {
        Manifold::Torus { l1, l2 } => Ok(periodic_1d(T::zero(), t, l1, opts.tail_tol)
            * periodic_1d(T::zero(), t, l2, opts.tail_tol)),
        _ => radial_kernel(man, T::zero(), t, &opts),
    }
}

/// `K_s(x,x)·(4πs/2m)`, which tends to the universal coefficient 1 as `s → 0`.
pub fn leading_coefficient<T: Scalar>(man: &Manifold<T>, x: &Point<T>, s: T, m: T) -> Result<T> {
    let t = check_time(s, m)?;
    Ok(heat_kernel_diag(man, x, s, m)? * c::<T>(4.0) * T::PI() * t)
}

fn radial_kernel<T: Scalar>(man: &Manifold<T>, d: T, t: T, opts: &KernelOptions<T>) -> Result<T> {
    match *man {
        Manifold::Plane => Ok(plane_kernel(d, t)),
        Manifold::Sphere { radius } => {
            let r2 = radius * radius;
            let tau = t / r2;
            let theta = (d / radius).min(T::PI());
            if theta == T::zero() && tau < c(SPHERE_SERIES_TAU) {
                return Ok(sphere_diag_series(tau) / r2);
            }
            Ok(sphere_spectral_sum(theta.cos(), tau, opts)? / r2)
        }
        Manifold::HyperbolicPlane { radius } => {
            let r2 = radius * radius;
            let tau = t / r2;
            let rho = d / radius;
            if rho == T::zero() {
                return Ok(hyperbolic_diag_unit(tau) / r2);
            }
            Ok(hyperbolic_unit(tau, rho, opts)? / r2)
        }
        Manifold::Torus { .. } => unreachable!("torus handled separately"),
    }
}

fn plane_kernel<T: Scalar>(d: T, t: T) -> T {
    (-(d * d) / (c::<T>(4.0) * t)).exp() / (c::<T>(4.0) * T::PI() * t)
}

/// Heat kernel of the circle of circumference `l`; the torus kernel is a
/// product of two of these.
pub fn circle_kernel<T: Scalar>(d: T, s: T, m: T, l: T) -> Result<T> {
    let t = check_time(s, m)?;
    if !(l > T::zero()) {
        return Err(Error::domain("circle length must be positive"));
    }
    Ok(periodic_1d(d, t, l, KernelOptions::<T>::default().tail_tol))
}

/// One-dimensional periodic heat kernel on a circle of length `l`.
///
/// Uses the image sum for short times and its Poisson dual (the Fourier
/// series) for long times; both truncate when the next term is below
/// `tol` relative to the running sum.
fn periodic_1d<T: Scalar>(d: T, t: T, l: T, tol: T) -> T {
    let d = torus_offset(d, l);
    if t <= l * l / (c::<T>(4.0) * T::PI()) {
        let four_t = c::<T>(4.0) * t;
        let mut sum = (-(d * d) / four_t).exp();
        let mut k = 1i64;
        loop {
            let kl = T::lit(k as f64) * l;
            let a = d + kl;
            let b = d - kl;
            let term = (-(a * a) / four_t).exp() + (-(b * b) / four_t).exp();
            sum = sum + term;
            if term <= tol * sum || k > 10_000 {
                break;
            }
            k += 1;
        }
        sum / (T::PI() * four_t).sqrt()
    } else {
        let mut sum = T::one();
        let mut k = 1i64;
        loop {
            let q = T::TAU() * T::lit(k as f64) / l;
            let term = c::<T>(2.0) * (-t * q * q).exp() * (q * d).cos();
            sum = sum + term;
            if term.abs() <= tol * sum.abs() || k > 10_000 {
                break;
            }
            k += 1;
        }
        (sum / l).max(T::zero())
    }
}

/// Short-time diagonal of the unit sphere times 1, in units of `1/R²`.
fn sphere_diag_series<T: Scalar>(tau: T) -> T {
    let poly =
        T::one() + tau / c(3.0) + tau * tau / c(15.0) + c::<T>(4.0) * tau * tau * tau / c(315.0);
    poly / (c::<T>(4.0) * T::PI() * tau)
}

/// Σ_l (2l+1)/(4π) P_l(x) e^{-τ l(l+1)} on the unit sphere.
fn sphere_spectral_sum<T: Scalar>(x: T, tau: T, opts: &KernelOptions<T>) -> Result<T> {
    // Tail Σ_{l>L} (2l+1) e^{-τl(l+1)} ≤ e^{-τL(L+1)}/τ.
    let target = opts.tail_tol * tau.min(T::one());
    let need = (-target.ln() / tau).max(T::zero());
    let lmax_f = ((T::one() + c::<T>(4.0) * need).sqrt() - T::one()) * c(0.5);
    let lmax = lmax_f
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .saturating_add(1);
    if lmax > opts.max_degree {
        let m = T::from_count(opts.max_degree);
        let achieved = (-tau * m * (m + T::one())).exp() / tau;
        return Err(Error::Accuracy {
            what: "sphere spectral sum".into(),
            achieved: achieved.to_f64_lossy(),
            requested: target.to_f64_lossy(),
        });
    }
    let step = (-(tau + tau)).exp();
    let mut weight = T::one(); // e^{-τ l(l+1)}
    let mut ratio = step; // e^{-2τ(l+1)}
    let (mut p0, mut p1) = (T::one(), x);
    let mut sum = T::one();
    for l in 1..=lmax {
        weight = weight * ratio;
        ratio = ratio * step;
        let p = if l == 1 {
            p1
        } else {
            let lf = T::from_count(l);
            let p2 = ((lf + lf - T::one()) * x * p1 - (lf - T::one()) * p0) / lf;
            p0 = p1;
            p1 = p2;
            p2
        };
        sum = sum + T::from_count(2 * l + 1) * p * weight;
        if weight == T::zero() {
            break;
        }
    }
    Ok((sum / (c::<T>(4.0) * T::PI())).max(T::zero()))
}

fn gl24() -> &'static GaussLegendre<f64> {
    static RULE: OnceLock<GaussLegendre<f64>> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(24))
}

fn composite24<T: Scalar, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize) -> T {
    let rule = gl24();
    let h = (b - a) / T::from_count(panels);
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + h * T::from_count(p);
        let half = h * c(0.5);
        let mid = lo + half;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            total = total + T::lit(*w) * half * f(mid + half * T::lit(*x));
        }
    }
    total
}

/// Diagonal of the curvature −1 hyperbolic plane.
///
/// Short times use the asymptotic series; otherwise the spectral (Plancherel)
/// representation `(1/2π)∫ e^{-(1/4+ν²)τ} ν tanh(πν) dν` is integrated with a
/// fixed composite Gauss rule. For `τ < 1` the flat part `ν` is removed
/// analytically so the remaining integrand decays like `e^{-2πν}`.
fn hyperbolic_diag_unit<T: Scalar>(tau: T) -> T {
    let two_pi = T::TAU();
    if tau < c(HYPERBOLIC_SERIES_TAU) {
        let poly = T::one() - tau / c(3.0) + tau * tau / c(15.0)
            - c::<T>(4.0) * tau * tau * tau / c(315.0);
        return poly / (c::<T>(2.0) * two_pi * tau);
    }
    let pi = T::PI();
    let j = if tau < T::one() {
        let corr = composite24(
            |nu: T| nu * (-tau * nu * nu).exp() / ((two_pi * nu).exp() + T::one()),
            T::zero(),
            c(7.5),
            5,
        );
        T::one() / (tau + tau) - corr - corr
    } else {
        let top = (c::<T>(46.0) / tau).sqrt();
        composite24(
            |nu: T| (-tau * nu * nu).exp() * nu * (pi * nu).tanh(),
            T::zero(),
            top,
            4,
        )
    };
    (-tau * c(0.25)).exp() * j / two_pi
}

/// Off-diagonal kernel of the curvature −1 hyperbolic plane (McKean's formula)
///
/// `K = √2 e^{-τ/4} (4πτ)^{-3/2} ∫_ρ^∞ r e^{-r²/4τ} / √(cosh r − cosh ρ) dr`,
/// integrated in `v` with `r = ρ + v²`, which removes the endpoint singularity.
fn hyperbolic_unit<T: Scalar>(tau: T, rho: T, opts: &KernelOptions<T>) -> Result<T> {
    Ok(hyperbolic_ln_unit(tau, rho, opts)?.exp().max(T::zero()))
}

/// `ln K` of [`hyperbolic_unit`], finite where `K` itself underflows.
fn hyperbolic_ln_unit<T: Scalar>(tau: T, rho: T, opts: &KernelOptions<T>) -> Result<T> {
    let four_tau = c::<T>(4.0) * tau;
    let span = c::<T>(168.0) * tau;
    let vmax2 = (span / (rho + (rho * rho + span).sqrt())).min(c(200.0));
    let shift = rho * c(0.5);
    let ts = TanhSinh {
        rel_tol: opts.quad_tol,
        abs_tol: T::zero(),
        min_level: 3,
        max_level: 12,
    };
    let q = ts.integrate(
        |v| {
            let v2 = v * v;
            let half = v2 * c(0.5);
            let arg = rho + half;
            if arg <= T::zero() {
                return T::zero();
            }
            let expo = -(c::<T>(2.0) * rho * v2 + v2 * v2) / four_tau;
            let ln_den = c::<T>(0.5) * (ln_sinh(arg) + sinhc(half).ln());
            // e^{-ρ/2} is factored out so the integrand stays normal
            c::<T>(2.0) * (rho + v2) * (expo - ln_den + shift).exp()
        },
        T::zero(),
        vmax2.sqrt(),
    );
    if !q.converged {
        return Err(Error::Accuracy {
            what: "hyperbolic kernel quadrature".into(),
            achieved: (q.error / q.value.abs()).to_f64_lossy(),
            requested: opts.quad_tol.to_f64_lossy(),
        });
    }
    let ln_pref = c::<T>(0.5) * T::LN_2()
        - tau * c(0.25)
        - c::<T>(1.5) * (c::<T>(4.0) * T::PI() * tau).ln()
        - rho * rho / four_tau
        - shift;
    Ok(ln_pref + q.value.ln())
}

/// Time derivative `∂K/∂s` from the mode-wise identity
/// `∂_s e^{-sσ/2m} = -(σ/2m) e^{-sσ/2m}` (sphere and torus).
pub fn heat_kernel_time_derivative<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    y: &Point<T>,
    s: T,
    m: T,
) -> Result<T> {
    let t = check_time(s, m)?;
    man.validate_point(x)?;
    man.validate_point(y)?;
    let inv2m = T::one() / (m + m);
    match *man {
        Manifold::Sphere { radius } => {
            let r2 = radius * radius;
            let tau = t / r2;
            let xx = (man.distance_unchecked(x, y) / radius).cos();
            let lmax = ((c::<T>(40.0) / tau).sqrt() + c(10.0))
                .to_usize()
                .unwrap_or(0);
            let mut sum = T::zero();
            let (mut p0, mut p1) = (T::one(), xx);
            for l in 1..=lmax {
                let p = if l == 1 {
                    p1
                } else {
                    let lf = T::from_count(l);
                    let p2 = ((lf + lf - T::one()) * xx * p1 - (lf - T::one()) * p0) / lf;
                    p0 = p1;
                    p1 = p2;
                    p2
                };
                let ll = T::from_count(l * (l + 1));
                sum = sum - T::from_count(2 * l + 1) * p * ll * (-tau * ll).exp();
            }
            Ok(sum / (c::<T>(4.0) * T::PI() * r2 * r2) * inv2m)
        }
        Manifold::Torus { l1, l2 } => {
            let f = |d: T, l: T| -> (T, T) {
                let mut v = T::one() / l;
                let mut dv = T::zero();
                let kmax = ((c::<T>(40.0) / t).sqrt() * l / T::TAU() + c(5.0))
                    .to_usize()
                    .unwrap_or(0);
                for k in 1..=kmax {
                    let q = T::TAU() * T::from_count(k) / l;
                    let e = c::<T>(2.0) * (-t * q * q).exp() * (q * d).cos() / l;
                    v = v + e;
                    dv = dv - q * q * e;
                }
                (v, dv)
            };
            let (a, da) = f(x.x1 - y.x1, l1);
            let (b, db) = f(x.x2 - y.x2, l2);
            Ok((da * b + a * db) * inv2m)
        }
        _ => Err(Error::Unsupported(
            "spectral time derivative needs a compact manifold".into(),
        )),
    }
}

/// Residual of the heat equation `∂_s K = (1/2m)∇²_x K`, both sides by
/// fourth-order centred differences, relative to `K_s(x,x)/s`.
pub fn heat_equation_residual<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    y: &Point<T>,
    s: T,
    m: T,
) -> Result<T> {
    let t = check_time(s, m)?;
    man.validate_point(x)?;
    man.validate_point(y)?;
    // Fourth-order central stencils throughout.
    let d1 = |fp2: T, fp: T, fm: T, fm2: T, h: T| {
        (fm2 - fp2 + c::<T>(8.0) * (fp - fm)) / (c::<T>(12.0) * h)
    };
    let d2 = |fp2: T, fp: T, f0: T, fm: T, fm2: T, h: T| {
        (c::<T>(16.0) * (fp + fm) - fp2 - fm2 - c::<T>(30.0) * f0) / (c::<T>(12.0) * h * h)
    };
    let mut ds = s * c(1e-2);
    if let Manifold::HyperbolicPlane { radius } = *man {
        // K decays like e^{-s/8mR²} at large s
        ds = ds.min(c::<T>(0.08) * m * radius * radius);
    }
    let k0 = heat_kernel(man, x, y, s, m)?;
    let ks = |j: T| heat_kernel(man, x, y, s + j * ds, m);
    let dk_ds = d1(ks(c(2.0))?, ks(T::one())?, ks(-T::one())?, ks(c(-2.0))?, ds);
    let scale_len = t.sqrt().min(man.length_scale().unwrap_or(T::infinity()));
    let h = scale_len * c(1e-2);
    let lap = match *man {
        Manifold::Torus { .. } => {
            let at =
                |a: T, b: T| heat_kernel(man, &man.wrap(Point::new(x.x1 + a, x.x2 + b)), y, s, m);
            let two = h + h;
            let xx = d2(
                at(two, T::zero())?,
                at(h, T::zero())?,
                k0,
                at(-h, T::zero())?,
                at(-two, T::zero())?,
                h,
            );
            let yy = d2(
                at(T::zero(), two)?,
                at(T::zero(), h)?,
                k0,
                at(T::zero(), -h)?,
                at(T::zero(), -two)?,
                h,
            );
            xx + yy
        }
        _ => {
            let d = man.distance_unchecked(x, y);
            // The radial profile is even in d, so stencils may cross the centre.
            let f = |r: T| heat_kernel_at_distance(man, r.abs(), s, m);
            let two = h + h;
            if d < h * c(1e-6) {
                // ∇² = 2 f''(0) at the centre.
                let f0 = f(T::zero())?;
                c::<T>(2.0) * (c::<T>(16.0) * f(h)? - f(two)? - c::<T>(15.0) * f0)
                    / (c::<T>(6.0) * h * h)
            } else {
                let (fp2, fp, f0, fm, fm2) =
                    (f(d + two)?, f(d + h)?, f(d)?, f(d - h)?, f(d - two)?);
                let jac = match *man {
                    Manifold::Plane => T::one() / d,
                    Manifold::Sphere { radius } => {
                        (d / radius).cos() / ((d / radius).sin() * radius)
                    }
                    Manifold::HyperbolicPlane { radius } => {
                        (d / radius).cosh() / ((d / radius).sinh() * radius)
                    }
                    Manifold::Torus { .. } => unreachable!(),
                };
                d2(fp2, fp, f0, fm, fm2, h) + jac * d1(fp2, fp, fm, fm2, h)
            }
        }
    };
    let rhs = lap / (m + m);
    // Kernel values far in the tail are only accurate relative to the
    // diagonal, so the residual is measured against K_s(x,x)/s.
    let scale = dk_ds
        .abs()
        .max(rhs.abs())
        .max(diag_unchecked(man, s, m)? / s);
    Ok((dk_ds - rhs).abs() / scale)
}

/// Relative residual `|∫ K_s(x,y) dx − 1|`.
pub fn stochastic_completeness_check<T: Scalar>(
    man: &Manifold<T>,
    y: &Point<T>,
    s: T,
    m: T,
) -> Result<T> {
    let t = check_time(s, m)?;
    man.validate_point(y)?;
    let ts = TanhSinh::<T>::default();
    let total = match *man {
        Manifold::Plane => {
            let rmax = (c::<T>(200.0) * t).sqrt();
            let q = ts.integrate(|r| T::TAU() * r * plane_kernel(r, t), T::zero(), rmax);
            converged(q, "plane mass")?
        }
        Manifold::Sphere { radius } => {
            let opts = KernelOptions::default();
            let tau = t / (radius * radius);
            let mut err = None;
            let q = ts.integrate(
                |th: T| match sphere_spectral_sum(th.cos(), tau, &opts) {
                    Ok(v) => T::TAU() * v * th.sin(),
                    Err(e) => {
                        err = Some(e);
                        T::zero()
                    }
                },
                T::zero(),
                T::PI(),
            );
            if let Some(e) = err {
                return Err(e);
            }
            converged(q, "sphere mass")?
        }
        Manifold::HyperbolicPlane { radius } => {
            let tau = t / (radius * radius);
            let rmax = tau + (tau * tau + c::<T>(184.0) * tau).sqrt();
            let opts = KernelOptions::default();
            let mut err = None;
            let q = ts.integrate(
                |r: T| {
                    // sinh r overflows where the mass sits at large τ
                    let k = if r == T::zero() {
                        Ok(T::zero())
                    } else {
                        hyperbolic_ln_unit(tau, r, &opts).map(|lk| (ln_sinh(r) + lk).exp())
                    };
                    match k {
                        Ok(v) => T::TAU() * v,
                        Err(e) => {
                            err = Some(e);
                            T::zero()
                        }
                    }
                },
                T::zero(),
                rmax,
            );
            if let Some(e) = err {
                return Err(e);
            }
            converged(q, "hyperbolic mass")?
        }
        Manifold::Torus { l1, l2 } => {
            let n1 = torus_nodes(l1, t);
            let n2 = torus_nodes(l2, t);
            let (h1, h2) = (l1 / T::from_count(n1), l2 / T::from_count(n2));
            let mut sum = T::zero();
            for i in 0..n1 {
                for j in 0..n2 {
                    let p = Point::new(h1 * T::from_count(i), h2 * T::from_count(j));
                    sum = sum + heat_kernel(man, &p, y, s, m)?;
                }
            }
            sum * h1 * h2
        }
    };
    Ok((total - T::one()).abs())
}

/// Relative residual of `∫ K_{s1}(x,y) K_{s2}(y,z) dy = K_{s1+s2}(x,z)`.
pub fn semigroup_check<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    z: &Point<T>,
    s1: T,
    s2: T,
    m: T,
) -> Result<T> {
    let t1 = check_time(s1, m)?;
    let t2 = check_time(s2, m)?;
    man.validate_point(x)?;
    man.validate_point(z)?;
    let target = heat_kernel(man, x, z, s1 + s2, m)?;
    let integral = match *man {
        Manifold::Plane => {
            let d = man.distance_unchecked(x, z);
            let rmax = d + (c::<T>(200.0) * t1.max(t2)).sqrt();
            let gl = GaussLegendre::<T>::new(32);
            let nphi = 256usize;
            let panels = 24usize;
            let hr = rmax / T::from_count(panels);
            let mut sum = T::zero();
            for p in 0..panels {
                let lo = hr * T::from_count(p);
                for (r, w) in gl.mapped(lo, lo + hr) {
                    let mut ring = T::zero();
                    for k in 0..nphi {
                        let phi = T::TAU() * T::from_count(k) / T::from_count(nphi);
                        let y = Point::new(x.x1 + r * phi.cos(), x.x2 + r * phi.sin());
                        ring = ring
                            + plane_kernel(man.distance_unchecked(x, &y), t1)
                                * plane_kernel(man.distance_unchecked(&y, z), t2);
                    }
                    sum = sum + w * r * ring * T::TAU() / T::from_count(nphi);
                }
            }
            sum
        }
        Manifold::Sphere { radius } => {
            let frame = sphere_frame(x);
            let gl = GaussLegendre::<T>::new(96);
            let nphi = 192usize;
            let mut sum = T::zero();
            for (u, w) in gl.mapped(-T::one(), T::one()) {
                let st = (T::one() - u * u).max(T::zero()).sqrt();
                let mut ring = T::zero();
                for k in 0..nphi {
                    let phi = T::TAU() * T::from_count(k) / T::from_count(nphi);
                    let y = frame_point(&frame, u, st, phi);
                    ring = ring + heat_kernel(man, x, &y, s1, m)? * heat_kernel(man, &y, z, s2, m)?;
                }
                sum = sum + w * ring * T::TAU() / T::from_count(nphi);
            }
            sum * radius * radius
        }
        Manifold::Torus { l1, l2 } => {
            let tmin = t1.min(t2);
            let n1 = torus_nodes(l1, tmin);
            let n2 = torus_nodes(l2, tmin);
            let (h1, h2) = (l1 / T::from_count(n1), l2 / T::from_count(n2));
            let mut sum = T::zero();
            for i in 0..n1 {
                for j in 0..n2 {
                    let y = Point::new(h1 * T::from_count(i), h2 * T::from_count(j));
                    sum = sum + heat_kernel(man, x, &y, s1, m)? * heat_kernel(man, &y, z, s2, m)?;
                }
            }
            sum * h1 * h2
        }
        Manifold::HyperbolicPlane { radius } => {
            // Geodesic polar coordinates about x; the distance to z follows
            // from cosh d = cosh r cosh D − sinh r sinh D cos φ, and the
            // integrand is even in φ.
            let dxz = man.distance_unchecked(x, z) / radius;
            let tau = t1.max(t2) / (radius * radius);
            let rmax = dxz + tau + (tau * tau + c::<T>(184.0) * tau).sqrt();
            let gl = GaussLegendre::<T>::new(24);
            let nphi = 96usize;
            let panels = 16usize;
            let hr = rmax / T::from_count(panels);
            let (ch, sh) = (dxz.cosh(), dxz.sinh());
            let mut sum = T::zero();
            for p in 0..panels {
                let lo = hr * T::from_count(p);
                for (r, w) in gl.mapped(lo, lo + hr) {
                    let k1 = heat_kernel_at_distance(man, r * radius, s1, m)?;
                    let mut ring = T::zero();
                    for k in 0..=nphi {
                        let phi = T::PI() * T::from_count(k) / T::from_count(nphi);
                        let arg = (r.cosh() * ch - r.sinh() * sh * phi.cos()).max(T::one());
                        let weight = if k == 0 || k == nphi {
                            c(0.5)
                        } else {
                            T::one()
                        };
                        ring = ring
                            + weight * heat_kernel_at_distance(man, arg.acosh() * radius, s2, m)?;
                    }
                    let ring = ring * T::TAU() / T::from_count(nphi);
                    sum = sum + w * k1 * ring * r.sinh() * radius * radius;
                }
            }
            sum
        }
    };
    Ok((integral - target).abs() / target.abs().max(T::min_positive_value()))
}

/// Relative residual of the scaling law `K_s(x,y;g) = α² K_{α²s}(x,y;α²g)`.
pub fn scaling_check<T: Scalar>(
    man: &Manifold<T>,
    x: &Point<T>,
    y: &Point<T>,
    s: T,
    m: T,
    alpha: T,
) -> Result<T> {
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(Error::domain("scaling factor must be positive"));
    }
    let lhs = heat_kernel(man, x, y, s, m)?;
    let big = man.scaled(alpha);
    let rhs = alpha
        * alpha
        * heat_kernel(
            &big,
            &man.scale_point(x, alpha),
            &man.scale_point(y, alpha),
            alpha * alpha * s,
            m,
        )?;
    let scale = lhs.abs().max(rhs.abs());
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok((lhs - rhs).abs() / scale)
}

/// Diagonal heat-kernel bound with the smallest constant valid on the grid
/// and as `s → 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalBoundReport<T> {
    pub class: GeometryClass,
    /// `C` in `K_s(x,x) ≤ C/(s/2m)`, or `A` in `K_s(x,x) ≤ 1/V + A/(s/2m)`.
    pub constant: T,
    pub volume: Option<T>,
    pub grid_points: usize,
    pub decades: T,
    /// Whether the bound with the fitted constant holds at every grid time.
    pub holds: bool,
}

pub fn diagonal_bound_check<T: Scalar>(
    man: &Manifold<T>,
    s_grid: &[T],
    m: T,
) -> Result<DiagonalBoundReport<T>> {
    let (lo, hi) = s_grid
        .iter()
        .fold((T::infinity(), T::zero()), |(a, b), &s| {
            (a.min(s), b.max(s))
        });
    if s_grid.is_empty() || !(lo > T::zero()) {
        return Err(Error::domain("s-grid must be nonempty and positive"));
    }
    let decades = (hi / lo).log10();
    if decades < c::<T>(6.0) * (T::one() - c(1e-12)) {
        return Err(Error::domain(format!(
            "s-grid spans {decades} decades, at least 6 required"
        )));
    }
    let inv_v = man.volume().map(|v| T::one() / v).unwrap_or(T::zero());
    let mut values = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        values.push((s / (m + m), diag_unchecked(man, s, m)?));
    }
    // The supremum over all times is at least the short-time limit 1/(4π),
    // which finite grids approach from below.
    let constant = values
        .iter()
        .map(|&(t, k)| (k - inv_v) * t)
        .fold(T::one() / (c::<T>(4.0) * T::PI()), |a, b| a.max(b));
    let slack = T::one() + c::<T>(64.0) * T::epsilon();
    let holds = values
        .iter()
        .all(|&(t, k)| k <= (inv_v + constant / t) * slack);
    Ok(DiagonalBoundReport {
        class: man.class(),
        constant,
        volume: man.volume(),
        grid_points: s_grid.len(),
        decades,
        holds,
    })
}

/// Log-spaced grid of `points` times between `lo` and `hi`.
pub fn log_grid<T: Scalar>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = points - 1;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => (a + (b - a) * T::from_count(i) / T::from_count(last)).exp(),
        })
        .collect()
}

fn converged<T: Scalar>(q: crate::numerics::Quad<T>, what: &str) -> Result<T> {
    if q.converged {
        Ok(q.value)
    } else {
        Err(Error::Accuracy {
            what: what.into(),
            achieved: q.error.to_f64_lossy(),
            requested: T::quad_tol().to_f64_lossy(),
        })
    }
}

fn torus_nodes<T: Scalar>(l: T, t: T) -> usize {
    let n = (c::<T>(12.0) * l / t.sqrt())
        .ceil()
        .to_usize()
        .unwrap_or(4096);
    n.clamp(64, 2048)
}

pub(crate) struct SphereFrame<T> {
    pub(crate) e0: [T; 3],
    pub(crate) e1: [T; 3],
    pub(crate) e2: [T; 3],
}

pub(crate) fn sphere_frame<T: Scalar>(centre: &Point<T>) -> SphereFrame<T> {
    let e0 = sphere_vector(centre);
    let (st, ct) = centre.x1.sin_cos();
    let (sp, cp) = centre.x2.sin_cos();
    // Unit vectors along increasing colatitude and longitude.
    let e1 = [ct * cp, ct * sp, -st];
    let e2 = [-sp, cp, T::zero()];
    SphereFrame { e0, e1, e2 }
}

/// Point at polar angle `acos(u)` and azimuth `phi` about the frame centre.
pub(crate) fn frame_point<T: Scalar>(f: &SphereFrame<T>, u: T, st: T, phi: T) -> Point<T> {
    let (sp, cp) = phi.sin_cos();
    let v = [
        u * f.e0[0] + st * (cp * f.e1[0] + sp * f.e2[0]),
        u * f.e0[1] + st * (cp * f.e1[1] + sp * f.e2[1]),
        u * f.e0[2] + st * (cp * f.e1[2] + sp * f.e2[2]),
    ];
    from_sphere_vector(v)
}
