//! Mean-field (product-state) treatment of the `n`-boson ground state.
//!
//! For a one-boson profile `u` the condition on `χ = n h₀[u] − E` reads
//!
//! `χ + μ + λ² ∫ K_s(a,a)[e^{-s(m−μ)} − e^{-s(χ+m)}] ds = n U(χ)`,
//! `U(χ) = λ² ∫₀^∞ ds |∫ K_s(x,a) u(x) dx|² e^{-s(χ+2m)}`.
//!
//! The left side increases and the right side decreases in `χ`, so the
//! difference is solved as a single monotone root problem.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scaled_eigenvalue, Manifold, SpectralMode};
use crate::heatkernel::{frame_point, heat_kernel, sphere_frame};
use crate::numerics::{gamma, solve_bracketed, GaussLegendre, RootOptions, TanhSinh};
use crate::renorm::{kernel_exp_difference, PhysicalParams};
use crate::scalar::{c, Scalar};

/// Few-mode trial on a compact manifold: `u = Σ c_l Z_l`, where `Z_l` is the
/// normalized class function of degeneracy class `l` peaked at the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTrial<T> {
    pub modes: Vec<SpectralMode<T>>,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> SpectralTrial<T> {
    /// Rescales `coeffs` to unit norm.
    pub fn normalized(modes: Vec<SpectralMode<T>>, coeffs: Vec<T>) -> Result<Self> {
        if modes.len() != coeffs.len() || modes.is_empty() {
            return Err(Error::domain("one coefficient per mode is required"));
        }
        let norm = coeffs.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(norm > T::zero() && norm.is_finite()) {
            return Err(Error::domain("trial coefficients must not all vanish"));
        }
        Ok(Self {
            modes,
            coeffs: coeffs.into_iter().map(|x| x / norm).collect(),
        })
    }

    fn zero_coeff(&self) -> T {
        self.modes
            .iter()
            .zip(&self.coeffs)
            .find(|(md, _)| md.eigenvalue == T::zero())
            .map(|(_, &c)| c)
            .unwrap_or(T::zero())
    }
}

/// Geodesic Gaussian `u = N e^{-ρ²/2w²}` about the source on a
/// noncompact surface, with its kernel overlap `W(s) = ∫ K_s(x,a) u(x) dx`
/// tabulated on a fixed grid in `ln s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTrial<T> {
    pub width: T,
    pub norm: T,
    /// `K[u] = (1/2m) ∫ |∇u|²`.
    pub kinetic: T,
    s_lo: T,
    /// `(s, weight, W(s))`, weights already include the `ln s` Jacobian.
    table: Vec<(T, T, T)>,
}

const TABLE_PANELS: usize = 48;
const TABLE_NODES: usize = 12;

impl<T: Scalar> GaussianTrial<T> {
    pub fn new(man: &Manifold<T>, m: T, width: T) -> Result<Self> {
        if !(width > T::zero() && width.is_finite()) {
            return Err(Error::domain("trial width must be positive"));
        }
        if !(m > T::zero()) {
            return Err(Error::domain("m must be positive"));
        }
        let jac = radial_measure(man)?;
        let w2 = width * width;
        let reach = match *man {
            Manifold::HyperbolicPlane { radius } => w2 / (radius + radius) + c::<T>(12.0) * width,
            _ => c::<T>(12.0) * width,
        };
        let ts = TanhSinh::<T>::with_tol(c(1e-13));
        let profile = |r: T| (-(r * r) / (w2 + w2)).exp();
        let mass = ts
            .integrate(|r| profile(r).powi(2) * jac(r), T::zero(), reach)
            .value;
        let norm = T::one() / mass.sqrt();
        let grad = ts
            .integrate(|r| (r / w2 * profile(r)).powi(2) * jac(r), T::zero(), reach)
            .value;
        let kinetic = norm * norm * grad / (m + m);

        let s_lo = c::<T>(1e-8) * (m + m) * w2;
        let s_hi = c::<T>(60.0) / m;
        let gl = GaussLegendre::<T>::new(TABLE_NODES);
        let (a, b) = (s_lo.ln(), s_hi.ln());
        let h = (b - a) / T::from_count(TABLE_PANELS);
        let mut nodes = Vec::with_capacity(TABLE_PANELS * TABLE_NODES);
        for p in 0..TABLE_PANELS {
            let lo = a + h * T::from_count(p);
            nodes.extend(gl.mapped(lo, lo + h).map(|(x, wx)| (x.exp(), wx * x.exp())));
        }
        let overlap: Box<dyn Fn(T) -> T> = match *man {
            Manifold::HyperbolicPlane { radius } => {
                let spec = HyperbolicOverlap::new(width / radius);
                Box::new(move |s: T| spec.at(s / (m + m) / (radius * radius)))
            }
            _ => Box::new(move |s: T| w2 / (w2 + s / m)),
        };
        let table = nodes
            .into_iter()
            .map(|(s, wt)| (s, wt, norm * overlap(s)))
            .collect();
        Ok(Self {
            width,
            norm,
            kinetic,
            s_lo,
            table,
        })
    }

    pub fn u_at_source(&self) -> T {
        self.norm
    }

    /// Tabulated `(s, W(s))` pairs.
    pub fn overlaps(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.table.iter().map(|&(s, _, w)| (s, w))
    }

    /// `∫₀^∞ W(s)² e^{-s·rate} ds`; below the table `W` equals `u(a)`.
    fn overlap_integral(&self, rate: T) -> T {
        let ua2 = self.norm * self.norm;
        let head = ua2 * -(-self.s_lo * rate).exp_m1() / rate;
        self.table
            .iter()
            .fold(head, |acc, &(s, w, v)| acc + w * v * v * (-s * rate).exp())
    }
}

fn radial_measure<T: Scalar>(man: &Manifold<T>) -> Result<impl Fn(T) -> T> {
    let radius = match *man {
        Manifold::Plane => None,
        Manifold::HyperbolicPlane { radius } => Some(radius),
        _ => {
            return Err(Error::Unsupported(
                "Gaussian trials are for noncompact surfaces".into(),
            ))
        }
    };
    Ok(move |r: T| match radius {
        None => T::TAU() * r,
        Some(big) => T::TAU() * big * (r / big).sinh(),
    })
}

/// `∫ K_τ(x,o) e^{-ρ²/2w²} dA` on the curvature −1 plane through the
/// spherical transform. With the Abel transform
/// `F(r) = ∫_r^∞ u(ρ) sinh ρ / √(cosh ρ − cosh r) dρ` one has
/// `û(ν) = 2√2 ∫_0^∞ F(r) cos νr dr` and
/// `W(τ) = (1/2π) ∫_0^∞ û(ν) e^{-(1/4+ν²)τ} ν tanh πν dν`.
struct HyperbolicOverlap<T> {
    /// `(ν, weight · ν tanh πν · û(ν) / 2π)`.
    spectrum: Vec<(T, T)>,
}

impl<T: Scalar> HyperbolicOverlap<T> {
    fn new(w: T) -> Self {
        let gl = GaussLegendre::<T>::new(24);
        let w2 = w * w;
        let reach = w2 * c(0.5) + c::<T>(12.0) * w;
        let panel = w.min(T::one()) * c(0.5);
        let r_panels = (reach / panel).ceil().to_usize().unwrap_or(1).max(1);
        // cosh ρ = cosh r + sinh² z turns the Abel integral into
        // 2∫ u(ρ(z)) cosh z dz with a smooth integrand for every r.
        let top = reach + w;
        let sh2 = |x: T| (x * c(0.5)).sinh().powi(2);
        let abel = |r: T| {
            let z_top = (c::<T>(2.0) * (sh2(top) - sh2(r)).max(T::zero()))
                .sqrt()
                .asinh();
            let z_panels = (z_top / panel).ceil().to_usize().unwrap_or(1).max(2);
            let dz = z_top / T::from_count(z_panels);
            let mut acc = T::zero();
            for k in 0..z_panels {
                let lo = dz * T::from_count(k);
                for (z, wz) in gl.mapped(lo, lo + dz) {
                    let half = (sh2(r) + z.sinh().powi(2) * c(0.5)).sqrt().asinh();
                    let rho = half + half;
                    acc = acc + wz * z.cosh() * (-(rho * rho) / (w2 + w2)).exp();
                }
            }
            acc + acc
        };
        let dr = reach / T::from_count(r_panels);
        let mut abel_nodes = Vec::with_capacity(r_panels * 24);
        for k in 0..r_panels {
            let lo = dr * T::from_count(k);
            abel_nodes.extend(gl.mapped(lo, lo + dr).map(|(r, wr)| (r, wr * abel(r))));
        }
        let nu_max = c::<T>(12.0) / w + c(12.0);
        let nu_panels = (nu_max * reach / c(4.0))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(4);
        let dnu = nu_max / T::from_count(nu_panels);
        let pref = c::<T>(2.0) * T::SQRT_2() / T::TAU();
        let mut spectrum = Vec::with_capacity(nu_panels * 24);
        for k in 0..nu_panels {
            let lo = dnu * T::from_count(k);
            for (nu, wn) in gl.mapped(lo, lo + dnu) {
                let hat = abel_nodes
                    .iter()
                    .fold(T::zero(), |acc, &(r, f)| acc + f * (nu * r).cos());
                spectrum.push((nu, wn * pref * nu * (T::PI() * nu).tanh() * hat));
            }
        }
        Self { spectrum }
    }

    fn at(&self, tau: T) -> T {
        let damp = (-tau * c(0.25)).exp();
        damp * self
            .spectrum
            .iter()
            .fold(T::zero(), |acc, &(nu, g)| acc + g * (-tau * nu * nu).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialState<T> {
    /// `u = 1/√V` on a compact manifold.
    Constant,
    Spectral(SpectralTrial<T>),
    Gaussian(GaussianTrial<T>),
}

impl<T: Scalar> TrialState<T> {
    /// `K[u] = (1/2m) ∫ |∇u|²`.
    pub fn kinetic(&self, m: T) -> T {
        match self {
            TrialState::Constant => T::zero(),
            TrialState::Spectral(tr) => {
                tr.modes
                    .iter()
                    .zip(&tr.coeffs)
                    .map(|(md, &c)| c * c * md.eigenvalue)
                    .sum::<T>()
                    / (m + m)
            }
            TrialState::Gaussian(g) => g.kinetic,
        }
    }

    fn check(&self, man: &Manifold<T>) -> Result<()> {
        match (self, man.is_compact()) {
            (TrialState::Gaussian(_), false)
            | (TrialState::Constant, true)
            | (TrialState::Spectral(_), true) => Ok(()),
            (TrialState::Gaussian(_), true) => Err(Error::Unsupported(
                "Gaussian trial on a compact manifold".into(),
            )),
            _ => Err(Error::Unsupported(
                "this trial needs a compact manifold".into(),
            )),
        }
    }
}

/// Left side of the `χ` equation.
pub fn chi_equation_lhs<T: Scalar>(chi: T, p: &PhysicalParams<T>, man: &Manifold<T>) -> Result<T> {
    p.validate()?;
    if !(chi + p.m > T::zero()) {
        return Err(Error::domain(format!(
            "chi must exceed -m = {}, got {chi}",
            -p.m
        )));
    }
    let l2 = p.lambda * p.lambda;
    if l2 == T::zero() || chi == -p.mu {
        return Ok(chi + p.mu);
    }
    Ok(chi + p.mu + l2 * kernel_exp_difference(man, p.m, p.alpha(), chi + p.m)?.value)
}

/// Per-boson interaction functional `U(χ)`.
pub fn interaction_functional<T: Scalar>(
    trial: &TrialState<T>,
    chi: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<T> {
    trial.check(man)?;
    let two_m = p.m + p.m;
    if !(two_m + chi > T::zero()) {
        return Err(Error::domain("2m + chi must be positive"));
    }
    let l2 = p.lambda * p.lambda;
    let value = match trial {
        TrialState::Constant => T::one() / (man.volume().expect("compact") * (two_m + chi)),
        TrialState::Spectral(tr) => {
            let mut sum = T::zero();
            let bars: Vec<T> = tr
                .modes
                .iter()
                .map(|md| scaled_eigenvalue(md.eigenvalue, p.m, chi))
                .collect::<Result<_>>()?;
            for (i, mi) in tr.modes.iter().enumerate() {
                let zi = tr.coeffs[i] * man.zonal_at_source(mi);
                for (j, mj) in tr.modes.iter().enumerate() {
                    let zj = tr.coeffs[j] * man.zonal_at_source(mj);
                    sum = sum + zi * zj / (T::one() + bars[i] + bars[j]);
                }
            }
            sum / (two_m + chi)
        }
        TrialState::Gaussian(g) => g.overlap_integral(chi + two_m),
    };
    Ok(l2 * value)
}

/// `U(χ)` by direct quadrature: `W(s)` from the spatial integral of the
/// kernel against `u`, then the time integral. Compact manifolds only.
pub fn interaction_functional_direct<T: Scalar>(
    trial: &TrialState<T>,
    chi: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<T> {
    trial.check(man)?;
    if !man.is_compact() {
        return Err(Error::Unsupported(
            "direct route is implemented for compact manifolds".into(),
        ));
    }
    let a = p.source;
    man.validate_point(&a)?;
    let vol = man.volume().expect("compact");
    let u = |x: &crate::geometry::Point<T>| -> T {
        match trial {
            TrialState::Constant => T::one() / vol.sqrt(),
            TrialState::Spectral(tr) => tr
                .modes
                .iter()
                .zip(&tr.coeffs)
                .map(|(md, &cf)| cf * man.zonal(md, &a, x))
                .sum(),
            TrialState::Gaussian(_) => unreachable!(),
        }
    };
    let u_a = u(&a);
    let rate = chi + p.m + p.m;
    // Below `s_cut` the kernel is too narrow for the spatial rules and
    // W(s) = u(a) + (s/2m)∇²u(a) + O(s²) is used instead.
    let (s_cut, lap_u) = match *man {
        Manifold::Sphere { radius } => {
            let h = c::<T>(1e-3);
            let frame = sphere_frame(&a);
            let at = |th: T| u(&frame_point(&frame, th.cos(), th.sin(), T::zero()));
            let lap = c::<T>(4.0) * (at(h) - u_a) / (h * h * radius * radius);
            ((p.m + p.m) * radius * radius * c(1e-4), lap)
        }
        Manifold::Torus { l1, l2 } => {
            let h = l1.min(l2) * c(1e-3);
            let at = |d1: T, d2: T| u(&man.wrap(crate::geometry::Point::new(a.x1 + d1, a.x2 + d2)));
            let lap = (at(h, T::zero()) + at(-h, T::zero()) + at(T::zero(), h) + at(T::zero(), -h)
                - c::<T>(4.0) * u_a)
                / (h * h);
            let lmax = l1.max(l2);
            ((p.m + p.m) * lmax * lmax * c(1e-6), lap)
        }
        _ => unreachable!(),
    };
    let overlap = |s: T| -> Result<T> {
        match *man {
            Manifold::Sphere { radius } => {
                let frame = sphere_frame(&a);
                let ts = TanhSinh::<T>::with_tol(c(1e-12));
                let mut failure = None;
                let q = ts.integrate(
                    |th: T| {
                        let (st, ct) = th.sin_cos();
                        let x = frame_point(&frame, ct, st, T::zero());
                        match heat_kernel(man, &x, &a, s, p.m) {
                            Ok(k) => k * u(&x) * st,
                            Err(e) => {
                                failure.get_or_insert(e);
                                T::zero()
                            }
                        }
                    },
                    T::zero(),
                    T::PI(),
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                Ok(T::TAU() * radius * radius * q.value)
            }
            Manifold::Torus { l1, l2 } => torus_overlap(trial, l1, l2, s, p.m),
            _ => unreachable!(),
        }
    };
    let s_hi = c::<T>(46.0) / rate;
    let ts = TanhSinh::<T>::with_tol(c(1e-10));
    let mut failure = None;
    let q = ts.integrate_log(
        |s| match overlap(s) {
            Ok(w) => w * w * (-s * rate).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        s_cut,
        s_hi,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let gl = GaussLegendre::<T>::new(8);
    let inv2m = T::one() / (p.m + p.m);
    let head: T = gl
        .mapped(T::zero(), s_cut)
        .map(|(s, w)| {
            let wv = u_a + s * inv2m * lap_u;
            w * wv * wv * (-s * rate).exp()
        })
        .sum();
    Ok(p.lambda * p.lambda * (q.value + head))
}

/// `∫ K_s(x,a) u(x) dx` on the torus. The kernel and each plane wave in a
/// class function factor over the two circles, so the spatial integral is
/// a sum of products of one-dimensional trapezoid sums.
fn torus_overlap<T: Scalar>(trial: &TrialState<T>, l1: T, l2: T, s: T, m: T) -> Result<T> {
    let t = s / (m + m);
    // Trapezoid aliasing error for a periodic Gaussian of variance 2t is
    // about exp(-4π²tN²/l²), negligible once N exceeds 3l/√t.
    let samples = |l: T| -> Result<(T, Vec<(T, T)>)> {
        let n = (c::<T>(3.0) * l / t.sqrt())
            .ceil()
            .to_usize()
            .unwrap_or(1 << 16)
            .clamp(64, 1 << 16);
        let h = l / T::from_count(n);
        let pts = (0..n)
            .map(|i| {
                let y = h * T::from_count(i) - l * c(0.5);
                crate::heatkernel::circle_kernel(y, s, m, l).map(|k| (y, k))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((h, pts))
    };
    let (h1, k1) = samples(l1)?;
    let (h2, k2) = samples(l2)?;
    let moment = |h: T, pts: &[(T, T)], q: T| {
        pts.iter()
            .fold(T::zero(), |acc, &(y, k)| acc + k * (q * y).cos())
            * h
    };
    let cosine_moment = |axis: usize, q: T| -> Result<T> {
        Ok(if axis == 0 {
            moment(h1, &k1, q)
        } else {
            moment(h2, &k2, q)
        })
    };
    let vol = l1 * l2;
    match trial {
        TrialState::Constant => {
            Ok(cosine_moment(0, T::zero())? * cosine_moment(1, T::zero())? / vol.sqrt())
        }
        TrialState::Spectral(tr) => {
            let mut total = T::zero();
            for (md, &cf) in tr.modes.iter().zip(&tr.coeffs) {
                let ks = match &md.label {
                    crate::geometry::ModeLabel::Torus { wavevectors } => wavevectors,
                    _ => return Err(Error::domain("mode does not belong to a torus")),
                };
                let mut class = T::zero();
                for k in ks {
                    let q1 = T::TAU() * T::lit(k[0] as f64) / l1;
                    let q2 = T::TAU() * T::lit(k[1] as f64) / l2;
                    class = class + cosine_moment(0, q1)? * cosine_moment(1, q2)?;
                }
                total = total + cf * class / (T::from_count(md.multiplicity) * vol).sqrt();
            }
            Ok(total)
        }
        TrialState::Gaussian(_) => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldFunctionals<T> {
    /// `h₀[u] = K[u] + m`.
    pub h0: T,
    pub k_u: T,
    /// `K[v] = K[u]/(2m + χ)`.
    pub k_v: T,
    pub u_v: T,
    /// `y[v] = n K[v]`.
    pub y_v: T,
}

pub fn functionals<T: Scalar>(
    trial: &TrialState<T>,
    chi: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<MeanFieldFunctionals<T>> {
    let k_u = trial.kinetic(p.m);
    let k_v = k_u / (p.m + p.m + chi);
    Ok(MeanFieldFunctionals {
        h0: k_u + p.m,
        k_u,
        k_v,
        u_v: interaction_functional(trial, chi, p, man)?,
        y_v: p.n_real() * k_v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSolution<T> {
    pub chi: T,
    pub energy: T,
    pub residual: T,
    pub bracket: (T, T),
    pub iterations: usize,
    pub functionals: MeanFieldFunctionals<T>,
}

/// Unique root of `lhs(χ) − n U(χ)`, with `E = n h₀[u] − χ`.
pub fn solve_chi<T: Scalar>(
    trial: &TrialState<T>,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
) -> Result<ChiSolution<T>> {
    p.validate()?;
    trial.check(man)?;
    let n = p.n_real();
    let g = |chi: T| -> Result<T> {
        Ok(chi_equation_lhs(chi, p, man)? - n * interaction_functional(trial, chi, p, man)?)
    };
    let lo = -p.mu;
    let scale = p.m.max(p.mu.abs());
    let g_lo = g(lo)?;
    let (chi, residual, bracket, iterations) = if g_lo >= T::zero() {
        (lo, g_lo.abs(), (lo, lo), 0)
    } else {
        let mut hi = lo + scale;
        let mut found = false;
        for _ in 0..200 {
            if g(hi)? > T::zero() {
                found = true;
                break;
            }
            hi = lo + (hi - lo) * c(2.0);
        }
        if !found {
            return Err(Error::NotFound(
                "no sign change for the chi equation".into(),
            ));
        }
        let opts = RootOptions {
            x_tol: scale * T::epsilon() * c(16.0),
            f_tol: scale * c(1e-11),
            ..RootOptions::default()
        };
        let root = solve_bracketed(g, lo, hi, opts)?;
        (root.x, root.fx.abs(), (lo, hi), root.iterations)
    };
    let f = functionals(trial, chi, p, man)?;
    Ok(ChiSolution {
        chi,
        energy: n * f.h0 - chi,
        residual,
        bracket,
        iterations,
        functionals: f,
    })
}

/// Which form of the constant-profile equation to solve for `Δ = nm − E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzForm {
    /// `Δ + μ + (mλ²/2π) ln(Δ/(m−μ)) = nλ²/(VΔ)`, flat leading kernel term.
    Printed,
    /// Same equation with the exact kernel integral
    /// `λ² ∫ K_s(a,a)[e^{-s(m−μ)} − e^{-sΔ}] ds` in place of the logarithm.
    ExactKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSolution<T> {
    pub energy: T,
    /// `Δ = nm − E`.
    pub gap: T,
    pub residual: T,
}

pub fn constant_ansatz_energy<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    form: AnsatzForm,
) -> Result<AnsatzSolution<T>> {
    p.validate()?;
    let v = man
        .volume()
        .ok_or_else(|| Error::Unsupported("constant ansatz needs a compact manifold".into()))?;
    let n = p.n_real();
    let nm = n * p.m;
    let l2 = p.lambda * p.lambda;
    if l2 == T::zero() || p.n == 0 {
        if p.n == 0 && l2 > T::zero() && form == AnsatzForm::Printed {
            // Right side vanishes; the left side still has its logarithm.
        } else {
            return Ok(AnsatzSolution {
                energy: nm + p.mu,
                gap: -p.mu,
                residual: T::zero(),
            });
        }
    }
    let alpha = p.alpha();
    let g = |gap: T| -> Result<T> {
        let log_part = match form {
            AnsatzForm::Printed => p.m * l2 / T::TAU() * (gap / alpha).ln(),
            AnsatzForm::ExactKernel => l2 * kernel_exp_difference(man, p.m, alpha, gap)?.value,
        };
        Ok(gap + p.mu + log_part - n * l2 / (v * gap))
    };
    let mut hi = (p.lambda * (n / v).sqrt())
        .max(p.m)
        .max(p.mu.abs())
        .max(T::one());
    for _ in 0..200 {
        if g(hi)? > T::zero() {
            break;
        }
        hi = hi + hi;
    }
    let mut lo = hi * c(0.5);
    for _ in 0..2000 {
        if g(lo)? < T::zero() {
            break;
        }
        lo = lo * c(0.5);
        if lo < T::min_positive_value() {
            return Err(Error::NotFound(
                "no root of the constant-ansatz equation".into(),
            ));
        }
    }
    let opts = RootOptions {
        x_tol: hi * T::epsilon() * c(8.0),
        f_tol: T::zero(),
        ..RootOptions::default()
    };
    let root = solve_bracketed(g, lo, hi, opts)?;
    Ok(AnsatzSolution {
        energy: nm - root.x,
        gap: root.x,
        residual: root.fx.abs(),
    })
}

/// `nm + μ − λ√(n/V)`.
pub fn asymptotic_compact<T: Scalar>(p: &PhysicalParams<T>, man: &Manifold<T>) -> Result<T> {
    p.validate()?;
    let v = man
        .volume()
        .ok_or_else(|| Error::Unsupported("compact asymptotics need a finite volume".into()))?;
    let n = p.n_real();
    Ok(n * p.m + p.mu - p.lambda * (n / v).sqrt())
}

/// `nm + μ − 2mCeλ² ln n`.
pub fn asymptotic_noncompact<T: Scalar>(p: &PhysicalParams<T>, c_const: T) -> Result<T> {
    p.validate()?;
    if p.n < 2 {
        return Err(Error::domain("noncompact asymptotics need n >= 2"));
    }
    let n = p.n_real();
    Ok(n * p.m + p.mu - (p.m + p.m) * c_const * T::E() * p.lambda * p.lambda * n.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub epsilon: T,
    pub delta: T,
    /// `n δ / ε²`, equal to one up to rounding.
    pub ratio: T,
}

/// `ε(n) = 1/ln n`, `δ(n) = 1/(n ln² n)`.
pub fn sequence_schedule<T: Scalar>(n: T) -> Result<Schedule<T>> {
    let e2 = T::E() * T::E();
    if !(n > e2) || !n.is_finite() {
        return Err(Error::domain(format!(
            "schedule needs n > e^2 so that epsilon < 1/2, got {n}"
        )));
    }
    let ln = n.ln();
    let epsilon = T::one() / ln;
    let delta = T::one() / (n * ln * ln);
    Ok(Schedule {
        epsilon,
        delta,
        ratio: n * delta / (epsilon * epsilon),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTerm<T> {
    pub value: T,
    pub rigorous_cap: T,
    /// The large-`n` form of the cap under the standard schedule.
    pub asymptotic_cap: Option<T>,
}

impl<T: Scalar> ChainTerm<T> {
    pub fn holds(&self) -> bool {
        let slack = T::one() + c::<T>(1e-12);
        self.value <= self.rigorous_cap * slack
            && self
                .asymptotic_cap
                .map_or(true, |a| self.value <= a * slack)
    }
}

/// Three-term split of `n U[v]` on a compact manifold and its caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainReport<T> {
    pub zero_mode: ChainTerm<T>,
    pub cross: ChainTerm<T>,
    pub double: ChainTerm<T>,
    /// `Σ_{l≠0} |v(l)|² σ̄_l^{1−ε}` and its bound `δ + (ε/δ)^{ε/(1−ε)} K[v]`.
    pub weighted_sum: T,
    pub weighted_cap: T,
    pub n_kv: T,
    /// `n K[v] < 1`.
    pub interesting_regime: bool,
    /// `n U[v]` for comparison with the sum of the terms.
    pub n_u: T,
    pub all_hold: bool,
}

pub fn upper_bound_chain<T: Scalar>(
    trial: &SpectralTrial<T>,
    chi: T,
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    a_const: T,
    eps: T,
    delta: T,
) -> Result<ChainReport<T>> {
    p.validate()?;
    let v = man
        .volume()
        .ok_or_else(|| Error::Unsupported("the chain applies to compact manifolds".into()))?;
    if !(eps > T::zero() && eps < c(0.5)) || !(delta > T::zero()) {
        return Err(Error::domain("need 0 < epsilon < 1/2 and delta > 0"));
    }
    let two_m = p.m + p.m;
    let den = two_m + chi;
    if !(den > T::zero()) {
        return Err(Error::domain("2m + chi must be positive"));
    }
    let n = p.n_real();
    let l2 = p.lambda * p.lambda;
    let v_tilde = two_m * den * v;
    let scale = (two_m * den).sqrt();
    let c0 = trial.zero_coeff();

    let mut cross_sum = T::zero();
    let mut weighted = T::zero();
    let mut k_v = T::zero();
    let mut nonzero: Vec<(T, T)> = Vec::new();
    for (md, &cf) in trial.modes.iter().zip(&trial.coeffs) {
        if md.eigenvalue == T::zero() {
            continue;
        }
        let bar = scaled_eigenvalue(md.eigenvalue, p.m, chi)?;
        let f = man.zonal_at_source(md) / scale;
        cross_sum = cross_sum + f * cf / (T::one() + bar);
        weighted = weighted + cf * cf * bar.powf(T::one() - eps);
        k_v = k_v + cf * cf * bar;
        nonzero.push((f * cf, bar));
    }
    let mut double_sum = T::zero();
    for &(fi, bi) in &nonzero {
        for &(fj, bj) in &nonzero {
            double_sum = double_sum + fi * fj / (T::one() + bi + bj);
        }
    }

    let pow = (eps / delta).powf(eps / (T::one() - eps));
    let weighted_cap = delta + pow * k_v;
    let sin = (T::PI() * eps).sin();
    let g_ratio = gamma(c::<T>(2.0) - eps) / gamma(T::one() - eps);
    let ln_n = n.ln();

    let zero_mode = ChainTerm {
        value: n * two_m * l2 * c0 * c0 / v_tilde,
        rigorous_cap: n * two_m * l2 / v_tilde,
        asymptotic_cap: None,
    };
    let cross = ChainTerm {
        value: c::<T>(2.0) * n * two_m * l2 * (c0 / v_tilde.sqrt() * cross_sum).abs(),
        rigorous_cap: c::<T>(2.0) * n * two_m * l2 / v_tilde.sqrt()
            * weighted_cap.sqrt()
            * (a_const * T::PI() * g_ratio / sin).sqrt(),
        asymptotic_cap: (n > T::one()).then(|| {
            l2 * (c::<T>(4.0) * p.m * a_const * T::PI() * T::E()).sqrt() / (den * v).sqrt()
                * (n * ln_n).sqrt()
        }),
    };
    let double = ChainTerm {
        value: n * two_m * l2 * double_sum.abs(),
        rigorous_cap: n * two_m * l2 * weighted_cap * T::PI() * a_const / sin,
        asymptotic_cap: (n > T::one()).then(|| two_m * a_const * l2 * T::PI() * T::E() * ln_n),
    };
    let n_u = n * interaction_functional(&TrialState::Spectral(trial.clone()), chi, p, man)?;
    let n_kv = n * k_v;
    let all_hold = zero_mode.holds()
        && cross.holds()
        && double.holds()
        && weighted <= weighted_cap * (T::one() + c::<T>(1e-12));
    Ok(ChainReport {
        zero_mode,
        cross,
        double,
        weighted_sum: weighted,
        weighted_cap,
        n_kv,
        interesting_regime: n_kv < T::one(),
        n_u,
        all_hold,
    })
}

/// Random trial built from the zero mode and a few excited classes, scaled
/// so that `K[u] = y (2m − μ)/n`; since `2m + χ ≥ 2m − μ` this keeps
/// `n K[v] ≤ y`.
pub fn random_few_mode_trial<T: Scalar, R: Rng + ?Sized>(
    man: &Manifold<T>,
    p: &PhysicalParams<T>,
    y: T,
    max_class: usize,
    rng: &mut R,
) -> Result<SpectralTrial<T>> {
    let cutoff = match *man {
        Manifold::Sphere { radius } => {
            let l = T::from_count(max_class);
            l * (l + T::one()) / (radius * radius)
        }
        Manifold::Torus { l1, l2 } => {
            let l = l1.min(l2);
            let k = T::TAU() * T::from_count(max_class.max(1)) / l;
            k * k
        }
        _ => {
            return Err(Error::Unsupported(
                "few-mode trials need a compact manifold".into(),
            ))
        }
    };
    let spectrum = man.spectrum(cutoff)?;
    if spectrum.len() < 2 {
        return Err(Error::domain("cutoff admits no excited class"));
    }
    let mut modes = vec![spectrum[0].clone()];
    let mut raw = Vec::new();
    for md in spectrum.iter().skip(1) {
        if rng.gen_bool(0.6) || raw.is_empty() {
            modes.push(md.clone());
            raw.push(T::lit(rng.gen_range(-1.0..1.0)));
        }
    }
    let n = p.n_real().max(T::one());
    let target = y * (p.m + p.m - p.mu) / n;
    let k_raw: T = modes[1..]
        .iter()
        .zip(&raw)
        .map(|(md, &r)| r * r * md.eigenvalue)
        .sum::<T>()
        / (p.m + p.m);
    let mut scale = if k_raw > T::zero() {
        (target / k_raw).sqrt()
    } else {
        T::zero()
    };
    let weight: T = raw.iter().map(|&r| r * r).sum();
    if scale * scale * weight > c(0.5) {
        scale = (c::<T>(0.5) / weight).sqrt();
    }
    let excited: Vec<T> = raw.iter().map(|&r| r * scale).collect();
    let rest: T = excited.iter().map(|&x| x * x).sum();
    let mut coeffs = vec![(T::one() - rest).sqrt()];
    coeffs.extend(excited);
    SpectralTrial::normalized(modes, coeffs)
}

/// One randomized evaluation of the upper-bound chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSample<T> {
    pub n: u64,
    pub chi: T,
    pub schedule: Schedule<T>,
    pub report: ChainReport<T>,
}

/// Draws `draws` few-mode trials at `n = 10^U(1,4)`, solves the χ-equation
/// for each and evaluates the chain with the fitted compact constant and the
/// schedule `ε = 1/ln n`, `δ = 1/(n ln² n)`.
pub fn random_chain_check<T: Scalar>(
    p: &PhysicalParams<T>,
    man: &Manifold<T>,
    draws: usize,
    seed: u64,
) -> Result<Vec<ChainSample<T>>> {
    use rand::SeedableRng;
    p.validate()?;
    let grid = crate::bounds::default_fit_grid(man, p.m);
    let a_const = crate::heatkernel::diagonal_bound_check(man, &grid, p.m)?.constant;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let n = 10f64.powf(rng.gen_range(1.0..4.0)).round() as u64;
        let y = T::lit(rng.gen_range(0.1..0.95));
        let classes = rng.gen_range(1..=3);
        let pn = p.with_n(n);
        let trial = random_few_mode_trial(man, &pn, y, classes, &mut rng)?;
        let chi = solve_chi(&TrialState::Spectral(trial.clone()), &pn, man)?.chi;
        let schedule = sequence_schedule(pn.n_real())?;
        let report = upper_bound_chain(
            &trial,
            chi,
            &pn,
            man,
            a_const,
            schedule.epsilon,
            schedule.delta,
        )?;
        out.push(ChainSample {
            n,
            chi,
            schedule,
            report,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn lhs_closed_form_on_plane() {
        let p = PhysicalParams::new(0.5, 0.0, 1.0, 1).unwrap();
        let v = chi_equation_lhs(1.0, &p, &Manifold::plane()).unwrap();
        assert!((v - (1.0 + 3f64.ln() / (4.0 * PI))).abs() < 1e-11);
        assert_eq!(chi_equation_lhs(0.0, &p, &Manifold::plane()).unwrap(), 0.0);
        assert!(chi_equation_lhs(-0.6, &p, &Manifold::plane()).is_err());
    }

    #[test]
    fn free_and_empty_solutions() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(0.5, 0.1, 0.0, 7).unwrap();
        let s = solve_chi(&TrialState::Constant, &p, &man).unwrap();
        assert_eq!(s.chi, -0.1);
        assert!((s.energy - (7.0 * 0.5 + 0.1)).abs() < 1e-14);
        let p0 = PhysicalParams::new(0.5, 0.1, 1.0, 0).unwrap();
        assert_eq!(
            solve_chi(&TrialState::Constant, &p0, &man).unwrap().chi,
            -0.1
        );
    }

    #[test]
    fn constant_trial_matches_independent_bisection() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(0.5, 0.1, 1.0, 100).unwrap();
        let s = solve_chi(&TrialState::Constant, &p, &man).unwrap();
        let v = 4.0 * PI;
        let g = |chi: f64| chi_equation_lhs(chi, &p, &man).unwrap() - 100.0 / (v * (1.0 + chi));
        let (mut a, mut b) = (-0.1, 50.0);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if g(mid) < 0.0 {
                a = mid
            } else {
                b = mid
            }
        }
        assert!((s.chi - 0.5 * (a + b)).abs() < 1e-9, "{} {}", s.chi, a);
        assert!(s.residual < 1e-9 * 0.5);
    }

    #[test]
    fn energy_decomposition_identity() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(0.5, 0.1, 1.0, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = random_few_mode_trial(&man, &p, 0.5, 3, &mut rng).unwrap();
        let s = solve_chi(&TrialState::Spectral(tr), &p, &man).unwrap();
        let f = s.functionals;
        let rebuilt = 40.0 * 0.5 + 2.0 * 0.5 * 40.0 * f.k_v + (40.0 * f.k_v - 1.0) * s.chi;
        assert!((rebuilt - s.energy).abs() < 1e-10 * s.energy.abs());
    }

    /// `∫ K_s(x,a) u(x) dx` by radial quadrature against the kernel itself.
    fn direct_overlap(man: &Manifold<f64>, m: f64, g: &GaussianTrial<f64>, s: f64) -> f64 {
        let jac = radial_measure(man).unwrap();
        let w = g.width;
        let reach = match *man {
            Manifold::HyperbolicPlane { radius } => w * w / (2.0 * radius) + 12.0 * w,
            _ => 12.0 * w,
        };
        let spread = ((4.0 * s / (2.0 * m)).sqrt() * 8.0).min(reach);
        let ts = TanhSinh::<f64>::with_tol(1e-12);
        let f = |r: f64| {
            crate::heatkernel::heat_kernel_at_distance(man, r, s, m).unwrap()
                * (-(r * r) / (2.0 * w * w)).exp()
                * jac(r)
        };
        g.norm * (ts.integrate(f, 0.0, spread).value + ts.integrate(f, spread, reach).value)
    }

    #[test]
    fn gaussian_overlap_on_plane_matches_convolution() {
        let man = Manifold::<f64>::plane();
        let m = 0.5;
        let w = 1.3;
        let g = GaussianTrial::new(&man, m, w).unwrap();
        assert!((g.norm - 1.0 / (PI.sqrt() * w)).abs() < 1e-12);
        assert!((g.kinetic - 1.0 / (2.0 * m * w * w)).abs() < 1e-12);
        for (s, val) in g.overlaps().step_by(37) {
            let want = direct_overlap(&man, m, &g, s);
            assert!((val - want).abs() < 1e-10 * want, "s={s}");
        }
    }

    #[test]
    fn hyperbolic_overlap_matches_kernel_quadrature() {
        for (radius, w, m) in [(1.0, 1.0, 0.9), (0.7, 0.2, 1.5), (2.0, 3.0, 0.3)] {
            let man = Manifold::<f64>::hyperbolic(radius).unwrap();
            let g = GaussianTrial::new(&man, m, w).unwrap();
            let first = g.overlaps().next().unwrap();
            assert!(
                (first.1 - g.norm).abs() < 1e-7 * g.norm,
                "R={radius} w={w}: {} {}",
                first.1,
                g.norm
            );
            for (s, val) in g.overlaps().skip(5).step_by(41) {
                let want = direct_overlap(&man, m, &g, s);
                assert!(
                    (val - want).abs() < 1e-9 * g.norm,
                    "R={radius} w={w} s={s}: {val} {want}"
                );
            }
        }
    }

    #[test]
    fn spectral_and_direct_routes_agree() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(0.5, 0.1, 1.0, 10).unwrap();
        let modes = man.spectrum(2.5).unwrap();
        let tr = SpectralTrial::normalized(modes, vec![0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        let trial = TrialState::Spectral(tr);
        let a = interaction_functional(&trial, 0.7, &p, &man).unwrap();
        let b = interaction_functional_direct(&trial, 0.7, &p, &man).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} {b}");

        let torus = Manifold::<f64>::torus(1.0, 1.3).unwrap();
        let p = p.with_source(crate::geometry::Point::new(0.2, 0.9));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tr = random_few_mode_trial(&torus, &p, 0.9, 2, &mut rng).unwrap();
        let trial = TrialState::Spectral(tr);
        let a = interaction_functional(&trial, 0.3, &p, &torus).unwrap();
        let b = interaction_functional_direct(&trial, 0.3, &p, &torus).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} {b}");
    }

    #[test]
    fn schedule_examples() {
        let s = sequence_schedule(3f64.exp()).unwrap();
        assert!((s.epsilon - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.delta - (-3f64).exp() / 9.0).abs() < 1e-17);
        assert!((s.ratio - 1.0).abs() < 4.0 * f64::EPSILON);
        assert!((sequence_schedule(1e6f64).unwrap().epsilon - 0.072_382).abs() < 1e-6);
        assert!(sequence_schedule(7.0f64).is_err());
        assert!(sequence_schedule(8.0f64).unwrap().epsilon < 0.5);
    }

    #[test]
    fn asymptotic_examples() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(1.0, 0.1, 1.0, 10_000).unwrap();
        let d = 10_000.0 + 0.1 - asymptotic_compact(&p, &man).unwrap();
        assert!((d - 28.209_479_177_387_8).abs() < 1e-9);
        let p = PhysicalParams::new(0.5, 0.0, 1.0, 100).unwrap();
        let d1 = 50.0 - asymptotic_noncompact(&p, 1.0 / (4.0 * PI)).unwrap();
        let d2 = 5000.0 - asymptotic_noncompact(&p.with_n(10_000), 1.0 / (4.0 * PI)).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-12);
    }

    #[test]
    fn constant_trial_chain_has_only_the_zero_term() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(0.5, 0.1, 1.0, 1000).unwrap();
        let tr = SpectralTrial::normalized(man.spectrum(0.1).unwrap(), vec![1.0]).unwrap();
        let sched = sequence_schedule(1000.0).unwrap();
        let r = upper_bound_chain(&tr, 2.0, &p, &man, 0.08, sched.epsilon, sched.delta).unwrap();
        assert_eq!(r.cross.value, 0.0);
        assert_eq!(r.double.value, 0.0);
        assert!((r.zero_mode.value - r.n_u).abs() < 1e-12 * r.n_u);
    }

    #[test]
    fn random_chains_hold_in_the_interesting_regime() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let p = PhysicalParams::new(1.0, 0.2, 0.8, 1).unwrap();
        let samples = random_chain_check(&p, &man, 12, 5).unwrap();
        for smp in &samples {
            assert!(smp.report.interesting_regime, "{smp:?}");
            assert!(smp.report.all_hold, "{smp:?}");
            assert!((smp.schedule.ratio - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn printed_ansatz_ratio_approaches_one() {
        let man = Manifold::<f64>::sphere(1.0).unwrap();
        let v = 4.0 * PI;
        let mut prev = 0.0;
        for &n in &[10_000u64, 100_000, 1_000_000] {
            let p = PhysicalParams::new(1.0, 0.1, 1.0, n).unwrap();
            let s = constant_ansatz_energy(&p, &man, AnsatzForm::Printed).unwrap();
            let ratio = (n as f64 + 0.1 - s.energy) / (n as f64 / v).sqrt();
            assert!(ratio > prev && ratio < 1.0);
            prev = ratio;
        }
        assert!(prev > 0.9);
    }
}
