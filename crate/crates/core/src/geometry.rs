//! Concrete two-dimensional geometries, their charts and Laplace spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Plane,
    Torus,
    Sphere,
    HyperbolicPlane,
}

impl ManifoldKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Plane => "plane",
            ManifoldKind::Torus => "torus",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::HyperbolicPlane => "hyperbolic",
        }
    }
}

/// Which family of heat-kernel bounds applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryClass {
    CartanHadamard,
    Compact,
}

/// A complete two-dimensional Riemannian manifold.
///
/// Charts: `Plane` uses Cartesian coordinates, `Torus` the fundamental domain
/// `[0, l1) x [0, l2)`, `Sphere` colatitude/longitude and `HyperbolicPlane`
/// geodesic polar coordinates `(rho, phi)` about a fixed origin, with
/// sectional curvature `-1/radius^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold<T> {
    Plane,
    Torus { l1: T, l2: T },
    Sphere { radius: T },
    HyperbolicPlane { radius: T },
}

/// Chart coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x1: T,
    pub x2: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x1: T, x2: T) -> Self {
        Self { x1, x2 }
    }
}

fn positive<T: Scalar>(v: T, name: &str) -> Result<T> {
    if v.is_finite() && v > T::zero() {
        Ok(v)
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

impl<T: Scalar> Manifold<T> {
    pub fn plane() -> Self {
        Manifold::Plane
    }

    pub fn torus(l1: T, l2: T) -> Result<Self> {
        Ok(Manifold::Torus {
            l1: positive(l1, "torus period l1")?,
            l2: positive(l2, "torus period l2")?,
        })
    }

    pub fn sphere(radius: T) -> Result<Self> {
        Ok(Manifold::Sphere {
            radius: positive(radius, "sphere radius")?,
        })
    }

    pub fn hyperbolic(radius: T) -> Result<Self> {
        Ok(Manifold::HyperbolicPlane {
            radius: positive(radius, "hyperbolic radius")?,
        })
    }

    /// Re-checks the metric parameters, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Manifold::Plane => Ok(()),
            Manifold::Torus { l1, l2 } => Self::torus(l1, l2).map(|_| ()),
            Manifold::Sphere { radius } => Self::sphere(radius).map(|_| ()),
            Manifold::HyperbolicPlane { radius } => Self::hyperbolic(radius).map(|_| ()),
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            Manifold::Plane => ManifoldKind::Plane,
            Manifold::Torus { .. } => ManifoldKind::Torus,
            Manifold::Sphere { .. } => ManifoldKind::Sphere,
            Manifold::HyperbolicPlane { .. } => ManifoldKind::HyperbolicPlane,
        }
    }

    /// Total area; `None` for the noncompact geometries.
    pub fn volume(&self) -> Option<T> {
        match *self {
            Manifold::Torus { l1, l2 } => Some(l1 * l2),
            Manifold::Sphere { radius } => Some(c::<T>(4.0) * T::PI() * radius * radius),
            _ => None,
        }
    }

    pub fn is_compact(&self) -> bool {
        self.volume().is_some()
    }

    pub fn class(&self) -> GeometryClass {
        if self.is_compact() {
            GeometryClass::Compact
        } else {
            GeometryClass::CartanHadamard
        }
    }

    /// Intrinsic length scale, if the metric has one.
    pub fn length_scale(&self) -> Option<T> {
        match *self {
            Manifold::Plane => None,
            Manifold::Torus { l1, l2 } => Some(l1.max(l2) / T::TAU()),
            Manifold::Sphere { radius } | Manifold::HyperbolicPlane { radius } => Some(radius),
        }
    }

    /// The manifold with metric `alpha^2 g`.
    pub fn scaled(&self, alpha: T) -> Self {
        match *self {
            Manifold::Plane => Manifold::Plane,
            Manifold::Torus { l1, l2 } => Manifold::Torus {
                l1: l1 * alpha,
                l2: l2 * alpha,
            },
            Manifold::Sphere { radius } => Manifold::Sphere {
                radius: radius * alpha,
            },
            Manifold::HyperbolicPlane { radius } => Manifold::HyperbolicPlane {
                radius: radius * alpha,
            },
        }
    }

    /// Chart coordinates of the same point after the metric is scaled by `alpha^2`.
    pub fn scale_point(&self, p: &Point<T>, alpha: T) -> Point<T> {
        match self {
            Manifold::Sphere { .. } => *p,
            Manifold::HyperbolicPlane { .. } => Point::new(p.x1 * alpha, p.x2),
            _ => Point::new(p.x1 * alpha, p.x2 * alpha),
        }
    }

    /// A canonical base point: origin, corner of the fundamental domain or north pole.
    pub fn origin(&self) -> Point<T> {
        Point::new(T::zero(), T::zero())
    }

    pub fn validate_point(&self, p: &Point<T>) -> Result<()> {
        let ok = p.x1.is_finite()
            && p.x2.is_finite()
            && match *self {
                Manifold::Plane => true,
                Manifold::Torus { l1, l2 } => {
                    p.x1 >= T::zero() && p.x1 < l1 && p.x2 >= T::zero() && p.x2 < l2
                }
                Manifold::Sphere { .. } => {
                    p.x1 >= T::zero() && p.x1 <= T::PI() && p.x2 >= T::zero() && p.x2 < T::TAU()
                }
                Manifold::HyperbolicPlane { .. } => {
                    p.x1 >= T::zero() && p.x2 >= T::zero() && p.x2 < T::TAU()
                }
            };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "point ({}, {}) outside the {} chart",
                p.x1,
                p.x2,
                self.kind().name()
            )))
        }
    }

    /// Maps arbitrary coordinates into the chart domain (periodic reduction).
    pub fn wrap(&self, p: Point<T>) -> Point<T> {
        match *self {
            Manifold::Plane => p,
            Manifold::Torus { l1, l2 } => Point::new(modulo(p.x1, l1), modulo(p.x2, l2)),
            Manifold::Sphere { .. } => {
                let mut th = modulo(p.x1, T::TAU());
                let mut ph = p.x2;
                if th > T::PI() {
                    th = T::TAU() - th;
                    ph = ph + T::PI();
                }
                Point::new(th, modulo(ph, T::TAU()))
            }
            Manifold::HyperbolicPlane { .. } => {
                if p.x1 < T::zero() {
                    Point::new(-p.x1, modulo(p.x2 + T::PI(), T::TAU()))
                } else {
                    Point::new(p.x1, modulo(p.x2, T::TAU()))
                }
            }
        }
    }

    /// Geodesic distance between two chart points.
    pub fn geodesic_distance(&self, x: &Point<T>, y: &Point<T>) -> Result<T> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: &Point<T>, y: &Point<T>) -> T {
        match *self {
            Manifold::Plane => (x.x1 - y.x1).hypot(x.x2 - y.x2),
            Manifold::Torus { l1, l2 } => {
                torus_offset(x.x1 - y.x1, l1).hypot(torus_offset(x.x2 - y.x2, l2))
            }
            Manifold::Sphere { radius } => {
                let u = sphere_vector(x);
                let v = sphere_vector(y);
                let cross = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                radius * sin.atan2(cos)
            }
            Manifold::HyperbolicPlane { radius } => {
                let (r1, r2) = (x.x1 / radius, y.x1 / radius);
                let dphi = (x.x2 - y.x2) * c(0.5);
                let a = ((r1 - r2) * c(0.5)).sinh();
                let b = dphi.sin();
                // cosh d - 1 = 2 sinh²((r1-r2)/2) + 2 sinh r1 sinh r2 sin²(Δφ/2)
                let half = a * a + r1.sinh() * r2.sinh() * b * b;
                radius * c::<T>(2.0) * half.max(T::zero()).sqrt().asinh()
            }
        }
    }

    /// Modes of `-∇²` with eigenvalue at most `cutoff`, grouped by degeneracy class.
    pub fn spectrum(&self, cutoff: T) -> Result<Vec<SpectralMode<T>>> {
        if !(cutoff > T::zero()) {
            return Err(Error::domain("spectral cutoff must be positive"));
        }
        match *self {
            Manifold::Sphere { radius } => {
                let r2 = radius * radius;
                let mut out = Vec::new();
                let mut l = 0usize;
                loop {
                    let lf = T::from_count(l);
                    let sigma = lf * (lf + T::one()) / r2;
                    if sigma > cutoff * (T::one() + c(1e-12)) {
                        break;
                    }
                    out.push(SpectralMode {
                        index: l,
                        eigenvalue: sigma,
                        multiplicity: 2 * l + 1,
                        label: ModeLabel::Sphere { degree: l },
                    });
                    l += 1;
                }
                Ok(out)
            }
            Manifold::Torus { l1, l2 } => {
                let tau = T::TAU();
                let kmax1 = (l1 * cutoff.sqrt() / tau).floor().to_i64().unwrap_or(0);
                let kmax2 = (l2 * cutoff.sqrt() / tau).floor().to_i64().unwrap_or(0);
                let mut pts: Vec<(T, [i64; 2])> = Vec::new();
                for k1 in -kmax1..=kmax1 {
                    for k2 in -kmax2..=kmax2 {
                        let sigma = torus_eigenvalue(l1, l2, [k1, k2]);
                        if sigma <= cutoff * (T::one() + c(1e-12)) {
                            pts.push((sigma, [k1, k2]));
                        }
                    }
                }
                pts.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("finite eigenvalues")
                        .then(a.1.cmp(&b.1))
                });
                let mut out: Vec<SpectralMode<T>> = Vec::new();
                for (sigma, k) in pts {
                    if let Some(last) = out.last_mut() {
                        if (sigma - last.eigenvalue).abs() <= c::<T>(1e-12) * sigma.max(T::one()) {
                            last.multiplicity += 1;
                            if let ModeLabel::Torus { wavevectors } = &mut last.label {
                                wavevectors.push(k);
                            }
                            continue;
                        }
                    }
                    out.push(SpectralMode {
                        index: out.len(),
                        eigenvalue: sigma,
                        multiplicity: 1,
                        label: ModeLabel::Torus {
                            wavevectors: vec![k],
                        },
                    });
                }
                Ok(out)
            }
            _ => Err(Error::Unsupported(format!(
                "the {} has continuous spectrum",
                self.kind().name()
            ))),
        }
    }

    /// Total number of eigenfunctions with eigenvalue at most `cutoff`.
    pub fn mode_count(&self, cutoff: T) -> Result<usize> {
        Ok(self.spectrum(cutoff)?.iter().map(|m| m.multiplicity).sum())
    }

    /// Σ_j |f_j(x)|² over one degeneracy class; position independent on these homogeneous spaces.
    pub fn class_density(&self, mode: &SpectralMode<T>) -> T {
        let v = self
            .volume()
            .expect("spectral modes exist only on compact manifolds");
        T::from_count(mode.multiplicity) / v
    }

    /// The `j`-th real orthonormal eigenfunction of a class, `0 <= j < multiplicity`.
    pub fn eigenfunction(&self, mode: &SpectralMode<T>, j: usize, x: &Point<T>) -> T {
        assert!(j < mode.multiplicity, "basis index out of range");
        match (&mode.label, *self) {
            (ModeLabel::Sphere { degree }, Manifold::Sphere { radius }) => {
                let l = *degree;
                let order = j as i64 - l as i64;
                let ma = order.unsigned_abs() as usize;
                let p = normalized_assoc_legendre(l, ma, x.x1.cos(), x.x1.sin());
                let angular = match order.cmp(&0) {
                    std::cmp::Ordering::Equal => T::one(),
                    std::cmp::Ordering::Greater => T::SQRT_2() * (T::from_count(ma) * x.x2).cos(),
                    std::cmp::Ordering::Less => T::SQRT_2() * (T::from_count(ma) * x.x2).sin(),
                };
                p * angular / radius
            }
            (ModeLabel::Torus { wavevectors }, Manifold::Torus { l1, l2 }) => {
                let v = l1 * l2;
                if mode.eigenvalue == T::zero() {
                    return T::one() / v.sqrt();
                }
                let mut reps: Vec<[i64; 2]> = wavevectors
                    .iter()
                    .copied()
                    .filter(|k| *k > [-k[0], -k[1]])
                    .collect();
                reps.sort();
                let k = reps[j / 2];
                let phase = torus_phase(l1, l2, k, x.x1, x.x2);
                let amp = (c::<T>(2.0) / v).sqrt();
                if j % 2 == 0 {
                    amp * phase.cos()
                } else {
                    amp * phase.sin()
                }
            }
            _ => panic!("mode does not belong to this manifold"),
        }
    }

    /// Normalized class function peaked at `a`: Σ_j f_j(a) f_j(x) / sqrt(class density).
    pub fn zonal(&self, mode: &SpectralMode<T>, a: &Point<T>, x: &Point<T>) -> T {
        match (&mode.label, *self) {
            (ModeLabel::Sphere { degree }, Manifold::Sphere { radius }) => {
                let cosg = {
                    let u = sphere_vector(a);
                    let v = sphere_vector(x);
                    (u[0] * v[0] + u[1] * v[1] + u[2] * v[2])
                        .max(-T::one())
                        .min(T::one())
                };
                let l = *degree;
                let norm =
                    (T::from_count(2 * l + 1) / (c::<T>(4.0) * T::PI() * radius * radius)).sqrt();
                norm * legendre(l, cosg)
            }
            (ModeLabel::Torus { wavevectors }, Manifold::Torus { l1, l2 }) => {
                let s: T = wavevectors
                    .iter()
                    .map(|&k| torus_phase(l1, l2, k, x.x1 - a.x1, x.x2 - a.x2).cos())
                    .sum();
                s / (T::from_count(mode.multiplicity) * l1 * l2).sqrt()
            }
            _ => panic!("mode does not belong to this manifold"),
        }
    }

    /// Value of [`Manifold::zonal`] at its own centre.
    pub fn zonal_at_source(&self, mode: &SpectralMode<T>) -> T {
        self.class_density(mode).sqrt()
    }
}

/// A degeneracy class of the Laplacian on a compact manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode<T> {
    pub index: usize,
    /// Eigenvalue σ of `-∇²`.
    pub eigenvalue: T,
    pub multiplicity: usize,
    pub label: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    Sphere { degree: usize },
    Torus { wavevectors: Vec<[i64; 2]> },
}

/// σ̄ = σ / (2m(2m+χ)), the eigenvalue for the rescaled metric.
pub fn scaled_eigenvalue<T: Scalar>(sigma: T, m: T, chi: T) -> Result<T> {
    let two_m = m + m;
    if !(two_m + chi > T::zero()) {
        return Err(Error::domain(format!(
            "2m + chi must be positive (m = {m}, chi = {chi})"
        )));
    }
    Ok(sigma / (two_m * (two_m + chi)))
}

pub(crate) fn sphere_vector<T: Scalar>(p: &Point<T>) -> [T; 3] {
    let (st, ct) = p.x1.sin_cos();
    let (sp, cp) = p.x2.sin_cos();
    [st * cp, st * sp, ct]
}

pub(crate) fn from_sphere_vector<T: Scalar>(v: [T; 3]) -> Point<T> {
    let rho = v[0].hypot(v[1]);
    let th = rho.atan2(v[2]);
    let ph = modulo(v[1].atan2(v[0]), T::TAU());
    Point::new(th, ph)
}

pub(crate) fn modulo<T: Scalar>(x: T, p: T) -> T {
    let r = x % p;
    let r = if r < T::zero() { r + p } else { r };
    if r >= p {
        T::zero()
    } else {
        r
    }
}

/// Signed representative of a periodic offset in `[-l/2, l/2]`.
pub(crate) fn torus_offset<T: Scalar>(d: T, l: T) -> T {
    let r = modulo(d, l);
    if r > l * c(0.5) {
        r - l
    } else {
        r
    }
}

fn torus_eigenvalue<T: Scalar>(l1: T, l2: T, k: [i64; 2]) -> T {
    let a = T::TAU() * T::lit(k[0] as f64) / l1;
    let b = T::TAU() * T::lit(k[1] as f64) / l2;
    a * a + b * b
}

fn torus_phase<T: Scalar>(l1: T, l2: T, k: [i64; 2], d1: T, d2: T) -> T {
    T::TAU() * (T::lit(k[0] as f64) * d1 / l1 + T::lit(k[1] as f64) * d2 / l2)
}

/// Legendre polynomial P_l(x) by the three-term recurrence.
pub fn legendre<T: Scalar>(l: usize, x: T) -> T {
    let (mut p0, mut p1) = (T::one(), x);
    if l == 0 {
        return p0;
    }
    for k in 2..=l {
        let kf = T::from_count(k);
        let p2 = ((kf + kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Associated Legendre function normalized so that `P̄_l^m(cos θ) cos(mφ)·√2`
/// is orthonormal on the unit sphere (the `m = 0` case without the `√2`).
fn normalized_assoc_legendre<T: Scalar>(l: usize, m: usize, x: T, s: T) -> T {
    let four_pi = c::<T>(4.0) * T::PI();
    let mut pmm = T::one();
    for k in 1..=m {
        let kf = T::from_count(k);
        pmm = pmm * ((kf + kf - T::one()) / (kf + kf)).sqrt() * s;
    }
    pmm = pmm * (T::from_count(2 * m + 1) / four_pi).sqrt();
    if l == m {
        return pmm;
    }
    let mut p_prev = pmm;
    let mut p = x * T::from_count(2 * m + 3).sqrt() * pmm;
    let mf = T::from_count(m);
    for ll in (m + 2)..=l {
        let lf = T::from_count(ll);
        let a = ((c::<T>(4.0) * lf * lf - T::one()) / (lf * lf - mf * mf)).sqrt();
        let lm1 = lf - T::one();
        let b = ((lm1 * lm1 - mf * mf) / (c::<T>(4.0) * lm1 * lm1 - T::one())).sqrt();
        let next = a * (x * p - b * p_prev);
        p_prev = p;
        p = next;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn distances() {
        let plane = Manifold::<f64>::plane();
        let d = plane
            .geodesic_distance(&Point::new(0.0, 0.0), &Point::new(3.0, 4.0))
            .unwrap();
        assert_eq!(d, 5.0);
        let s = Manifold::<f64>::sphere(1.0).unwrap();
        let d = s
            .geodesic_distance(&Point::new(0.0, 0.0), &Point::new(PI, 0.0))
            .unwrap();
        assert!((d - PI).abs() < 1e-15);
        let t = Manifold::<f64>::torus(1.0, 1.0).unwrap();
        let d = t
            .geodesic_distance(&Point::new(0.0, 0.0), &Point::new(0.9, 0.0))
            .unwrap();
        assert!((d - 0.1).abs() < 1e-15);
        let h = Manifold::<f64>::hyperbolic(1.0).unwrap();
        let d = h
            .geodesic_distance(&Point::new(1.0, 0.0), &Point::new(2.0, PI))
            .unwrap();
        assert!((d - 3.0).abs() < 1e-14);
        let d = h
            .geodesic_distance(&Point::new(1.5, 0.3), &Point::new(1.5, 0.3))
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn chart_errors() {
        let t = Manifold::<f64>::torus(1.0, 1.0).unwrap();
        assert!(t
            .geodesic_distance(&Point::new(1.2, 0.0), &Point::new(0.0, 0.0))
            .is_err());
        assert!(Manifold::<f64>::sphere(-1.0).is_err());
        assert!(Manifold::<f64>::hyperbolic(f64::NAN).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let s = Manifold::<f64>::sphere(1.0).unwrap().spectrum(2.5).unwrap();
        let got: Vec<_> = s.iter().map(|m| (m.eigenvalue, m.multiplicity)).collect();
        assert_eq!(got, vec![(0.0, 1), (2.0, 3)]);
        let t = Manifold::<f64>::torus(2.0 * PI, 2.0 * PI)
            .unwrap()
            .spectrum(1.5)
            .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].multiplicity, 1);
        assert!((t[1].eigenvalue - 1.0).abs() < 1e-14 && t[1].multiplicity == 4);
        let s2 = Manifold::<f64>::sphere(2.0).unwrap().spectrum(0.4).unwrap();
        assert_eq!(s2.len(), 1);
        assert!(Manifold::<f64>::plane().spectrum(1.0).is_err());
    }

    #[test]
    fn scaled_eigenvalue_examples() {
        assert_eq!(scaled_eigenvalue(0.0, 0.7, 3.0).unwrap(), 0.0);
        assert_eq!(scaled_eigenvalue(4.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(scaled_eigenvalue(6.0, 0.5, 2.0).unwrap(), 2.0);
        assert!(scaled_eigenvalue(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn wrap_lands_in_chart() {
        let s = Manifold::<f64>::sphere(1.0).unwrap();
        let p = s.wrap(Point::new(4.0, -1.0));
        s.validate_point(&p).unwrap();
        let t = Manifold::<f64>::torus(1.0, 2.0).unwrap();
        let p = t.wrap(Point::new(-0.25, 5.0));
        assert!((p.x1 - 0.75).abs() < 1e-15 && (p.x2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_vector_roundtrip() {
        let p = Point::new(1.1f64, 4.0);
        let q = from_sphere_vector(sphere_vector(&p));
        assert!((p.x1 - q.x1).abs() < 1e-14 && (p.x2 - q.x2).abs() < 1e-14);
    }
}
