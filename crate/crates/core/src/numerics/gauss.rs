use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

use super::special::ln_gamma;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Builds an `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0f64; n];
        let mut weights = vec![0f64; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let h = (b - a) * c(0.5);
        let m = a + h;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (m + h * x, h * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> T {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T, panels: usize) -> T {
        let h = (b - a) / T::from_count(panels);
        (0..panels)
            .map(|k| {
                let lo = a + h * T::from_count(k);
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussJacobi<T> {
    pub alpha: T,
    pub beta: T,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GaussJacobi<T> {
    /// Golub–Welsch construction from the three-term recurrence.
    pub fn new(n: usize, alpha: T, beta: T) -> Result<Self> {
        let (a, b) = (alpha.to_f64_lossy(), beta.to_f64_lossy());
        if !(a > -1.0 && b > -1.0) || n == 0 {
            return Err(Error::domain(
                "Gauss-Jacobi needs alpha, beta > -1 and n > 0",
            ));
        }
        let ab = a + b;
        let mut diag = vec![0f64; n];
        let mut off = vec![0f64; n];
        diag[0] = (b - a) / (ab + 2.0);
        for k in 1..n {
            let kf = k as f64;
            let t = 2.0 * kf + ab;
            diag[k] = (b * b - a * a) / (t * (t + 2.0));
            off[k] = if k == 1 {
                (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))).sqrt()
            } else {
                (4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (t * t * (t + 1.0) * (t - 1.0)))
                    .sqrt()
            };
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let first = symmetric_tridiagonal_eigen(&mut diag, &mut off)?;
        let mut pairs: Vec<(f64, f64)> = diag
            .iter()
            .zip(first.iter())
            .map(|(&x, &z)| (x, mu0 * z * z))
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Ok(Self {
            alpha,
            beta,
            nodes: pairs.iter().map(|p| T::lit(p.0)).collect(),
            weights: pairs.iter().map(|p| T::lit(p.1)).collect(),
        })
    }

    /// Approximates `∫_0^1 u^beta (1-u)^alpha g(u) du` for smooth `g`.
    pub fn integrate_unit<F: FnMut(T) -> T>(&self, mut g: F) -> T {
        let scale = T::lit(2.0).powf(-(self.alpha + self.beta + T::one()));
        let s: T = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g((x + T::one()) * c(0.5)))
            .sum();
        s * scale
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues; the returned vector holds the first component of each
/// normalized eigenvector. `off[k]` couples rows `k-1` and `k`.
fn symmetric_tridiagonal_eigen(diag: &mut [f64], off: &mut [f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut z = vec![0f64; n];
    z[0] = 1.0;
    let mut e = vec![0f64; n];
    e[..(n - 1)].copy_from_slice(&off[1..n]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = diag[mm].abs() + diag[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Accuracy {
                    what: "tridiagonal eigensolver".into(),
                    achieved: e[l].abs(),
                    requested: 0.0,
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[mm] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut cc, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = cc * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[mm] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                cc = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * cc * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = cc * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + cc * zf;
                z[i] = cc * z[i] - s * zf;
            }
            if early {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exact_for_polynomials() {
        let gl = GaussLegendre::<f64>::new(8);
        let v = gl.integrate(|x| x.powi(14) + x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-15);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_moments() {
        // ∫_0^1 u^{-1/2} (1-u)^{-1/2} du = π and ∫_0^1 u^{-1/2}(1-u)^{-1/2} u du = π/2
        let gj = GaussJacobi::<f64>::new(10, -0.5, -0.5).unwrap();
        let v = gj.integrate_unit(|_| 1.0);
        assert!((v - std::f64::consts::PI).abs() < 1e-13, "{v}");
        let v = gj.integrate_unit(|u| u);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        // ∫_0^1 u^{0.3} u^2 du = 1/3.3
        let gj = GaussJacobi::<f64>::new(6, 0.0, 0.3).unwrap();
        let v = gj.integrate_unit(|u| u * u);
        assert!((v - 1.0 / 3.3).abs() < 1e-13);
    }

    #[test]
    fn jacobi_reduces_to_legendre() {
        let gj = GaussJacobi::<f64>::new(7, 0.0, 0.0).unwrap();
        let gl = GaussLegendre::<f64>::new(7);
        for (a, b) in gj.nodes.iter().zip(&gl.nodes) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in gj.weights.iter().zip(&gl.weights) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
