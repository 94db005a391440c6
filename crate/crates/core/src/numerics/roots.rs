use crate::error::{Error, Result};
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions<T> {
    /// Absolute bracket width at which iteration stops.
    pub x_tol: T,
    /// Residual magnitude accepted as a root.
    pub f_tol: T,
    pub max_iter: usize,
    /// Plain bisection steps taken before switching to secant updates.
    pub bisection_steps: usize,
}

impl<T: Scalar> Default for RootOptions<T> {
    fn default() -> Self {
        Self {
            x_tol: T::epsilon(),
            f_tol: T::zero(),
            max_iter: 200,
            bisection_steps: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub fx: T,
    pub iterations: usize,
    pub bracket: (T, T),
}

/// Finds a sign change of `f` in `[lo, hi]`: a few bisection steps followed by
/// Illinois-modified secant steps that never leave the bracket.
pub fn solve_bracketed<T, F>(mut f: F, lo: T, hi: T, opts: RootOptions<T>) -> Result<Root<T>>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let initial = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == T::zero() {
        return Ok(Root {
            x: a,
            fx: fa,
            iterations: 0,
            bracket: initial,
        });
    }
    if fb == T::zero() {
        return Ok(Root {
            x: b,
            fx: fb,
            iterations: 0,
            bracket: initial,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NotFound(format!(
            "no sign change in [{a:e}, {b:e}]: f = {fa:e}, {fb:e}"
        )));
    }
    let mut side = 0i8;
    for it in 1..=opts.max_iter {
        let x = if it <= opts.bisection_steps {
            a + (b - a) * c(0.5)
        } else {
            let s = (a * fb - b * fa) / (fb - fa);
            if s > a && s < b {
                s
            } else {
                a + (b - a) * c(0.5)
            }
        };
        let fx = f(x)?;
        let width = b - a;
        if fx == T::zero() || fx.abs() <= opts.f_tol {
            return Ok(Root {
                x,
                fx,
                iterations: it,
                bracket: initial,
            });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 && it > opts.bisection_steps {
                fb = fb * c(0.5);
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 && it > opts.bisection_steps {
                fa = fa * c(0.5);
            }
            side = 1;
        }
        let scale = a.abs().max(b.abs()).max(T::one());
        if b - a <= opts.x_tol.max(T::epsilon() * c(4.0) * scale) || b - a == width {
            let (x, fx) = if fa.abs() < fb.abs() {
                (a, fa)
            } else {
                (b, fb)
            };
            return Ok(Root {
                x,
                fx,
                iterations: it,
                bracket: initial,
            });
        }
    }
    Err(Error::NotFound(format!(
        "no convergence within {} iterations",
        opts.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let r =
            solve_bracketed(|x: f64| Ok(x * x - 2.0), 0.0, 3.0, RootOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-14);
        let r = solve_bracketed(
            |x: f64| Ok((x - 1.0).powi(3)),
            -5.0,
            2.0,
            RootOptions::default(),
        )
        .unwrap();
        assert!((r.x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_missing_sign_change() {
        let e = solve_bracketed(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, RootOptions::default());
        assert!(matches!(e, Err(Error::NotFound(_))));
    }
}
