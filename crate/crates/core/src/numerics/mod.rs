//! Quadrature, root finding and special functions used by the physics modules.

pub mod gauss;
pub mod roots;
pub mod special;
pub mod tanh_sinh;

pub use gauss::{GaussJacobi, GaussLegendre};
pub use roots::{solve_bracketed, Root, RootOptions};
pub use special::{expint_e1, gamma, ln_gamma};
pub use tanh_sinh::{Quad, TanhSinh};
