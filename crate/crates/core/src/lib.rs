//! Renormalized non-relativistic Lee model on two-dimensional manifolds.
//!
//! A static source at `a` emits and absorbs bosons of mass `m` whose free
//! propagation on the manifold is governed by the heat kernel of the
//! Laplace–Beltrami operator. This crate provides the kernels, the
//! renormalized single-particle bound-state problem, operator lower bounds
//! for the many-particle sectors, and mean-field (variational) estimates.
//!
//! Everything numeric is generic over [`Scalar`] (implemented for `f32` and
//! `f64`); the `*64` aliases fix the common double precision case.

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod geometry;
pub mod heatkernel;
pub mod meanfield;
pub mod numerics;
pub mod renorm;
pub mod scalar;

pub use error::{Error, Result};
pub use geometry::{GeometryClass, Manifold, ManifoldKind, Point};
pub use scalar::Scalar;

pub type Manifold64 = geometry::Manifold<f64>;
pub type Point64 = geometry::Point<f64>;
pub type PhysicalParams64 = renorm::PhysicalParams<f64>;
pub type Manifold32 = geometry::Manifold<f32>;
pub type Point32 = geometry::Point<f32>;
