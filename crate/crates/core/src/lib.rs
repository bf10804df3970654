//! Numerical toolkit for weighted Sobolev estimates of the heat equation on
//! model Riemannian manifolds: admissible radii, Vitali coverings, bootstrap
//! exponents, weighted norms and an implicit heat solver.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); exponent
//! bookkeeping is exact over rationals.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod admissible;
pub mod covering;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod grid;
pub mod heatflow;
pub mod linalg;
pub mod norms;
pub mod scalar;
pub mod sparse;
pub mod suites;

pub use error::{Error, Result};

/// Default precision for the aliases below; every numeric type is also
/// available with an explicit `f32`/`f64` parameter.
pub type Float = f64;
pub type Rational = exponents::Q;
pub type Chart = geometry::Chart<Float>;
pub type RadiusField = admissible::RadiusField<Float>;
pub type Covering = covering::Covering<Float>;
pub type GridGeometry = norms::GridGeometry<Float>;
pub type DiscreteField = norms::DiscreteField<Float>;
pub type ParabolicProblem = heatflow::ParabolicProblem<Float>;
pub type ParabolicSolution = heatflow::ParabolicSolution<Float>;
