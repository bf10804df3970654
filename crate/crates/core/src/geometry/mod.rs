//! Model Riemannian manifolds as analytic coordinate charts.

mod catalog;
mod chart;
mod curvature;
mod models;

pub use catalog::{Chart, ModelSpec, MODEL_NAMES};
pub use chart::{multi_indices, order, ChartBall, CoordBox, MetricChart, MultiIndex};
pub(crate) use curvature::fmt_point;
pub use curvature::{
    ball_lattice, christoffel, christoffel_derivative, christoffel_second_derivative, cmt_bound_check,
    cmt_bound_check_with, operator_norm_in_metric, ricci, ricci_field, unit_ball_volume, volume_of_ball, Christoffel,
    ChristoffelDerivative, CmtReport, RicciField,
};
pub use models::{Euclidean, FlatTorus, HyperbolicBall, HyperbolicHalfPlane, PerturbedEuclidean};
