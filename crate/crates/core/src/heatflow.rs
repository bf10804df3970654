//! Implicit-Euler solver for `du/dt + Laplacian u = omega` with `u(0) = 0`,
//! the threshold contraction check and the local/global estimate experiments.
//!
//! Scalars use the divergence-form Laplace-Beltrami stencil (metric
//! coefficients at half-nodes, homogeneous Dirichlet on non-periodic grids).
//! One-forms on periodic two-dimensional grids use the Hodge Laplacian
//! `d d* + d* d` from node/edge/cell cochains with diagonal Hodge stars.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissible::RadiusField;
use crate::error::{Error, Result};
use crate::exponents::{self, weight_spec, ExponentTable};
use crate::geometry::ModelSpec;
use crate::grid::NodeGrid;
use crate::linalg::{dist, Point};
use crate::norms::{
    radius_weight, sobolev_norm, DiscreteField, FieldKind, GridGeometry, NormRequest, Region, TimeWindow,
};
use crate::scalar::{from_usize, lit, pairwise_sum, to_f64, Real};
use crate::sparse::{conjugate_gradient, default_tolerance, lanczos_min_ritz, CgStats, Csr};

/// `A = -Delta` discretized on one grid: `L = M^-1 K` with `K` symmetric.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian<T: Real> {
    pub kind: FieldKind,
    pub geometry: Arc<GridGeometry<T>>,
    pub stiffness: Csr<T>,
    /// Diagonal mass (quadrature inner product on unknowns).
    pub mass: Vec<T>,
    /// Grid node of each scalar unknown; empty for one-forms (unknowns are edges).
    pub nodes: Vec<usize>,
}

pub fn discrete_laplacian<T: Real>(geometry: Arc<GridGeometry<T>>, kind: FieldKind) -> Result<DiscreteLaplacian<T>> {
    match kind {
        FieldKind::Scalar => scalar_laplacian(geometry),
        FieldKind::OneForm => hodge_laplacian(geometry),
    }
}

fn check_diagonal<T: Real>(geo: &GridGeometry<T>) -> Result<()> {
    let n = geo.grid.n;
    for gi in &geo.ginv {
        let scale = (0..n).fold(T::zero(), |a, i| a.max(gi[i][i].abs()));
        for i in 0..n {
            for j in 0..n {
                if i != j && gi[i][j].abs() > scale * lit(1e-12) {
                    return Err(Error::Capability(format!("{} has a non-diagonal metric", geo.chart.name())));
                }
            }
        }
    }
    Ok(())
}

/// `sqrt(det g) g^ii` at `x`.
fn conductance<T: Real>(geo: &GridGeometry<T>, x: &Point<T>, axis: usize) -> Result<T> {
    let n = geo.grid.n;
    let g = geo.chart.metric(x);
    let gi = crate::linalg::inverse(&g, n).ok_or_else(|| Error::Numerical("singular metric at a half-node".into()))?;
    Ok(crate::linalg::det(&g, n).sqrt() * gi[axis][axis])
}

fn half_node<T: Real>(grid: &NodeGrid<T>, p: usize, axis: usize) -> Point<T> {
    let mut x = grid.node(p);
    x[axis] = x[axis] + grid.spacing(axis) / lit(2.0);
    x
}

fn scalar_laplacian<T: Real>(geo: Arc<GridGeometry<T>>) -> Result<DiscreteLaplacian<T>> {
    check_diagonal(&geo)?;
    let grid = geo.grid;
    let mut dof = vec![usize::MAX; grid.len()];
    let mut nodes = Vec::new();
    for (p, slot) in dof.iter_mut().enumerate() {
        if !grid.is_boundary(p) {
            *slot = nodes.len();
            nodes.push(p);
        }
    }
    if nodes.is_empty() {
        return Err(Error::Config("grid has no interior nodes".into()));
    }
    let cell = grid.cell_volume();
    let links: Vec<Result<Vec<(usize, usize, T)>>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::new();
            for a in 0..grid.n {
                let Some(q) = grid.shift(p, a, 1) else { continue };
                let (dp, dq) = (dof[p], dof[q]);
                if dp == usize::MAX && dq == usize::MAX {
                    continue;
                }
                let h = grid.spacing(a);
                let c = conductance(&geo, &half_node(&grid, p, a), a)? * cell / (h * h);
                if dp != usize::MAX {
                    out.push((dp, dp, c));
                }
                if dq != usize::MAX {
                    out.push((dq, dq, c));
                }
                if dp != usize::MAX && dq != usize::MAX {
                    out.push((dp, dq, -c));
                    out.push((dq, dp, -c));
                }
            }
            Ok(out)
        })
        .collect();
    let mut trip = Vec::new();
    for l in links {
        trip.extend(l?);
    }
    let stiffness = Csr::from_triplets(nodes.len(), trip);
    let mass = nodes.iter().map(|&p| geo.quad[p]).collect();
    Ok(DiscreteLaplacian { kind: FieldKind::Scalar, geometry: geo, stiffness, mass, nodes })
}

fn hodge_laplacian<T: Real>(geo: Arc<GridGeometry<T>>) -> Result<DiscreteLaplacian<T>> {
    let grid = geo.grid;
    if grid.n != 2 || !grid.periodic {
        return Err(Error::Capability("one-form Laplacian needs a periodic two-dimensional grid".into()));
    }
    check_diagonal(&geo)?;
    let nn = grid.len();
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let e = |p: usize, axis: usize| axis * nn + p;
    let s = |p: usize, axis: usize, k: isize| grid.shift(p, axis, k).expect("periodic grid");
    // Hodge stars: nodes, edges (dual/primal length with conductance), cells
    let star0: Vec<T> = (0..nn).map(|p| geo.sqrt_det[p] * h0 * h1).collect();
    let mut star1 = vec![T::zero(); 2 * nn];
    for p in 0..nn {
        star1[e(p, 0)] = conductance(&geo, &half_node(&grid, p, 0), 0)? * h1 / h0;
        star1[e(p, 1)] = conductance(&geo, &half_node(&grid, p, 1), 1)? * h0 / h1;
    }
    let mut trip = Vec::new();
    for v in 0..nn {
        // column v of star1 d0: edges leaving (-1) and entering (+1) the node
        let col =
            [(e(v, 0), -T::one()), (e(v, 1), -T::one()), (e(s(v, 0, -1), 0), T::one()), (e(s(v, 1, -1), 1), T::one())];
        let w = T::one() / star0[v];
        for &(a, sa) in &col {
            for &(b, sb) in &col {
                trip.push((a, b, w * sa * star1[a] * sb * star1[b]));
            }
        }
    }
    for p in 0..nn {
        let mut c = grid.node(p);
        c[0] = c[0] + h0 / lit(2.0);
        c[1] = c[1] + h1 / lit(2.0);
        let g = geo.chart.metric(&c);
        let star2 = T::one() / (crate::linalg::det(&g, 2).sqrt() * h0 * h1);
        let row =
            [(e(p, 0), T::one()), (e(s(p, 0, 1), 1), T::one()), (e(s(p, 1, 1), 0), -T::one()), (e(p, 1), -T::one())];
        for &(a, sa) in &row {
            for &(b, sb) in &row {
                trip.push((a, b, star2 * sa * sb));
            }
        }
    }
    let stiffness = Csr::from_triplets(2 * nn, trip);
    Ok(DiscreteLaplacian { kind: FieldKind::OneForm, geometry: geo, stiffness, mass: star1, nodes: Vec::new() })
}

impl<T: Real> DiscreteLaplacian<T> {
    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    /// Unknowns from node values (node-major components).
    pub fn restrict(&self, vals: &[T]) -> Vec<T> {
        match self.kind {
            FieldKind::Scalar => self.nodes.iter().map(|&p| vals[p]).collect(),
            FieldKind::OneForm => {
                let grid = &self.geometry.grid;
                let nn = grid.len();
                let mut c = vec![T::zero(); 2 * nn];
                for p in 0..nn {
                    for a in 0..2 {
                        let q = grid.shift(p, a, 1).expect("periodic grid");
                        c[a * nn + p] = grid.spacing(a) * (vals[2 * p + a] + vals[2 * q + a]) / lit(2.0);
                    }
                }
                c
            }
        }
    }

    /// Node values from unknowns: zero on Dirichlet nodes, edge averages for one-forms.
    pub fn extend(&self, x: &[T]) -> Vec<T> {
        let grid = &self.geometry.grid;
        match self.kind {
            FieldKind::Scalar => {
                let mut v = vec![T::zero(); grid.len()];
                for (k, &p) in self.nodes.iter().enumerate() {
                    v[p] = x[k];
                }
                v
            }
            FieldKind::OneForm => {
                let nn = grid.len();
                let mut v = vec![T::zero(); 2 * nn];
                for p in 0..nn {
                    for a in 0..2 {
                        let q = grid.shift(p, a, -1).expect("periodic grid");
                        v[2 * p + a] = (x[a * nn + p] + x[a * nn + q]) / (lit::<T>(2.0) * grid.spacing(a));
                    }
                }
                v
            }
        }
    }

    /// `L x = M^-1 K x`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.stiffness.mul(x).into_iter().zip(&self.mass).map(|(k, m)| k / *m).collect()
    }

    /// Quadrature inner product of unknowns.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        let t: Vec<T> = a.iter().zip(b).zip(&self.mass).map(|((x, y), m)| *x * *y * *m).collect();
        pairwise_sum(&t)
    }

    pub fn norm(&self, a: &[T]) -> T {
        self.inner(a, a).max(T::zero()).sqrt()
    }

    /// Smallest Ritz value of `L` after a 50-step Lanczos probe.
    pub fn min_ritz_value(&self) -> T {
        lanczos_min_ritz(&self.stiffness, &self.mass, 50, 0x5eed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    Constant,
    /// `min(t / t_on, 1)`.
    Ramp {
        t_on: f64,
    },
    /// `sin^2(pi t / t_off)` up to `t_off`, zero afterwards.
    Pulse {
        t_off: f64,
    },
}

impl TimeProfile {
    pub fn at<T: Real>(&self, t: T) -> T {
        match *self {
            Self::Constant => T::one(),
            Self::Ramp { t_on } => (t / lit(t_on)).min(T::one()),
            Self::Pulse { t_off } => {
                if t >= lit(t_off) {
                    T::zero()
                } else {
                    (T::PI() * t / lit(t_off)).sin().powi(2)
                }
            }
        }
    }
}

/// Named forcing. Scalar values are given; one-forms take the value times `dx_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ForcingSpec {
    Zero,
    /// `amplitude sin x_1 sin x_2`, constant in time.
    Eigen {
        amplitude: f64,
    },
    /// Smooth bump `amplitude exp(1 - 1/(1 - s^2))`, `s = |x - center| / radius` in chart coordinates.
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
        profile: TimeProfile,
    },
}

/// `omega(t, x)` as node components.
pub type ForcingFn<T> = Arc<dyn Fn(T, &Point<T>) -> [T; 2] + Send + Sync>;

#[derive(Clone)]
pub enum Forcing<T: Real> {
    Spec(ForcingSpec),
    /// Fixed node values (node-major) times a profile.
    Nodal {
        values: Arc<Vec<T>>,
        profile: TimeProfile,
    },
    Custom(ForcingFn<T>),
}

impl<T: Real> std::fmt::Debug for Forcing<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Spec(s) => write!(f, "{s:?}"),
            Self::Nodal { profile, .. } => write!(f, "Nodal({profile:?})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn bump<T: Real>(x: &Point<T>, center: &Point<T>, radius: T, n: usize) -> T {
    let s = dist(x, center, n) / radius;
    if s >= T::one() {
        T::zero()
    } else {
        (T::one() - T::one() / (T::one() - s * s)).exp()
    }
}

impl<T: Real> Forcing<T> {
    pub fn zero() -> Self {
        Self::Spec(ForcingSpec::Zero)
    }

    /// Node values at time `t`.
    pub fn sample(&self, geo: &GridGeometry<T>, kind: FieldKind, t: T) -> Vec<T> {
        let grid = &geo.grid;
        let nc = if kind == FieldKind::OneForm { 2 } else { 1 };
        let pack = |f: &(dyn Fn(&Point<T>) -> [T; 2] + Sync)| -> Vec<T> {
            let rows: Vec<[T; 2]> = (0..grid.len()).into_par_iter().map(|p| f(&grid.node(p))).collect();
            rows.into_iter().flat_map(|r| r.into_iter().take(nc)).collect()
        };
        match self {
            Self::Spec(ForcingSpec::Zero) => vec![T::zero(); grid.len() * nc],
            Self::Spec(ForcingSpec::Eigen { amplitude }) => {
                let a = lit::<T>(*amplitude);
                pack(&|x: &Point<T>| [a * x[0].sin() * x[1].sin(), T::zero()])
            }
            Self::Spec(ForcingSpec::Bump { center, radius, amplitude, profile }) => {
                let c = crate::linalg::point(&center.iter().map(|&v| lit::<T>(v)).collect::<Vec<_>>());
                let a = lit::<T>(*amplitude) * profile.at(t);
                let r = lit::<T>(*radius);
                pack(&|x: &Point<T>| [a * bump(x, &c, r, grid.n), T::zero()])
            }
            Self::Nodal { values, profile } => {
                let s = profile.at(t);
                values.iter().map(|v| *v * s).collect()
            }
            Self::Custom(f) => pack(&|x: &Point<T>| f(t, x)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParabolicProblem<T: Real> {
    pub geometry: Arc<GridGeometry<T>>,
    pub kind: FieldKind,
    pub forcing: Forcing<T>,
    pub horizon: T,
    pub alpha: T,
    pub dt: T,
}

impl<T: Real> ParabolicProblem<T> {
    pub fn new(
        geometry: Arc<GridGeometry<T>>,
        kind: FieldKind,
        forcing: Forcing<T>,
        horizon: T,
        alpha: T,
        dt: T,
    ) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::Config(format!("time step dt = {dt} must be positive")));
        }
        if !(horizon > T::zero()) || !(alpha > T::zero()) {
            return Err(Error::Config("horizon T and margin alpha must be positive".into()));
        }
        if let Forcing::Spec(ForcingSpec::Bump { center, radius, .. }) = &forcing {
            let grid = &geometry.grid;
            if center.len() != grid.n || !(*radius > 0.0) {
                return Err(Error::Config("bump forcing needs an n-dimensional center and a positive radius".into()));
            }
            if !grid.periodic {
                let margin = (0..grid.n).fold(0.0f64, |m, i| m.max(to_f64(grid.spacing(i)))) * 2.0;
                let fits = (0..grid.n).all(|i| {
                    center[i] - radius >= to_f64(grid.lo[i]) + margin
                        && center[i] + radius <= to_f64(grid.hi[i]) - margin
                });
                if !fits {
                    return Err(Error::Config("forcing support must stay away from the truncation boundary".into()));
                }
            }
        }
        Ok(Self { geometry, kind, forcing, horizon, alpha, dt })
    }

    pub fn steps(&self) -> usize {
        to_f64((self.horizon + self.alpha) / self.dt - lit(1e-9)).ceil() as usize
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.steps()).map(|j| from_usize::<T>(j) * self.dt).collect()
    }
}

/// Serializable problem description: model, resolution, forcing and time data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: ModelSpec,
    pub kind: FieldKind,
    /// Cells per axis.
    pub cells: usize,
    /// Solver sub-box of the working box; the whole box when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    pub forcing: ForcingSpec,
    pub horizon: f64,
    pub alpha: f64,
    pub dt: f64,
}

impl ProblemSpec {
    pub fn build<T: Real>(&self) -> Result<ParabolicProblem<T>> {
        let chart = self.model.build::<T>()?;
        let d = chart.domain().clone();
        let (mut lo, mut hi) = (d.lo, d.hi);
        if self.lo.is_some() || self.hi.is_some() {
            if d.periodic {
                return Err(Error::Config("a periodic problem runs on the whole torus".into()));
            }
            for (bound, given) in [(&mut lo, &self.lo), (&mut hi, &self.hi)] {
                if let Some(v) = given {
                    if v.len() != d.n {
                        return Err(Error::Config(format!("solver box needs {} coordinates", d.n)));
                    }
                    for i in 0..d.n {
                        bound[i] = lit(v[i]);
                    }
                }
            }
            if (0..d.n).any(|i| lo[i] < d.lo[i] || hi[i] > d.hi[i]) {
                return Err(Error::Domain("solver box leaves the working box".into()));
            }
        }
        let counts = vec![if d.periodic { self.cells } else { self.cells + 1 }; d.n];
        let grid = NodeGrid::new(&lo, &hi, &counts, d.periodic)?;
        let geo = GridGeometry::new(chart, grid)?;
        ParabolicProblem::new(
            geo,
            self.kind,
            Forcing::Spec(self.forcing.clone()),
            lit(self.horizon),
            lit(self.alpha),
            lit(self.dt),
        )
    }
}

pub struct ParabolicSolution<T: Real> {
    pub laplacian: DiscreteLaplacian<T>,
    pub u: DiscreteField<T>,
    /// Backward differences; the first frame repeats the first step.
    pub dtu: DiscreteField<T>,
    pub forcing: DiscreteField<T>,
    /// `||u(t_j)||` and `||omega(t_j)||` in the solver's quadrature norm.
    pub u_norms: Vec<T>,
    pub forcing_norms: Vec<T>,
    pub steps: Vec<CgStats<T>>,
}

/// `(M + dt K) u_{j+1} = M (u_j + dt omega(t_{j+1}))`, `u_0 = 0`, up to `T + alpha`.
pub fn solve_parabolic<T: Real>(problem: &ParabolicProblem<T>) -> Result<ParabolicSolution<T>> {
    let lap = discrete_laplacian(problem.geometry.clone(), problem.kind)?;
    let geo = problem.geometry.as_ref();
    let times = problem.times();
    let dt = problem.dt;
    let system = lap.stiffness.shifted(&lap.mass, dt);
    let tol = default_tolerance::<T>();
    let max_iter = 10 * lap.dofs();
    let node_forcing: Vec<Vec<T>> = times.iter().map(|&t| problem.forcing.sample(geo, problem.kind, t)).collect();
    let mut x = vec![T::zero(); lap.dofs()];
    let mut frames = vec![lap.extend(&x)];
    let mut u_norms = vec![T::zero()];
    let mut forcing_norms = vec![lap.norm(&lap.restrict(&node_forcing[0]))];
    let mut steps = Vec::with_capacity(times.len());
    for f in node_forcing.iter().skip(1) {
        let w = lap.restrict(f);
        forcing_norms.push(lap.norm(&w));
        let rhs: Vec<T> = x.iter().zip(&w).zip(&lap.mass).map(|((u, w), m)| *m * (*u + dt * *w)).collect();
        steps.push(conjugate_gradient(&system, &rhs, &mut x, tol, max_iter)?);
        u_norms.push(lap.norm(&x));
        frames.push(lap.extend(&x));
    }
    let mut dframes = Vec::with_capacity(frames.len());
    for j in 0..frames.len() {
        let (a, b) = if j == 0 { (0, 1.min(frames.len() - 1)) } else { (j - 1, j) };
        dframes.push(frames[b].iter().zip(&frames[a]).map(|(p, q)| (*p - *q) / dt).collect());
    }
    let g = problem.geometry.clone();
    Ok(ParabolicSolution {
        u: DiscreteField::new(g.clone(), problem.kind, times.clone(), frames)?,
        dtu: DiscreteField::new(g.clone(), problem.kind, times.clone(), dframes)?,
        forcing: DiscreteField::new(g, problem.kind, times, node_forcing)?,
        laplacian: lap,
        u_norms,
        forcing_norms,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport<T> {
    pub times: Vec<T>,
    pub u_norms: Vec<T>,
    /// `sum_{i <= j} dt ||omega(t_i)||` (right endpoints, the scheme's own bound).
    pub bound: Vec<T>,
    /// Trapezoid rule for the same time integral.
    pub bound_trapezoid: Vec<T>,
    pub holds: bool,
    pub holds_trapezoid: bool,
    /// `max_j ||u(t_j)|| / bound_j` over nonzero bounds.
    pub worst_ratio: T,
}

/// `||u(t_j)||_{L^2} <= int_0^{t_j} ||omega||_{L^2} ds` at every time node, slack `1e-8`.
pub fn check_threshold_contraction<T: Real>(solution: &ParabolicSolution<T>) -> ContractionReport<T> {
    let times = solution.u.times.clone();
    let f = &solution.forcing_norms;
    let mut bound = vec![T::zero()];
    let mut trap = vec![T::zero()];
    for j in 1..times.len() {
        let dt = times[j] - times[j - 1];
        bound.push(bound[j - 1] + dt * f[j]);
        trap.push(trap[j - 1] + dt * (f[j] + f[j - 1]) / lit(2.0));
    }
    let slack = T::one() + lit(1e-8);
    let ok = |b: &[T]| solution.u_norms.iter().zip(b).all(|(u, b)| *u <= *b * slack);
    let worst_ratio = solution
        .u_norms
        .iter()
        .zip(&bound)
        .filter(|(_, b)| **b > T::zero())
        .fold(T::zero(), |w, (u, b)| w.max(*u / *b));
    ContractionReport {
        holds: ok(&bound),
        holds_trapezoid: ok(&trap),
        times,
        u_norms: solution.u_norms.clone(),
        bound,
        bound_trapezoid: trap,
        worst_ratio,
    }
}

impl<T: Real> ContractionReport<T> {
    /// CSV rows `t,norm_u,int_norm_omega`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "norm_u", "int_norm_omega"]).map_err(csv_err)?;
        for j in 0..self.times.len() {
            w.write_record([self.times[j].to_string(), self.u_norms[j].to_string(), self.bound[j].to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalReport<T> {
    pub radius: T,
    pub lhs: T,
    pub rhs: T,
    pub c_emp: T,
}

/// Local estimate on `B = B(x, R)`, `B1 = B(x, R/2)`:
/// lhs `= ||du/dt||_{L^s([0,T+a/2], L^r(B1))} + R^m ||u||_{L^s([0,T+a/2], W^{m,r}(B1))}`,
/// rhs `= ||Du||_{L^s([0,T+a], L^r(B))} + R^-m ||u||_{L^s([0,T+a], L^r(B))}`.
#[allow(clippy::too_many_arguments)]
pub fn local_estimate_experiment<T: Real>(
    solution: &ParabolicSolution<T>,
    problem: &ParabolicProblem<T>,
    center: &Point<T>,
    radius: T,
    m: usize,
    r: T,
    s: T,
) -> Result<LocalReport<T>> {
    let (t, a) = (problem.horizon, problem.alpha);
    let inner = Region::Ball { center: *center, radius: radius / lit(2.0) };
    let outer = Region::Ball { center: *center, radius };
    let short = TimeWindow { s, t0: T::zero(), t1: t + a / lit(2.0) };
    let long = TimeWindow { s, t0: T::zero(), t1: t + a };
    let rm = radius.powi(m as i32);
    let lhs = sobolev_norm(&solution.dtu, &NormRequest::lebesgue(r).on(inner.clone()).over(short))?
        + rm * sobolev_norm(&solution.u, &NormRequest::sobolev(r, m).on(inner).over(short))?;
    let rhs = sobolev_norm(&solution.forcing, &NormRequest::lebesgue(r).on(outer.clone()).over(long))?
        + sobolev_norm(&solution.u, &NormRequest::lebesgue(r).on(outer).over(long))? / rm;
    let c_emp = if rhs == T::zero() { T::zero() } else { lhs / rhs };
    Ok(LocalReport { radius, lhs, rhs, c_emp })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalReport<T> {
    pub r: f64,
    pub lhs: T,
    pub rhs: T,
    /// `None` when the forcing vanishes.
    pub ratio: Option<T>,
    pub vacuous: bool,
}

/// `||du/dt||_{L^r([0,T], L^r(w1))} + ||u||_{L^r([0,T], W^{2,r}(w2))}` against
/// `||omega||_{L^r([0,T+a], L^r(w3))} + ||omega||_{L^r([0,T+a], L^2)}`, weights
/// `R_eps^(r delta)`, `R_eps^(r gamma)`, `R_eps^(r beta)` from the table.
pub fn global_estimate_experiment<T: Real>(
    solution: &ParabolicSolution<T>,
    problem: &ParabolicProblem<T>,
    field: &RadiusField<T>,
    table: &ExponentTable,
) -> Result<GlobalReport<T>> {
    let r_q = table.r;
    let r = exponents::to_f64(&r_q);
    if r < 2.0 {
        return Err(Error::Domain(format!("global estimate needs r >= 2, got {r}")));
    }
    let spec = weight_spec(table, r_q);
    let geo = problem.geometry.as_ref();
    let w = |e: &exponents::Q| radius_weight(geo, field, lit(exponents::to_f64(e)));
    let (w1, w2, w3) = (w(&spec.w1_exp)?, w(&spec.w2_exp)?, w(&spec.w3_exp)?);
    let rt = lit::<T>(r);
    let short = TimeWindow { s: rt, t0: T::zero(), t1: problem.horizon };
    let long = TimeWindow { s: rt, t0: T::zero(), t1: problem.horizon + problem.alpha };
    let lhs = sobolev_norm(&solution.dtu, &NormRequest::lebesgue(rt).weighted(w1).over(short))?
        + sobolev_norm(&solution.u, &NormRequest::sobolev(rt, 2).weighted(w2).over(short))?;
    let rhs = sobolev_norm(&solution.forcing, &NormRequest::lebesgue(rt).weighted(w3).over(long))?
        + sobolev_norm(&solution.forcing, &NormRequest::lebesgue(lit(2.0)).over(long))?;
    let vacuous = rhs == T::zero();
    Ok(GlobalReport { r, lhs, rhs, ratio: (!vacuous).then(|| lhs / rhs), vacuous })
}
