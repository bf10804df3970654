//! Weighted Lebesgue and Sobolev norms of grid fields, with the chart
//! comparison, Hölder-volume, embedding and covering-sum checks.
//!
//! Derivatives are second-order central differences (one-sided second-order
//! stencils on boundary layers); covariant derivatives add the Christoffel
//! terms, and pointwise moduli raise every index with `g^-1`. Quadrature
//! weights are `trapezoid * h^n * sqrt(det g)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissible::RadiusField;
use crate::covering::{Covering, ETA};
use crate::error::{Error, Result};
use crate::exponents::Variant;
use crate::geometry::{christoffel, Chart, Christoffel};
use crate::grid::NodeGrid;
use crate::linalg::{det, dist, inverse, Mat, Point, MAX_DIM};
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Scalar,
    OneForm,
}

impl FieldKind {
    pub fn rank(self) -> usize {
        match self {
            Self::Scalar => 0,
            Self::OneForm => 1,
        }
    }
}

/// Metric data sampled once per grid node.
pub struct GridGeometry<T: Real> {
    pub chart: Chart<T>,
    pub grid: NodeGrid<T>,
    pub ginv: Vec<Mat<T>>,
    pub sqrt_det: Vec<T>,
    pub gamma: Vec<Christoffel<T>>,
    /// Quadrature weight per node.
    pub quad: Vec<T>,
}

impl<T: Real> std::fmt::Debug for GridGeometry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridGeometry").field("chart", &self.chart.name()).field("grid", &self.grid).finish()
    }
}

/// Inverse metric, volume density and Christoffel symbols at one node.
type NodeMetric<T> = (Mat<T>, T, Christoffel<T>);

impl<T: Real> GridGeometry<T> {
    /// Nodes of the closed geodesic ball, ascending.
    pub fn ball_nodes(&self, center: &Point<T>, radius: T) -> Vec<usize> {
        let chart = self.chart.as_ref();
        let n = self.grid.n;
        let hull = chart.ball_hull(center, radius);
        let reach = hull.radius * (T::one() + lit(1e-9));
        let (mut lo, mut hi) = (hull.center, hull.center);
        for i in 0..n {
            lo[i] = lo[i] - reach;
            hi[i] = hi[i] + reach;
        }
        let wraps = chart.domain().periodic;
        let mut nodes: Vec<usize> = self
            .grid
            .nodes_in_box(&lo, &hi)
            .into_par_iter()
            .filter(|&p| {
                let x = self.grid.node(p);
                (wraps || dist(&x, &hull.center, n) <= reach) && chart.in_ball(center, radius, &x)
            })
            .collect();
        nodes.sort_unstable();
        nodes
    }

    pub fn new(chart: Chart<T>, grid: NodeGrid<T>) -> Result<Arc<Self>> {
        let n = chart.dim();
        if grid.n != n {
            return Err(Error::Config(format!("grid dimension {} does not match chart dimension {n}", grid.n)));
        }
        if grid.periodic && !chart.domain().periodic {
            return Err(Error::Config(format!("{} has no periodic box for a periodic grid", chart.name())));
        }
        let rows: Vec<Result<NodeMetric<T>>> = (0..grid.len())
            .into_par_iter()
            .map(|p| {
                let x = grid.node(p);
                let g = chart.metric(&x);
                let gi = inverse(&g, n).ok_or_else(|| Error::Numerical(format!("singular metric at node {p}")))?;
                Ok((gi, det(&g, n).sqrt(), christoffel(chart.as_ref(), &x)?))
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let cell = grid.cell_volume();
        let quad = rows.iter().enumerate().map(|(p, r)| grid.trapezoid_factor(p) * cell * r.1).collect();
        let (mut ginv, mut sqrt_det, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
        for (gi, sd, ga) in rows {
            ginv.push(gi);
            sqrt_det.push(sd);
            gamma.push(ga);
        }
        Ok(Arc::new(Self { chart, grid, ginv, sqrt_det, gamma, quad }))
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Node values of a scalar or one-form (components `omega_i` in chart
/// coordinates), optionally at several time stamps.
#[derive(Debug, Clone)]
pub struct DiscreteField<T: Real> {
    pub geometry: Arc<GridGeometry<T>>,
    pub kind: FieldKind,
    pub times: Vec<T>,
    /// `frames[t][node * ncomp + c]`.
    pub frames: Vec<Vec<T>>,
}

impl<T: Real> DiscreteField<T> {
    pub fn new(geometry: Arc<GridGeometry<T>>, kind: FieldKind, times: Vec<T>, frames: Vec<Vec<T>>) -> Result<Self> {
        if kind == FieldKind::OneForm && geometry.grid.n != 2 {
            return Err(Error::Capability("one-forms are supported in dimension 2 only".into()));
        }
        let want = geometry.len() * ncomp(kind, geometry.grid.n);
        if times.len() != frames.len() || frames.iter().any(|f| f.len() != want) {
            return Err(Error::Config(format!("each frame needs {want} values and one time stamp")));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time stamps must increase".into()));
        }
        Ok(Self { geometry, kind, times, frames })
    }

    pub fn scalar(geometry: Arc<GridGeometry<T>>, f: impl Fn(&Point<T>) -> T + Sync) -> Self {
        let vals = (0..geometry.len()).into_par_iter().map(|p| f(&geometry.grid.node(p))).collect();
        Self { geometry, kind: FieldKind::Scalar, times: vec![T::zero()], frames: vec![vals] }
    }

    pub fn one_form(geometry: Arc<GridGeometry<T>>, f: impl Fn(&Point<T>) -> [T; 2] + Sync) -> Result<Self> {
        let vals: Vec<[T; 2]> = (0..geometry.len()).into_par_iter().map(|p| f(&geometry.grid.node(p))).collect();
        Self::new(geometry, FieldKind::OneForm, vec![T::zero()], vec![vals.into_iter().flatten().collect()])
    }

    pub fn ncomp(&self) -> usize {
        ncomp(self.kind, self.geometry.grid.n)
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            for v in f.iter_mut() {
                *v = *v * c;
            }
        }
        out
    }

    /// The static field at one frame.
    pub fn at(&self, frame: usize) -> Self {
        Self {
            geometry: self.geometry.clone(),
            kind: self.kind,
            times: vec![self.times[frame]],
            frames: vec![self.frames[frame].clone()],
        }
    }
}

fn ncomp(kind: FieldKind, n: usize) -> usize {
    n.pow(kind.rank() as u32)
}

/// Node weights `w(x)`.
#[derive(Debug, Clone)]
pub enum Weight<T> {
    One,
    Nodal(Arc<Vec<T>>),
}

impl<T: Real> Weight<T> {
    fn at(&self, p: usize) -> T {
        match self {
            Self::One => T::one(),
            Self::Nodal(w) => w[p],
        }
    }
}

/// `R_eps(x)^exp` at every node, interpolated from a radius field.
pub fn radius_weight<T: Real>(geometry: &GridGeometry<T>, field: &RadiusField<T>, exp: T) -> Result<Weight<T>> {
    let w: Vec<Option<T>> = (0..geometry.len())
        .into_par_iter()
        .map(|p| field.interpolate(&geometry.grid.node(p)).map(|r| r.powf(exp)))
        .collect();
    let w = w
        .into_iter()
        .enumerate()
        .map(|(p, v)| v.ok_or_else(|| Error::Domain(format!("radius field does not cover grid node {p}"))))
        .collect::<Result<Vec<T>>>()?;
    Ok(Weight::Nodal(Arc::new(w)))
}

#[derive(Debug, Clone)]
pub enum Region<T> {
    Whole,
    /// Geodesic ball.
    Ball {
        center: Point<T>,
        radius: T,
    },
    /// Euclidean ball of the chart `xi = diag(scale) (x - center)`.
    ChartBall {
        center: Point<T>,
        radius: T,
        scale: Point<T>,
    },
    Mask(Arc<Vec<bool>>),
}

impl<T: Real> Region<T> {
    pub fn mask(&self, geometry: &GridGeometry<T>) -> Vec<bool> {
        let n = geometry.grid.n;
        match self {
            Self::Whole => vec![true; geometry.len()],
            Self::Ball { center, radius } => {
                let mut mask = vec![false; geometry.len()];
                for p in geometry.ball_nodes(center, *radius) {
                    mask[p] = true;
                }
                mask
            }
            Self::ChartBall { center, radius, scale } => (0..geometry.len())
                .map(|p| {
                    let x = geometry.grid.node(p);
                    let r2 = (0..n).fold(T::zero(), |a, i| a + ((x[i] - center[i]) * scale[i]).powi(2));
                    r2 <= *radius * *radius
                })
                .collect(),
            Self::Mask(m) => m.as_ref().clone(),
        }
    }
}

/// `L^s` in time over `[t0, t1]` (trapezoid on the field's time stamps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeWindow<T> {
    pub s: T,
    pub t0: T,
    pub t1: T,
}

#[derive(Debug, Clone)]
pub struct NormRequest<T> {
    pub r: T,
    /// Sobolev order `l` in `0..=2`.
    pub order: usize,
    pub weight: Weight<T>,
    pub region: Region<T>,
    pub time: Option<TimeWindow<T>>,
}

impl<T: Real> NormRequest<T> {
    pub fn lebesgue(r: T) -> Self {
        Self { r, order: 0, weight: Weight::One, region: Region::Whole, time: None }
    }

    pub fn sobolev(r: T, order: usize) -> Self {
        Self { order, ..Self::lebesgue(r) }
    }

    pub fn weighted(mut self, w: Weight<T>) -> Self {
        self.weight = w;
        self
    }

    pub fn on(mut self, region: Region<T>) -> Self {
        self.region = region;
        self
    }

    pub fn over(mut self, window: TimeWindow<T>) -> Self {
        self.time = Some(window);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.r >= T::one()) {
            return Err(Error::Config(format!("integrability r = {} must be at least 1", self.r)));
        }
        if self.order > 2 {
            return Err(Error::Capability(format!("Sobolev order {} unsupported (0..=2)", self.order)));
        }
        if let Some(w) = &self.time {
            if !(w.s >= T::one()) || !(w.t1 >= w.t0) {
                return Err(Error::Config("time window needs s >= 1 and t0 <= t1".into()));
            }
        }
        Ok(())
    }
}

/// Partial along `axis` of component `c` of a node-major field with `nc` components.
fn partial<T: Real>(grid: &NodeGrid<T>, vals: &[T], nc: usize, c: usize, p: usize, axis: usize) -> T {
    let h = grid.spacing(axis);
    let two = lit::<T>(2.0);
    let v = |q: usize| vals[q * nc + c];
    match (grid.shift(p, axis, -1), grid.shift(p, axis, 1)) {
        (Some(a), Some(b)) => (v(b) - v(a)) / (two * h),
        (None, Some(b)) => {
            let b2 = grid.shift(b, axis, 1).expect("at least 4 nodes per axis");
            (lit::<T>(-3.0) * v(p) + lit::<T>(4.0) * v(b) - v(b2)) / (two * h)
        }
        (Some(a), None) => {
            let a2 = grid.shift(a, axis, -1).expect("at least 4 nodes per axis");
            (lit::<T>(3.0) * v(p) - lit::<T>(4.0) * v(a) + v(a2)) / (two * h)
        }
        (None, None) => T::zero(),
    }
}

/// `nabla` of a covariant rank-`k` tensor field (node-major, `n^k`
/// components, first index outermost); the new derivative index is prepended.
/// Without `gamma` this is the plain partial.
fn derive<T: Real>(geo: &GridGeometry<T>, vals: &[T], rank: usize, covariant: bool) -> Vec<T> {
    let n = geo.grid.n;
    let nc = n.pow(rank as u32);
    let out_nc = nc * n;
    let rows: Vec<Vec<T>> = (0..geo.len())
        .into_par_iter()
        .map(|p| {
            let mut row = vec![T::zero(); out_nc];
            let gamma = &geo.gamma[p];
            for a in 0..n {
                for c in 0..nc {
                    let mut v = partial(&geo.grid, vals, nc, c, p, a);
                    if covariant {
                        // subtract Gamma^e_{a i_s} A_{..e..} for every slot
                        let mut digits = [0usize; MAX_DIM];
                        let mut rem = c;
                        for s in (0..rank).rev() {
                            digits[s] = rem % n;
                            rem /= n;
                        }
                        for s in 0..rank {
                            for e in 0..n {
                                let mut d = digits;
                                d[s] = e;
                                let idx = (0..rank).fold(0, |acc, t| acc * n + d[t]);
                                v = v - gamma[e][a][digits[s]] * vals[p * nc + idx];
                            }
                        }
                    }
                    row[a * nc + c] = v;
                }
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// `|A|_g` of a covariant rank-`k` tensor at node `p`.
fn modulus<T: Real>(ginv: &Mat<T>, n: usize, comps: &[T], rank: usize) -> T {
    let nc = n.pow(rank as u32);
    let mut acc = T::zero();
    for i in 0..nc {
        for j in 0..nc {
            let (mut a, mut b, mut w) = (i, j, T::one());
            for _ in 0..rank {
                w = w * ginv[a % n][b % n];
                a /= n;
                b /= n;
            }
            if w != T::zero() {
                acc = acc + w * comps[i] * comps[j];
            }
        }
    }
    acc.max(T::zero()).sqrt()
}

/// Euclidean modulus in the chart `xi = diag(scale) x`: every index divides by its scale.
fn flat_modulus<T: Real>(scale: &Point<T>, n: usize, comps: &[T], rank: usize) -> T {
    let nc = n.pow(rank as u32);
    let mut acc = T::zero();
    for (i, &c) in comps.iter().enumerate().take(nc) {
        let (mut a, mut w) = (i, T::one());
        for _ in 0..rank {
            w = w * scale[a % n];
            a /= n;
        }
        acc = acc + (c / w).powi(2);
    }
    acc.sqrt()
}

/// How pointwise moduli and the measure are taken.
#[derive(Debug, Clone, Copy)]
enum Frame<T> {
    Metric,
    Flat(Point<T>),
}

/// `|nabla^j f|` at every node for `j = 0..=order`, as `out[j][p]`.
fn moduli_in<T: Real>(field: &DiscreteField<T>, frame: usize, order: usize, how: Frame<T>) -> Vec<Vec<T>> {
    let geo = field.geometry.as_ref();
    let n = geo.grid.n;
    let rank0 = field.kind.rank();
    let covariant = matches!(how, Frame::Metric);
    let mut levels = vec![field.frames[frame].clone()];
    for j in 0..order {
        let next = derive(geo, &levels[j], rank0 + j, covariant);
        levels.push(next);
    }
    levels
        .iter()
        .enumerate()
        .map(|(j, vals)| {
            let rank = rank0 + j;
            let nc = n.pow(rank as u32);
            (0..geo.len())
                .into_par_iter()
                .map(|p| {
                    let comps = &vals[p * nc..(p + 1) * nc];
                    match how {
                        Frame::Metric => modulus(&geo.ginv[p], n, comps, rank),
                        Frame::Flat(s) => flat_modulus(&s, n, comps, rank),
                    }
                })
                .collect()
        })
        .collect()
}

/// Pointwise `|nabla^j f|_g`, `j = 0..=order`, of one frame.
pub fn pointwise_moduli<T: Real>(field: &DiscreteField<T>, frame: usize, order: usize) -> Vec<Vec<T>> {
    moduli_in(field, frame, order, Frame::Metric)
}

/// `int |m|^r w dv` over the masked nodes.
fn integral<T: Real>(quad: &[T], m: &[T], weight: &Weight<T>, mask: &[bool], r: T) -> T {
    let terms: Vec<T> =
        (0..m.len()).map(|p| if mask[p] { quad[p] * weight.at(p) * m[p].abs().powf(r) } else { T::zero() }).collect();
    pairwise_sum(&terms)
}

/// Per-order `int |nabla^j f|^r w dv` of one frame.
fn order_integrals<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    req: &NormRequest<T>,
    mask: &[bool],
    how: Frame<T>,
) -> Vec<T> {
    let quad: Vec<T> = match how {
        Frame::Metric => field.geometry.quad.clone(),
        Frame::Flat(s) => {
            let grid = &field.geometry.grid;
            let jac = (0..grid.n).fold(T::one(), |a, i| a * s[i]);
            (0..grid.len()).map(|p| grid.trapezoid_factor(p) * grid.cell_volume() * jac).collect()
        }
    };
    moduli_in(field, frame, req.order, how).iter().map(|m| integral(&quad, m, &req.weight, mask, req.r)).collect()
}

fn sobolev_norm_in<T: Real>(field: &DiscreteField<T>, req: &NormRequest<T>, how: Frame<T>) -> Result<T> {
    req.validate()?;
    let mask = req.region.mask(&field.geometry);
    let spatial = |frame: usize| -> T {
        order_integrals(field, frame, req, &mask, how).into_iter().fold(T::zero(), |a, v| a + v.powf(T::one() / req.r))
    };
    match req.time {
        None => {
            if field.frames.len() != 1 {
                return Err(Error::Config("time-dependent field needs a time window".into()));
            }
            Ok(spatial(0))
        }
        Some(w) => bochner(field, w, spatial),
    }
}

fn bochner<T: Real>(field: &DiscreteField<T>, w: TimeWindow<T>, spatial: impl Fn(usize) -> T + Sync) -> Result<T> {
    let t = &field.times;
    let slack = if t.len() > 1 { (t[1] - t[0]) * lit(1e-9) } else { T::zero() };
    let inside: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= w.t0 - slack && t[i] <= w.t1 + slack).collect();
    if inside.is_empty() {
        return Err(Error::Domain("time window contains no time stamps".into()));
    }
    let vals: Vec<T> = inside.par_iter().map(|&i| spatial(i).powf(w.s)).collect();
    let mut terms = Vec::with_capacity(vals.len());
    for k in 1..inside.len() {
        let dt = t[inside[k]] - t[inside[k - 1]];
        terms.push(dt * (vals[k] + vals[k - 1]) / lit(2.0));
    }
    Ok(pairwise_sum(&terms).powf(T::one() / w.s))
}

/// `sum_{j <= l} (int |nabla^j f|^r w dv)^(1/r)`, Bochner `L^s` in time when requested.
pub fn sobolev_norm<T: Real>(field: &DiscreteField<T>, req: &NormRequest<T>) -> Result<T> {
    sobolev_norm_in(field, req, Frame::Metric)
}

/// The same norm in the chart `xi = diag(scale) x` with Lebesgue measure and plain partials.
pub fn flat_sobolev_norm<T: Real>(field: &DiscreteField<T>, req: &NormRequest<T>, scale: &Point<T>) -> Result<T> {
    sobolev_norm_in(field, req, Frame::Flat(*scale))
}

/// Quadrature volume of a region.
pub fn region_volume<T: Real>(geometry: &GridGeometry<T>, region: &Region<T>) -> T {
    let mask = region.mask(geometry);
    let terms: Vec<T> = geometry.quad.iter().zip(&mask).map(|(&q, &m)| if m { q } else { T::zero() }).collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub volume: T,
    pub holds: bool,
}

/// `||f||_{L^2(B)} <= |B|^(1/2 - 1/r) ||f||_{L^r(B)}` with one quadrature.
pub fn holder_volume_check<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    region: &Region<T>,
    r: T,
) -> Result<HolderReport<T>> {
    if !(r >= lit(2.0)) {
        return Err(Error::Domain(format!("Hölder check needs r >= 2, got {r}")));
    }
    let f = field.at(frame);
    let volume = region_volume(&field.geometry, region);
    let lhs = sobolev_norm(&f, &NormRequest::lebesgue(lit(2.0)).on(region.clone()))?;
    let lr = sobolev_norm(&f, &NormRequest::lebesgue(r).on(region.clone()))?;
    let rhs = volume.powf(lit::<T>(0.5) - T::one() / r) * lr;
    Ok(HolderReport { lhs, rhs, volume, holds: lhs <= rhs * (T::one() + lit(1e-12)) })
}

/// Diagonal of the normalized chart at `x`: `sqrt(g_ii(x))`.
pub fn chart_scale<T: Real>(chart: &Chart<T>, x: &Point<T>) -> Point<T> {
    let g = chart.metric(x);
    let mut s = [T::one(); MAX_DIM];
    for (i, v) in s.iter_mut().enumerate().take(chart.dim()) {
        *v = g[i][i].sqrt();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChartComparison<T> {
    /// `||u||_{W^{m,r}_G(B(x,R))}`.
    pub manifold_norm: T,
    /// Flat norm over the chart image of `B(x, R)`.
    pub chart_norm: T,
    /// Flat norm over `B_e(0, (1 - eps) R)`.
    pub chart_inner_norm: T,
    pub manifold_over_chart: T,
    pub chart_inner_over_manifold: T,
    /// The two ratios divided by `R^-m` (`R^(1-m)` for functions).
    pub scaled_upper: T,
    pub scaled_lower: T,
}

/// Manifold norm against the flat chart norm on the nested balls.
#[allow(clippy::too_many_arguments)]
pub fn chart_norm_comparison<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    center: &Point<T>,
    radius: T,
    m: usize,
    r: T,
    eps: T,
    variant: Variant,
) -> Result<ChartComparison<T>> {
    let f = field.at(frame);
    let chart = &field.geometry.chart;
    let scale = chart_scale(chart, center);
    let ball = Region::Ball { center: *center, radius };
    let inner = Region::ChartBall { center: *center, radius: (T::one() - eps) * radius, scale };
    let req = NormRequest::sobolev(r, m);
    let manifold_norm = sobolev_norm(&f, &req.clone().on(ball.clone()))?;
    let chart_norm = flat_sobolev_norm(&f, &req.clone().on(ball), &scale)?;
    let chart_inner_norm = flat_sobolev_norm(&f, &req.on(inner), &scale)?;
    let p = match variant {
        Variant::Sections => -(m as i32),
        Variant::Functions => 1 - m as i32,
    };
    let rm = radius.powi(p);
    let ratio = |a: T, b: T| if b == T::zero() { T::zero() } else { a / b };
    let up = ratio(manifold_norm, chart_norm);
    let lo = ratio(chart_inner_norm, manifold_norm);
    Ok(ChartComparison {
        manifold_norm,
        chart_norm,
        chart_inner_norm,
        manifold_over_chart: up,
        chart_inner_over_manifold: lo,
        scaled_upper: up / rm,
        scaled_lower: lo / rm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingReport<T> {
    pub tau: T,
    pub lhs: T,
    pub rhs: T,
    pub c_emp: T,
}

/// `c = ||u||_{L^tau(B(x,R/2))} / (R^-2m ||u||_{W^{m,rho}(B(x,R))})` with
/// `1/tau = 1/rho - m/n` (`R^(1-2m)` for functions).
pub fn sobolev_embedding_check<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    center: &Point<T>,
    radius: T,
    m: usize,
    rho: T,
    variant: Variant,
) -> Result<EmbeddingReport<T>> {
    let n = field.geometry.grid.n;
    let inv = T::one() / rho - from_usize::<T>(m) / from_usize::<T>(n);
    if !(inv > T::zero()) {
        return Err(Error::Domain(format!("embedding needs 1/rho - m/n > 0 (rho = {rho}, m = {m}, n = {n})")));
    }
    let tau = T::one() / inv;
    let f = field.at(frame);
    let half = Region::Ball { center: *center, radius: radius / lit(2.0) };
    let full = Region::Ball { center: *center, radius };
    let lhs = sobolev_norm(&f, &NormRequest::lebesgue(tau).on(half))?;
    let rhs = sobolev_norm(&f, &NormRequest::sobolev(rho, m).on(full))?;
    let p = match variant {
        Variant::Sections => -2 * m as i32,
        Variant::Functions => 1 - 2 * m as i32,
    };
    let c_emp = if rhs == T::zero() { T::zero() } else { lhs / (radius.powi(p) * rhs) };
    Ok(EmbeddingReport { tau, lhs, rhs, c_emp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Members {
    /// The cover balls `B(x, 5 r_k(x))`.
    Cover,
    /// The full balls `B(x, R_eps(x) / eta)`.
    Full,
}

fn member_balls<T: Real>(covering: &Covering<T>, members: Members) -> Vec<(Point<T>, T)> {
    covering
        .centers
        .iter()
        .enumerate()
        .map(|(i, &c)| match members {
            Members::Cover => (c, covering.cover_radii[i]),
            Members::Full => (c, covering.radii_eps[i] / from_usize(ETA as usize)),
        })
        .collect()
}

/// `(sum_j ||nabla^j f||^tau_{L^tau(M, w)})^(1/tau)`: the `l^tau` combination
/// of the Sobolev orders, under which the covering-sum equivalence has exact
/// constants.
pub fn global_norm_ltau<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    weight: &Weight<T>,
    l: usize,
    tau: T,
) -> Result<T> {
    let req = NormRequest { r: tau, order: l, weight: weight.clone(), region: Region::Whole, time: None };
    req.validate()?;
    let mask = vec![true; field.geometry.len()];
    let s = order_integrals(field, frame, &req, &mask, Frame::Metric).into_iter().fold(T::zero(), |a, b| a + b);
    Ok(s.powf(T::one() / tau))
}

/// `(sum_x R_eps(x)^(weight_exp tau) ||f||^tau_{W^{l,tau}(B_x)})^(1/tau)`
/// over covering members, with the `l^tau` combination of orders.
pub fn covering_sum_norm<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    covering: &Covering<T>,
    weight_exp: T,
    l: usize,
    tau: T,
    members: Members,
) -> Result<T> {
    let req = NormRequest { r: tau, order: l, weight: Weight::One, region: Region::Whole, time: None };
    req.validate()?;
    let geo = field.geometry.as_ref();
    let moduli = moduli_in(field, frame, l, Frame::Metric);
    let balls = member_balls(covering, members);
    let terms: Vec<T> = balls
        .par_iter()
        .zip(&covering.radii_eps)
        .map(|(&(c, rad), &re)| {
            let nodes = geo.ball_nodes(&c, rad);
            let s = moduli.iter().fold(T::zero(), |a, m| {
                let terms: Vec<T> = nodes.iter().map(|&p| geo.quad[p] * m[p].abs().powf(tau)).collect();
                a + pairwise_sum(&terms)
            });
            re.powf(weight_exp * tau) * s
        })
        .collect();
    Ok(pairwise_sum(&terms).powf(T::one() / tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport<T> {
    pub members: Members,
    pub global: T,
    pub sum: T,
    pub lower: T,
    pub upper: T,
    /// Grid nodes lying in no member ball.
    pub uncovered_nodes: usize,
    pub holds: bool,
}

/// `2^-g T^-1/tau ||f|| <= sum-norm <= 2^g T^1/tau ||f||` with global weight
/// `R^(weight_exp tau)`; `T` is the covering bound (times `2^(n k)` for the
/// full balls).
pub fn check_norm_equivalence<T: Real>(
    field: &DiscreteField<T>,
    frame: usize,
    covering: &Covering<T>,
    radius: &RadiusField<T>,
    weight_exp: T,
    l: usize,
    tau: T,
    members: Members,
) -> Result<EquivalenceReport<T>> {
    let geo = field.geometry.as_ref();
    let w = radius_weight(geo, radius, weight_exp * tau)?;
    let global = global_norm_ltau(field, frame, &w, l, tau)?;
    let sum = covering_sum_norm(field, frame, covering, weight_exp, l, tau, members)?;
    let n = geo.grid.n;
    let t = match members {
        Members::Cover => covering.t_bound,
        Members::Full => covering.t_bound * lit::<T>(2.0).powi((n as u32 * covering.k) as i32),
    };
    let two_g = lit::<T>(2.0).powf(weight_exp);
    let t_tau = t.powf(T::one() / tau);
    let lower = global / (two_g * t_tau);
    let upper = global * two_g * t_tau;
    let balls = member_balls(covering, members);
    let mut covered = vec![false; geo.len()];
    for (c, r) in balls {
        for p in geo.ball_nodes(&c, r) {
            covered[p] = true;
        }
    }
    let uncovered_nodes = covered.iter().filter(|&&c| !c).count();
    let tol = T::one() + lit(1e-9);
    Ok(EquivalenceReport {
        members,
        global,
        sum,
        lower,
        upper,
        uncovered_nodes,
        holds: uncovered_nodes == 0 && sum * tol >= lower && sum <= upper * tol,
    })
}
