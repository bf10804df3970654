//! Vitali selection and `(k, eps)`-admissible coverings with probe-counted
//! overlap certificates.

use rayon::prelude::*;
use serde::Serialize;

use crate::admissible::{is_admissible, RadiusField};
use crate::error::{Error, Result};
use crate::geometry::{fmt_point, ChartBall, CoordBox, MetricChart};
use crate::linalg::{det, dist, Point, MAX_DIM};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Dilation denominator in `r_k = 2^-k R_eps / (5 eta)`.
pub const ETA: u32 = 10;

/// Probe grids above this many points are refused.
pub const MAX_PROBES: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    pub fn new(center: Point<T>, radius: T) -> Self {
        Self { center, radius }
    }
}

fn selection_order<T: Real>(balls: &[Ball<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    // stable: equal radii keep input order
    order.sort_by(|&a, &b| balls[b].radius.partial_cmp(&balls[a].radius).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Greedy Vitali selection in decreasing-radius order (ties by index): a ball
/// is kept iff it is disjoint from every ball kept before it. Returns the
/// kept indices in ascending order.
pub fn vitali_select<T: Real, D>(balls: &[Ball<T>], distance: D) -> Vec<usize>
where
    D: Fn(&Point<T>, &Point<T>) -> T,
{
    let mut kept: Vec<usize> = Vec::new();
    for i in selection_order(balls) {
        let b = &balls[i];
        if kept.iter().all(|&j| distance(&b.center, &balls[j].center) > b.radius + balls[j].radius) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VitaliReport {
    pub disjoint: bool,
    /// Input balls with no intersecting selected ball `C` of radius at least
    /// theirs and `B` inside `5C`.
    pub uncovered: Vec<usize>,
}

impl VitaliReport {
    pub fn passed(&self) -> bool {
        self.disjoint && self.uncovered.is_empty()
    }
}

/// Brute-force check of the selection postconditions.
pub fn check_vitali<T: Real, D>(balls: &[Ball<T>], selected: &[usize], distance: D) -> VitaliReport
where
    D: Fn(&Point<T>, &Point<T>) -> T,
{
    let mut disjoint = true;
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            if distance(&balls[i].center, &balls[j].center) <= balls[i].radius + balls[j].radius {
                disjoint = false;
            }
        }
    }
    let five = lit::<T>(5.0);
    let uncovered = (0..balls.len())
        .filter(|&i| {
            let b = &balls[i];
            !selected.iter().any(|&j| {
                let c = &balls[j];
                let d = distance(&b.center, &c.center);
                d <= b.radius + c.radius && c.radius >= b.radius && d + b.radius <= five * c.radius
            })
        })
        .collect();
    VitaliReport { disjoint, uncovered }
}

/// Uniform bucket grid over a coordinate box; periodic boxes wrap indices,
/// others clamp them, so every ball lands in the buckets its hull meets.
struct CellIndex<T> {
    n: usize,
    lo: Point<T>,
    cell: Point<T>,
    counts: [usize; MAX_DIM],
    periodic: bool,
    buckets: Vec<Vec<u32>>,
}

impl<T: Real> CellIndex<T> {
    fn new(bx: &CoordBox<T>, cell_size: T) -> Self {
        let n = bx.n;
        let mut counts = [1usize; MAX_DIM];
        let mut cell = [T::one(); MAX_DIM];
        let cap = if n == 2 { 2048.0 } else { 160.0 };
        for i in 0..n {
            let w = bx.width(i);
            let c = to_f64(w / cell_size).floor().clamp(1.0, cap) as usize;
            counts[i] = c;
            cell[i] = w / from_usize(c);
        }
        let total = counts[..n].iter().product();
        Self { n, lo: bx.lo, cell, counts, periodic: bx.periodic, buckets: vec![Vec::new(); total] }
    }

    fn axis_range(&self, axis: usize, lo: T, hi: T) -> Vec<usize> {
        let c = self.counts[axis] as i64;
        let a = to_f64(((lo - self.lo[axis]) / self.cell[axis]).floor()) as i64;
        let b = to_f64(((hi - self.lo[axis]) / self.cell[axis]).floor()) as i64;
        if self.periodic {
            if b - a + 1 >= c {
                return (0..c as usize).collect();
            }
            (a..=b).map(|v| v.rem_euclid(c) as usize).collect()
        } else {
            (a.clamp(0, c - 1)..=b.clamp(0, c - 1)).map(|v| v as usize).collect()
        }
    }

    fn cells_of(&self, hull: &ChartBall<T>) -> Vec<usize> {
        let mut out = vec![0usize];
        let mut stride = 1;
        for axis in 0..self.n {
            let r = self.axis_range(axis, hull.center[axis] - hull.radius, hull.center[axis] + hull.radius);
            out = out.iter().flat_map(|&base| r.iter().map(move |&v| base + v * stride)).collect();
            stride *= self.counts[axis];
        }
        out
    }

    fn insert(&mut self, id: usize, hull: &ChartBall<T>) {
        for c in self.cells_of(hull) {
            self.buckets[c].push(id as u32);
        }
    }

    fn point_bucket(&self, p: &Point<T>) -> &[u32] {
        let c = self.cells_of(&ChartBall { center: *p, radius: T::zero() });
        &self.buckets[c[0]]
    }

    fn near(&self, hull: &ChartBall<T>) -> Vec<u32> {
        let mut ids: Vec<u32> = self.cells_of(hull).into_iter().flat_map(|c| self.buckets[c].iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// `d(x, y) > r + s`, using chart hulls and distance brackets before the exact distance.
fn balls_disjoint<T: Real>(
    chart: &dyn MetricChart<T>,
    a: &Ball<T>,
    ha: &ChartBall<T>,
    b: &Ball<T>,
    hb: &ChartBall<T>,
) -> bool {
    let n = chart.dim();
    let reach = a.radius + b.radius;
    if !chart.domain().periodic && dist(&ha.center, &hb.center, n) > ha.radius + hb.radius {
        return true;
    }
    let (lo, hi) = chart.distance_bounds(&a.center, &b.center);
    if lo > reach {
        return true;
    }
    if hi <= reach {
        return false;
    }
    chart.distance(&a.center, &b.center) > reach
}

fn contains<T: Real>(chart: &dyn MetricChart<T>, b: &Ball<T>, hull: &ChartBall<T>, p: &Point<T>) -> bool {
    if !chart.domain().periodic && dist(&hull.center, p, chart.dim()) > hull.radius * (T::one() + lit(1e-9)) {
        return false;
    }
    chart.in_ball(&b.center, b.radius, p)
}

/// Same selection as [`vitali_select`] with the chart's geodesic distance,
/// accelerated by a bucket grid over chart hulls.
pub fn vitali_select_in<T: Real>(chart: &dyn MetricChart<T>, balls: &[Ball<T>]) -> Vec<usize> {
    if balls.is_empty() {
        return Vec::new();
    }
    let hulls: Vec<ChartBall<T>> = balls.iter().map(|b| chart.ball_hull(&b.center, b.radius)).collect();
    let bx = index_box(chart, &hulls);
    let widest = hulls.iter().fold(T::zero(), |m, h| m.max(h.radius));
    let mut index = CellIndex::new(&bx, widest * lit(2.0));
    let mut kept = Vec::new();
    for i in selection_order(balls) {
        let free = index.near(&hulls[i]).into_iter().all(|j| {
            let j = j as usize;
            balls_disjoint(chart, &balls[i], &hulls[i], &balls[j], &hulls[j])
        });
        if free {
            index.insert(i, &hulls[i]);
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Box the bucket grid lives on: the chart's period cell when it wraps,
/// otherwise the bounding box of the hulls.
fn index_box<T: Real>(chart: &dyn MetricChart<T>, hulls: &[ChartBall<T>]) -> CoordBox<T> {
    let n = chart.dim();
    if chart.domain().periodic {
        return chart.domain().clone();
    }
    let mut lo = hulls[0].center;
    let mut hi = hulls[0].center;
    for h in hulls {
        for i in 0..n {
            lo[i] = lo[i].min(h.center[i] - h.radius);
            hi[i] = hi[i].max(h.center[i] + h.radius);
        }
    }
    for i in 0..n {
        if !(hi[i] > lo[i]) {
            hi[i] = lo[i] + T::one();
        }
    }
    CoordBox::new(n, lo, hi)
}

/// `((1 + eps) / (1 - eps))^(n/2) * 100^n`.
pub fn overlap_bound<T: Real>(eps: T, n: usize) -> T {
    ((T::one() + eps) / (T::one() - eps)).powf(lit(n as f64 / 2.0)) * lit::<T>(100.0).powi(n as i32)
}

/// Inclusive lattice over a working box in chart coordinates; on a periodic
/// axis spanning the whole period the upper face is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lattice<T> {
    pub n: usize,
    pub lo: Point<T>,
    pub step: Point<T>,
    pub counts: [usize; MAX_DIM],
}

impl<T: Real> Lattice<T> {
    fn over(chart: &dyn MetricChart<T>, lo: &Point<T>, hi: &Point<T>, spacing: T) -> Self {
        let n = chart.dim();
        let dom = chart.domain();
        let mut step = [T::zero(); MAX_DIM];
        let mut counts = [1usize; MAX_DIM];
        for i in 0..n {
            let w = hi[i] - lo[i];
            let cells = to_f64(w / spacing).ceil().max(1.0) as usize;
            let wraps = dom.periodic && (w - dom.width(i)).abs() <= dom.width(i) * lit(1e-9);
            step[i] = w / from_usize(cells);
            counts[i] = if wraps { cells } else { cells + 1 };
        }
        Self { n, lo: *lo, step, counts }
    }

    pub fn len(&self) -> usize {
        self.counts[..self.n].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, mut flat: usize) -> Point<T> {
        let mut p = self.lo;
        for i in 0..self.n {
            p[i] = self.lo[i] + from_usize::<T>(flat % self.counts[i]) * self.step[i];
            flat /= self.counts[i];
        }
        p
    }

    fn cell_volume(&self) -> T {
        self.step[..self.n].iter().fold(T::one(), |a, &s| a * s)
    }
}

/// A `(k, eps)`-admissible covering: the Vitali core `D_k` with radii
/// `r_k(x) = 2^-k R_eps(x) / (5 eta)` and the cover balls `B(x, 5 r_k(x))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covering<T> {
    pub k: u32,
    pub eta: u32,
    pub eps: T,
    pub n: usize,
    pub centers: Vec<Point<T>>,
    /// `R_eps` at each center, interpolated from the radius field.
    pub radii_eps: Vec<T>,
    pub core_radii: Vec<T>,
    pub cover_radii: Vec<T>,
    /// Candidate balls the selection ran over.
    pub candidates: usize,
    pub probes: Lattice<T>,
    /// Largest number of cover balls containing a probe.
    pub overlap: usize,
    /// `sum_j int_{B_j} 1 / vol(box)` by probe quadrature.
    pub mean_overlap: T,
    pub t_bound: T,
    pub disjoint: bool,
}

#[derive(Serialize)]
struct CoveringJson {
    k: u32,
    eta: u32,
    eps: f64,
    centers: Vec<Vec<f64>>,
    core_radii: Vec<f64>,
    cover_radii: Vec<f64>,
    overlap: usize,
    #[serde(rename = "T_bound")]
    t_bound: f64,
}

impl<T: Real> Covering<T> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.disjoint && from_usize::<T>(self.overlap) <= self.t_bound && self.mean_overlap <= self.t_bound
    }

    pub fn to_json(&self) -> serde_json::Value {
        let f = |v: &[T]| v.iter().map(|&x| to_f64(x)).collect::<Vec<_>>();
        let j = CoveringJson {
            k: self.k,
            eta: self.eta,
            eps: to_f64(self.eps),
            centers: self.centers.iter().map(|c| f(&c[..self.n])).collect(),
            core_radii: f(&self.core_radii),
            cover_radii: f(&self.cover_radii),
            overlap: self.overlap,
            t_bound: to_f64(self.t_bound),
        };
        serde_json::to_value(j).expect("covering serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveringOptions<T> {
    /// Candidate lattice step; by default small enough that each probe lies
    /// within `3 r_k` of a candidate.
    pub candidate_spacing: Option<T>,
    /// Probe step; by default a quarter of the smallest cover footprint.
    pub probe_spacing: Option<T>,
}

impl<T> Default for CoveringOptions<T> {
    fn default() -> Self {
        Self { candidate_spacing: None, probe_spacing: None }
    }
}

fn core_radius<T: Real>(r_eps: T, k: u32) -> T {
    r_eps / (lit::<T>(2.0).powi(k as i32) * lit(5.0 * ETA as f64))
}

fn working_box<T: Real>(field: &RadiusField<T>) -> (Point<T>, Point<T>) {
    let g = &field.grid;
    let dom = field.chart.domain();
    let mut hi = g.hi;
    if dom.periodic {
        // a periodic field grid usually stops one step short of the period
        for i in 0..g.n {
            if (g.lo[i] - dom.lo[i]).abs() <= dom.width(i) * lit(1e-9)
                && dom.hi[i] - g.hi[i] <= g.spacing(i) * (T::one() + lit(1e-9))
            {
                hi[i] = dom.hi[i];
            }
        }
    }
    (g.lo, hi)
}

pub fn build_admissible_covering<T: Real>(field: &RadiusField<T>, k: u32) -> Result<Covering<T>> {
    build_admissible_covering_with(field, k, &CoveringOptions::default())
}

/// Candidates on a lattice over the field's grid box, radii interpolated
/// from the field, Vitali-selected; then cores are re-checked for
/// disjointness and a probe grid certifies coverage and overlap.
pub fn build_admissible_covering_with<T: Real>(
    field: &RadiusField<T>,
    k: u32,
    opts: &CoveringOptions<T>,
) -> Result<Covering<T>> {
    let chart = field.chart.as_ref();
    let n = chart.dim();
    let (lo, hi) = working_box(field);
    let good: Vec<_> = field.samples.iter().filter(|s| !s.degenerate).collect();
    if good.is_empty() {
        return Err(Error::Coverage("radius field has no usable samples".into()));
    }
    let root_n = from_usize::<T>(n).sqrt();
    let cand_step = opts.candidate_spacing.unwrap_or_else(|| {
        let m = good
            .iter()
            .map(|s| chart.ball_inner_radius(&s.point, lit::<T>(3.0) * core_radius(s.r_eps, k)))
            .fold(T::infinity(), |a, b| a.min(b));
        lit::<T>(1.8) * m / root_n
    });
    let cand_lattice = Lattice::over(chart, &lo, &hi, cand_step);
    if cand_lattice.len() > MAX_PROBES {
        return Err(Error::Config(format!(
            "{} covering candidates exceed the limit; shrink the working box",
            cand_lattice.len()
        )));
    }
    let cand: Vec<(Point<T>, T)> = (0..cand_lattice.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = cand_lattice.node(i);
            field.interpolate(&x).filter(|r| *r > T::zero()).map(|r| (x, r))
        })
        .collect();
    let balls: Vec<Ball<T>> = cand.iter().map(|&(x, r)| Ball::new(x, core_radius(r, k))).collect();
    let selected = vitali_select_in(chart, &balls);

    let centers: Vec<Point<T>> = selected.iter().map(|&i| cand[i].0).collect();
    let radii_eps: Vec<T> = selected.iter().map(|&i| cand[i].1).collect();
    let core_radii: Vec<T> = selected.iter().map(|&i| balls[i].radius).collect();
    let cover_radii: Vec<T> = core_radii.iter().map(|&r| r * lit(5.0)).collect();

    let cores: Vec<Ball<T>> = selected.iter().map(|&i| balls[i]).collect();
    let disjoint = pairwise_disjoint(chart, &cores);

    let covers: Vec<Ball<T>> = centers.iter().zip(&cover_radii).map(|(&c, &r)| Ball::new(c, r)).collect();
    let probe_step = opts.probe_spacing.unwrap_or_else(|| {
        covers.iter().map(|b| chart.ball_inner_radius(&b.center, b.radius)).fold(T::infinity(), |a, b| a.min(b))
            / lit(4.0)
    });
    let probes = Lattice::over(chart, &lo, &hi, probe_step);
    let counts = probe_counts(chart, &covers, &probes)?;
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Coverage(format!(
            "probe {} is not covered at level {k}; densify the radius field grid or the candidate lattice",
            fmt_point(&probes.node(i), n)
        )));
    }
    let overlap = counts.iter().copied().max().unwrap_or(0);
    let mean_overlap = weighted_mean(chart, &probes, &counts);
    Ok(Covering {
        k,
        eta: ETA,
        eps: field.params.eps,
        n,
        centers,
        radii_eps,
        core_radii,
        cover_radii,
        candidates: balls.len(),
        probes,
        overlap,
        mean_overlap,
        t_bound: overlap_bound(field.params.eps, n),
        disjoint,
    })
}

fn pairwise_disjoint<T: Real>(chart: &dyn MetricChart<T>, balls: &[Ball<T>]) -> bool {
    if balls.len() < 2 {
        return true;
    }
    let hulls: Vec<ChartBall<T>> = balls.iter().map(|b| chart.ball_hull(&b.center, b.radius)).collect();
    let bx = index_box(chart, &hulls);
    let widest = hulls.iter().fold(T::zero(), |m, h| m.max(h.radius));
    let mut index = CellIndex::new(&bx, widest * lit(2.0));
    for (i, h) in hulls.iter().enumerate() {
        index.insert(i, h);
    }
    (0..balls.len()).into_par_iter().all(|i| {
        index.near(&hulls[i]).into_iter().filter(|&j| j as usize > i).all(|j| {
            let j = j as usize;
            balls_disjoint(chart, &balls[i], &hulls[i], &balls[j], &hulls[j])
        })
    })
}

/// Number of balls containing each probe, in probe order.
fn probe_counts<T: Real>(chart: &dyn MetricChart<T>, balls: &[Ball<T>], probes: &Lattice<T>) -> Result<Vec<usize>> {
    if probes.len() > MAX_PROBES {
        return Err(Error::Config(format!("{} probes exceed the limit; shrink the working box", probes.len())));
    }
    if balls.is_empty() {
        return Ok(vec![0; probes.len()]);
    }
    let hulls: Vec<ChartBall<T>> = balls.iter().map(|b| chart.ball_hull(&b.center, b.radius)).collect();
    let bx = index_box(chart, &hulls);
    let widest = hulls.iter().fold(T::zero(), |m, h| m.max(h.radius));
    let mut index = CellIndex::new(&bx, widest);
    for (i, h) in hulls.iter().enumerate() {
        index.insert(i, h);
    }
    Ok((0..probes.len())
        .into_par_iter()
        .map(|i| {
            let p = probes.node(i);
            index
                .point_bucket(&p)
                .iter()
                .filter(|&&j| contains(chart, &balls[j as usize], &hulls[j as usize], &p))
                .count()
        })
        .collect())
}

/// Volume-weighted mean of probe counts over the probe lattice.
fn weighted_mean<T: Real>(chart: &dyn MetricChart<T>, probes: &Lattice<T>, counts: &[usize]) -> T {
    let n = chart.dim();
    let cell = probes.cell_volume();
    let (num, den): (Vec<T>, Vec<T>) = (0..probes.len())
        .into_par_iter()
        .map(|i| {
            let w = det(&chart.metric(&probes.node(i)), n).sqrt() * cell;
            (w * from_usize(counts[i]), w)
        })
        .unzip();
    crate::scalar::pairwise_sum(&num) / crate::scalar::pairwise_sum(&den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilatedOverlapReport<T> {
    pub k: u32,
    pub overlap: usize,
    pub bound: T,
    pub probes: usize,
}

impl<T: Real> DilatedOverlapReport<T> {
    pub fn passed(&self) -> bool {
        from_usize::<T>(self.overlap) <= self.bound
    }
}

/// Probe-counted overlap of the full-size balls `B(x, R_eps(x) / eta)`,
/// `x` in `D_k`, against `T 2^(n k)`.
pub fn certify_dilated_overlap<T: Real>(
    covering: &Covering<T>,
    field: &RadiusField<T>,
) -> Result<DilatedOverlapReport<T>> {
    let chart = field.chart.as_ref();
    let n = covering.n;
    let balls: Vec<Ball<T>> = covering
        .centers
        .iter()
        .zip(&covering.radii_eps)
        .map(|(&c, &r)| Ball::new(c, r / from_usize(ETA as usize)))
        .collect();
    let (lo, hi) = working_box(field);
    let step = balls.iter().map(|b| chart.ball_inner_radius(&b.center, b.radius)).fold(T::infinity(), |a, b| a.min(b))
        / lit(4.0);
    let probes = Lattice::over(chart, &lo, &hi, step);
    let counts = probe_counts(chart, &balls, &probes)?;
    Ok(DilatedOverlapReport {
        k: covering.k,
        overlap: counts.into_iter().max().unwrap_or(0),
        bound: covering.t_bound * lit::<T>(2.0).powi((n as u32 * covering.k) as i32),
        probes: probes.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TowerLevel<T> {
    pub j: u32,
    pub radius: T,
    pub admissible: bool,
}

/// The dyadic tower `B(x, 2^-j R~(x))`, `j = 0..=k`, with `R~ = 2^k 5 r_k = R_eps / eta`,
/// each level re-tested with the field's admissibility parameters.
pub fn ball_tower<T: Real>(covering: &Covering<T>, index: usize, field: &RadiusField<T>) -> Result<Vec<TowerLevel<T>>> {
    let center = covering.centers.get(index).ok_or_else(|| Error::Domain(format!("covering has no center {index}")))?;
    let top = covering.cover_radii[index] * lit::<T>(2.0).powi(covering.k as i32);
    Ok((0..=covering.k)
        .map(|j| {
            let radius = top / lit::<T>(2.0).powi(j as i32);
            TowerLevel { j, radius, admissible: is_admissible(field.chart.as_ref(), center, radius, &field.params) }
        })
        .collect())
}
