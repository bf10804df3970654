//! `(m, eps)`-admissible balls and the admissible radius field.
//!
//! Each center is tested in its own normalized chart `xi = A (p - x0)` with
//! `A = diag(sqrt(g_ii(x0)))`, so that `g~(x0)` has unit diagonal. For a
//! conformal metric this is the canonical chart rescaled to be orthonormal at
//! the center; the predicate then uses
//! `g~_ij = g_ij / (a_i a_j)` and `d^beta g~_ij = d^beta g_ij / (a_i a_j prod a^beta)`.

use std::cell::OnceCell;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fmt_point, multi_indices, Chart, ChartBall, MetricChart, MultiIndex};
use crate::linalg::{point, sym_eigenvalues, Mat, Point, MAX_DIM};
use crate::scalar::{from_usize, lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityParams<T> {
    pub m: usize,
    pub eps: T,
    /// Lattice points per unit normalized-chart length used for the sup; the
    /// step shrinks further to `pilot / sample_density` where radii are small.
    pub sample_density: T,
    pub bisection_tol: T,
    /// Radii above this are not searched; reaching it sets the truncation flag.
    pub max_radius: T,
}

impl<T: Real> AdmissibilityParams<T> {
    pub fn new(m: usize, eps: T) -> Self {
        Self { m, eps, sample_density: lit(8.0), bisection_tol: lit(1e-3), max_radius: lit(2.0) }
    }

    pub fn with_density(mut self, density: T) -> Self {
        self.sample_density = density;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.bisection_tol = tol;
        self
    }

    pub fn with_max_radius(mut self, r: T) -> Self {
        self.max_radius = r;
        self
    }

    pub fn validate(&self, chart: &dyn MetricChart<T>) -> Result<()> {
        let third = T::one() / lit(3.0);
        if !(self.eps > T::zero() && self.eps <= third * (T::one() + T::epsilon())) {
            return Err(Error::Config(format!("eps = {} must lie in (0, 1/3]", self.eps)));
        }
        if !(self.sample_density >= lit(8.0)) {
            return Err(Error::Config(format!("sample_density = {} must be at least 8", self.sample_density)));
        }
        if !(self.bisection_tol > T::zero()) || !(self.max_radius > self.bisection_tol) {
            return Err(Error::Config("need 0 < bisection_tol < max_radius".into()));
        }
        if self.m == 0 || self.m > chart.max_derivative_order() {
            return Err(Error::Capability(format!(
                "m = {} unsupported for {} (1..={})",
                self.m,
                chart.name(),
                chart.max_derivative_order()
            )));
        }
        Ok(())
    }
}

/// Outcome of the admissibility predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admissibility {
    pub admissible: bool,
    /// The ball left the working box (or the embedded-ball cap) and was rejected for that reason.
    pub truncated: bool,
}

struct Probe<T> {
    p: Point<T>,
    bracket: OnceCell<(T, T)>,
    exact: OnceCell<T>,
    data: OnceCell<(bool, Vec<T>)>,
}

/// Sample lattice of one center, reused across radii so bisection touches
/// each point's distance and derivative data at most once.
struct CenterSampler<'a, T: Real> {
    chart: &'a dyn MetricChart<T>,
    center: Point<T>,
    params: AdmissibilityParams<T>,
    scale: Point<T>,
    betas: Vec<MultiIndex>,
    probes: Vec<Probe<T>>,
    lattice_radius: T,
    /// Lattice step in normalized coordinates.
    spacing: T,
    /// Upper bound for `R'`: condition 2 already fails above it at the center.
    pilot: T,
}

impl<'a, T: Real> CenterSampler<'a, T> {
    fn new(chart: &'a dyn MetricChart<T>, center: Point<T>, params: AdmissibilityParams<T>) -> Self {
        let n = chart.dim();
        let g0 = chart.metric(&center);
        let mut scale = [T::one(); MAX_DIM];
        for i in 0..n {
            scale[i] = g0[i][i].sqrt();
        }
        let betas = (1..=params.m).flat_map(|k| multi_indices(n, k)).collect();
        let mut s = Self {
            chart,
            center,
            params,
            scale,
            betas,
            probes: Vec::new(),
            lattice_radius: T::zero(),
            spacing: T::zero(),
            pilot: T::zero(),
        };
        // The lattice spacing is fixed per center so the sample sets stay
        // nested in R; it resolves the pilot radius where condition 2 fails
        // on the center alone.
        let probe = Probe { p: center, bracket: OnceCell::new(), exact: OnceCell::new(), data: OnceCell::new() };
        let (_, sups) = s.probe_data(&probe).clone();
        let cond = |r: T| {
            s.betas.iter().zip(&sups).fold(T::zero(), |acc, (b, &v)| acc + r.powi(crate::geometry::order(b) as i32) * v)
        };
        let root = |eps: T| {
            let mut pilot = params.max_radius;
            if cond(pilot) > eps {
                let (mut lo, mut hi) = (T::zero(), pilot);
                for _ in 0..60 {
                    let mid = (lo + hi) / lit(2.0);
                    if cond(mid) > eps {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                pilot = hi;
            }
            pilot
        };
        // The spacing uses the largest allowed eps so that it does not depend
        // on eps, which keeps R' monotone in eps.
        let coarse = root(T::one() / lit(3.0));
        s.pilot = root(params.eps);
        s.spacing = coarse.min(T::one()) / params.sample_density;
        s
    }

    /// Ensures the lattice covers the chart hull of `B(center, radius)`.
    fn extend(&mut self, radius: T) {
        let hull = self.chart.ball_hull(&self.center, radius);
        let reach = hull.radius + crate::linalg::dist(&hull.center, &self.center, self.chart.dim());
        if reach <= self.lattice_radius {
            return;
        }
        // Grow geometrically so bisection rebuilds at most a few times.
        let reach = if self.lattice_radius > T::zero() { reach.max(self.lattice_radius * lit(1.5)) } else { reach };
        let n = self.chart.dim();
        let h = self.spacing;
        let mut counts = [0i64; MAX_DIM];
        for i in 0..n {
            counts[i] = (reach * self.scale[i] / h).ceil().to_i64().unwrap_or(0);
        }
        let mut probes = Vec::new();
        let mut idx = [0i64; MAX_DIM];
        for i in 0..n {
            idx[i] = -counts[i];
        }
        loop {
            let mut p = self.center;
            let mut r2 = T::zero();
            for i in 0..n {
                let off = lit::<T>(idx[i] as f64) * h / self.scale[i];
                p[i] = p[i] + off;
                r2 = r2 + off * off;
            }
            if r2 <= reach * reach {
                probes.push(Probe { p, bracket: OnceCell::new(), exact: OnceCell::new(), data: OnceCell::new() });
            }
            let mut axis = 0;
            loop {
                if axis == n {
                    self.probes = probes;
                    self.lattice_radius = reach;
                    return;
                }
                idx[axis] += 1;
                if idx[axis] > counts[axis] {
                    idx[axis] = -counts[axis];
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }

    fn inside(&self, probe: &Probe<T>, radius: T, hull: &ChartBall<T>) -> bool {
        let e = crate::linalg::dist(&probe.p, &hull.center, self.chart.dim());
        if e > hull.radius * (T::one() + lit(1e-9)) {
            return false;
        }
        let (lo, hi) = *probe.bracket.get_or_init(|| self.chart.distance_bounds(&self.center, &probe.p));
        if hi <= radius {
            return true;
        }
        if lo > radius {
            return false;
        }
        *probe.exact.get_or_init(|| self.chart.distance(&self.center, &probe.p)) <= radius
    }

    fn probe_data<'p>(&self, probe: &'p Probe<T>) -> &'p (bool, Vec<T>) {
        probe.data.get_or_init(|| {
            let n = self.chart.dim();
            let a = &self.scale;
            let g = self.chart.metric(&probe.p);
            let mut gt: Mat<T> = g;
            for i in 0..n {
                for j in 0..n {
                    gt[i][j] = g[i][j] / (a[i] * a[j]);
                }
            }
            let ev = sym_eigenvalues(&gt, n);
            let eps = self.params.eps;
            let band = ev[0] >= T::one() - eps && ev[n - 1] <= T::one() + eps;
            let sups = self
                .betas
                .iter()
                .map(|beta| {
                    let d = self.chart.metric_derivative(&probe.p, beta);
                    let mut chain = T::one();
                    for k in 0..n {
                        chain = chain * a[k].powi(beta[k] as i32);
                    }
                    let mut s = T::zero();
                    for i in 0..n {
                        for j in 0..n {
                            s = s.max((d[i][j] / (a[i] * a[j] * chain)).abs());
                        }
                    }
                    s
                })
                .collect();
            (band, sups)
        })
    }

    fn test(&mut self, radius: T) -> Admissibility {
        let hull = self.chart.ball_hull(&self.center, radius);
        let outside = !self.chart.domain().contains_ball(&hull, self.chart.safety_margin())
            || self.chart.injectivity_cap().is_some_and(|c| radius > c);
        if outside {
            return Admissibility { admissible: false, truncated: true };
        }
        self.extend(radius);
        let mut sups = vec![T::zero(); self.betas.len()];
        for probe in &self.probes {
            if !self.inside(probe, radius, &hull) {
                continue;
            }
            let (band, s) = self.probe_data(probe);
            if !band {
                return Admissibility { admissible: false, truncated: false };
            }
            for (acc, &v) in sups.iter_mut().zip(s) {
                *acc = acc.max(v);
            }
        }
        let total = self
            .betas
            .iter()
            .zip(&sups)
            .fold(T::zero(), |acc, (beta, &s)| acc + radius.powi(crate::geometry::order(beta) as i32) * s);
        Admissibility { admissible: total <= self.params.eps, truncated: false }
    }
}

/// Both admissibility conditions on the lattice of spacing `1 / sample_density`.
pub fn check_admissible<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    params: &AdmissibilityParams<T>,
) -> Admissibility {
    if !chart.contains(center) {
        return Admissibility { admissible: false, truncated: true };
    }
    CenterSampler::new(chart, *center, *params).test(radius)
}

pub fn is_admissible<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    params: &AdmissibilityParams<T>,
) -> bool {
    check_admissible(chart, center, radius, params).admissible
}

/// Largest radius whose chart hull fits the box margin, capped by `max_radius`
/// and the embedded-ball cap.
pub fn domain_cap<T: Real>(chart: &dyn MetricChart<T>, center: &Point<T>, max_radius: T) -> T {
    let mut cap = max_radius;
    if let Some(c) = chart.injectivity_cap() {
        cap = cap.min(c);
    }
    let fits = |r: T| chart.domain().contains_ball(&chart.ball_hull(center, r), chart.safety_margin());
    if fits(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (T::zero(), cap);
    for _ in 0..60 {
        let mid = (lo + hi) / lit(2.0);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusSample<T> {
    pub point: Point<T>,
    pub r_prime: T,
    pub r_eps: T,
    /// `R'` hit the domain cap, so the true sup may be larger.
    pub truncated: bool,
    pub iterations: usize,
    /// No admissible radius above the bisection tolerance; radii are zero.
    pub degenerate: bool,
}

impl<T: Real> RadiusSample<T> {
    /// Usable as a lower bound for the true radius: not degenerate, and
    /// either untruncated or truncated only once `R_eps` already reached 1.
    pub fn reliable(&self) -> bool {
        !self.degenerate && (!self.truncated || self.r_prime >= lit(2.0))
    }
}

/// Bracketing plus bisection on the monotone predicate.
pub fn admissible_radius<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    params: &AdmissibilityParams<T>,
) -> Result<RadiusSample<T>> {
    params.validate(chart)?;
    if !chart.contains(center) {
        return Err(Error::Domain(format!(
            "center {} outside the {} chart",
            fmt_point(center, chart.dim()),
            chart.name()
        )));
    }
    let tol = params.bisection_tol;
    let cap = domain_cap(chart, center, params.max_radius);
    let mut sampler = CenterSampler::new(chart, *center, *params);
    let done = |r_prime: T, truncated: bool, iterations: usize| RadiusSample {
        point: *center,
        r_prime,
        r_eps: T::one().min(r_prime / lit(2.0)),
        truncated,
        iterations,
        degenerate: false,
    };
    if cap < tol {
        return Err(Error::Degenerate { at: fmt_point(center, chart.dim()), tol: to_f64(tol) });
    }
    let hi = if sampler.pilot < cap {
        sampler.pilot
    } else {
        if sampler.test(cap).admissible {
            return Ok(done(cap, true, 1));
        }
        cap
    };
    if !sampler.test(tol).admissible {
        return Err(Error::Degenerate { at: fmt_point(center, chart.dim()), tol: to_f64(tol) });
    }
    let (mut lo, mut hi) = (tol, hi);
    let mut iterations = 2;
    while hi - lo > tol {
        let mid = (lo + hi) / lit(2.0);
        iterations += 1;
        if sampler.test(mid).admissible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(done(lo, false, iterations))
}

/// Inclusive rectangular grid of centers, row-major with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub n: usize,
    pub lo: Point<T>,
    pub hi: Point<T>,
    pub counts: [usize; MAX_DIM],
}

impl<T: Real> GridSpec<T> {
    pub fn new(lo: &[T], hi: &[T], counts: &[usize]) -> Self {
        let n = lo.len();
        let mut c = [1usize; MAX_DIM];
        c[..n].copy_from_slice(counts);
        Self { n, lo: point(lo), hi: point(hi), counts: c }
    }

    pub fn len(&self) -> usize {
        self.counts[..self.n].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        if self.counts[axis] <= 1 {
            T::zero()
        } else {
            (self.hi[axis] - self.lo[axis]) / from_usize::<T>(self.counts[axis] - 1)
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (i, slot) in idx.iter_mut().enumerate().take(self.n) {
            *slot = flat % self.counts[i];
            flat /= self.counts[i];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut flat = 0;
        for i in (0..self.n).rev() {
            flat = flat * self.counts[i] + idx[i];
        }
        flat
    }

    pub fn node(&self, flat: usize) -> Point<T> {
        let idx = self.multi_index(flat);
        let mut p = self.lo;
        for i in 0..self.n {
            p[i] = self.lo[i] + from_usize::<T>(idx[i]) * self.spacing(i);
        }
        p
    }

    pub fn nodes(&self) -> Vec<Point<T>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

#[derive(Clone)]
pub struct RadiusField<T: Real> {
    pub chart: Chart<T>,
    pub params: AdmissibilityParams<T>,
    pub grid: GridSpec<T>,
    pub samples: Vec<RadiusSample<T>>,
}

impl<T: Real> std::fmt::Debug for RadiusField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadiusField")
            .field("chart", &self.chart.name())
            .field("params", &self.params)
            .field("grid", &self.grid)
            .field("samples", &self.samples.len())
            .finish()
    }
}

/// Evaluates [`admissible_radius`] at every grid node in parallel; degenerate
/// centers become flagged entries.
pub fn radius_field<T: Real>(
    chart: Chart<T>,
    grid: GridSpec<T>,
    params: AdmissibilityParams<T>,
) -> Result<RadiusField<T>> {
    params.validate(chart.as_ref())?;
    if grid.n != chart.dim() {
        return Err(Error::Config(format!("grid dimension {} does not match chart dimension {}", grid.n, chart.dim())));
    }
    let nodes = grid.nodes();
    let samples: Vec<Result<RadiusSample<T>>> = nodes
        .par_iter()
        .map(|x| match admissible_radius(chart.as_ref(), x, &params) {
            Err(Error::Degenerate { .. }) => Ok(RadiusSample {
                point: *x,
                r_prime: T::zero(),
                r_eps: T::zero(),
                truncated: false,
                iterations: 0,
                degenerate: true,
            }),
            other => other,
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RadiusField { chart, params, grid, samples })
}

impl<T: Real> RadiusField<T> {
    /// Multilinear interpolation of `R_eps`; `None` outside the grid or next
    /// to a degenerate node. Axes whose nodes tile a periodic domain wrap.
    pub fn interpolate(&self, x: &Point<T>) -> Option<T> {
        let g = &self.grid;
        let n = g.n;
        let dom = self.chart.domain();
        let tol = lit::<T>(1e-9);
        let mut base = [0usize; MAX_DIM];
        let mut frac = [T::zero(); MAX_DIM];
        let mut wraps = [false; MAX_DIM];
        for i in 0..n {
            if g.counts[i] == 1 {
                continue;
            }
            let h = g.spacing(i);
            let last = from_usize::<T>(g.counts[i] - 1);
            let mut t = (x[i] - g.lo[i]) / h;
            wraps[i] = dom.periodic
                && (g.lo[i] - dom.lo[i]).abs() <= h * tol
                && (g.hi[i] + h - dom.hi[i]).abs() <= h * lit(1e-6);
            if wraps[i] {
                let period = last + T::one();
                t = t - (t / period).floor() * period;
                let b = t.floor().to_usize()?.min(g.counts[i] - 1);
                base[i] = b;
                frac[i] = t - from_usize(b);
                continue;
            }
            if t < -tol || t > last + tol {
                return None;
            }
            let t = t.max(T::zero()).min(last);
            let b = t.floor().to_usize()?.min(g.counts[i] - 2);
            base[i] = b;
            frac[i] = t - from_usize(b);
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << n) {
            let mut idx = base;
            let mut w = T::one();
            for i in 0..n {
                if g.counts[i] == 1 {
                    continue;
                }
                if corner >> i & 1 == 1 {
                    idx[i] += 1;
                    if wraps[i] && idx[i] == g.counts[i] {
                        idx[i] = 0;
                    }
                    w = w * frac[i];
                } else {
                    w = w * (T::one() - frac[i]);
                }
            }
            if w == T::zero() {
                continue;
            }
            let s = &self.samples[g.flat_index(&idx)];
            if s.degenerate {
                return None;
            }
            acc = acc + w * s.r_eps;
        }
        Some(acc)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.grid.n;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend(["R_prime", "R_eps", "truncated", "iterations"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.point[..n].iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", s.r_prime));
            row.push(format!("{}", s.r_eps));
            row.push(if s.truncated { "1".into() } else { "0".into() });
            row.push(s.iterations.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation<T> {
    pub i: usize,
    pub j: usize,
    pub distance: T,
    pub lhs: T,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport<T> {
    pub pairs_checked: usize,
    pub violations: Vec<Violation<T>>,
    pub tol: T,
}

impl<T> VariationReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `R(x)/2 - tol <= R(y) <= 2 R(x) + tol` for all sampled `y` with `d(x, y) <= R(x)`.
pub fn check_slow_variation<T: Real>(field: &RadiusField<T>) -> VariationReport<T> {
    let chart = field.chart.as_ref();
    let tol = field.params.bisection_tol * lit(2.0);
    let s = &field.samples;
    let rows: Vec<(usize, Vec<Violation<T>>)> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let mut count = 0;
            let mut bad = Vec::new();
            if s[i].degenerate {
                return (0, bad);
            }
            let rx = s[i].r_eps;
            for j in 0..s.len() {
                if i == j || s[j].degenerate {
                    continue;
                }
                let (lo, hi) = chart.distance_bounds(&s[i].point, &s[j].point);
                if lo > rx {
                    continue;
                }
                let d = if hi <= rx { hi } else { chart.distance(&s[i].point, &s[j].point) };
                if d > rx {
                    continue;
                }
                count += 1;
                let ry = s[j].r_eps;
                if ry < rx / lit(2.0) - tol {
                    bad.push(Violation { i, j, distance: d, lhs: ry, bound: rx / lit(2.0) - tol });
                } else if ry > rx * lit(2.0) + tol {
                    bad.push(Violation { i, j, distance: d, lhs: ry, bound: rx * lit(2.0) + tol });
                }
            }
            (count, bad)
        })
        .collect();
    let mut report = VariationReport { pairs_checked: 0, violations: Vec::new(), tol };
    for (c, b) in rows {
        report.pairs_checked += c;
        report.violations.extend(b);
    }
    report
}

/// `|R'(x) - R'(y)| <= d(x, y) + tol` over all pairs of untruncated samples.
pub fn check_lipschitz<T: Real>(field: &RadiusField<T>) -> VariationReport<T> {
    let chart = field.chart.as_ref();
    let tol = field.params.bisection_tol * lit(2.0);
    let s = &field.samples;
    let ok = |k: usize| !s[k].degenerate && !s[k].truncated;
    let rows: Vec<(usize, Vec<Violation<T>>)> = (0..s.len())
        .into_par_iter()
        .map(|i| {
            let mut count = 0;
            let mut bad = Vec::new();
            if !ok(i) {
                return (0, bad);
            }
            for j in (i + 1)..s.len() {
                if !ok(j) {
                    continue;
                }
                count += 1;
                let diff = (s[i].r_prime - s[j].r_prime).abs();
                let (lo, _) = chart.distance_bounds(&s[i].point, &s[j].point);
                if diff <= lo + tol {
                    continue;
                }
                let d = chart.distance(&s[i].point, &s[j].point);
                if diff > d + tol {
                    bad.push(Violation { i, j, distance: d, lhs: diff, bound: d + tol });
                }
            }
            (count, bad)
        })
        .collect();
    let mut report = VariationReport { pairs_checked: 0, violations: Vec::new(), tol };
    for (c, b) in rows {
        report.pairs_checked += c;
        report.violations.extend(b);
    }
    report
}

/// Minimum `R_eps` over reliable samples.
pub fn uniform_lower_bound<T: Real>(field: &RadiusField<T>) -> Option<T> {
    field.samples.iter().filter(|s| s.reliable()).map(|s| s.r_eps).reduce(T::min)
}
