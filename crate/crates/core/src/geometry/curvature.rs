use rayon::prelude::*;

use super::chart::{multi_indices, ChartBall, MetricChart, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, det, gauss_legendre_unit, inverse, matmul, max_abs, sym_eigenvalues, zero_mat, Mat, Point, MAX_DIM,
};
use crate::scalar::{from_usize, lit, pairwise_sum, Real};

/// `gamma[i][k][j] = Gamma^i_{kj}`.
pub type Christoffel<T> = [[[T; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// `d[m][i][k][j] = \partial_m Gamma^i_{kj}`.
pub type ChristoffelDerivative<T> = [Christoffel<T>; MAX_DIM];

fn unit(axis: usize) -> MultiIndex {
    let mut b = [0u8; MAX_DIM];
    b[axis] = 1;
    b
}

fn pair(a: usize, b: usize) -> MultiIndex {
    let mut m = [0u8; MAX_DIM];
    m[a] += 1;
    m[b] += 1;
    m
}

pub(crate) fn fmt_point<T: Real>(x: &Point<T>, n: usize) -> String {
    let v: Vec<String> = x[..n].iter().map(|c| format!("{c}")).collect();
    format!("({})", v.join(", "))
}

fn check_point<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>) -> Result<()> {
    if chart.contains(x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{} outside the {} chart", fmt_point(x, chart.dim()), chart.name())))
    }
}

fn metric_inverse<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>) -> Result<Mat<T>> {
    inverse(&chart.metric(x), chart.dim())
        .ok_or_else(|| Error::Numerical(format!("singular metric at {}", fmt_point(x, chart.dim()))))
}

fn christoffel_from<T: Real>(n: usize, ginv: &Mat<T>, dg: &[Mat<T>; MAX_DIM]) -> Christoffel<T> {
    let half = lit::<T>(0.5);
    let mut gamma = [[[T::zero(); MAX_DIM]; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for l in 0..n {
                    s = s + ginv[i][l] * (dg[j][k][l] + dg[k][l][j] - dg[l][j][k]);
                }
                gamma[i][k][j] = half * s;
            }
        }
    }
    gamma
}

/// Levi-Civita Christoffel symbols from the analytic first derivatives of `g`.
pub fn christoffel<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>) -> Result<Christoffel<T>> {
    check_point(chart, x)?;
    let n = chart.dim();
    let ginv = metric_inverse(chart, x)?;
    let mut dg = [zero_mat(); MAX_DIM];
    for (l, d) in dg.iter_mut().enumerate().take(n) {
        *d = chart.metric_derivative(x, &unit(l));
    }
    Ok(christoffel_from(n, &ginv, &dg))
}

/// First derivatives of the Christoffel symbols, analytic in the second metric derivatives.
pub fn christoffel_derivative<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>) -> Result<ChristoffelDerivative<T>> {
    check_point(chart, x)?;
    if chart.max_derivative_order() < 2 {
        return Err(Error::Capability(format!("{} lacks second metric derivatives", chart.name())));
    }
    let n = chart.dim();
    let ginv = metric_inverse(chart, x)?;
    let mut dg = [zero_mat(); MAX_DIM];
    for (l, d) in dg.iter_mut().enumerate().take(n) {
        *d = chart.metric_derivative(x, &unit(l));
    }
    let half = lit::<T>(0.5);
    let mut out = [[[[T::zero(); MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for m in 0..n {
        // d_m g^{-1} = -g^{-1} (d_m g) g^{-1}
        let t = matmul(&ginv, &dg[m], n);
        let dginv = matmul(&t, &ginv, n);
        let mut ddg = [zero_mat(); MAX_DIM];
        for (l, d) in ddg.iter_mut().enumerate().take(n) {
            *d = chart.metric_derivative(x, &pair(m, l));
        }
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        let bracket = dg[j][k][l] + dg[k][l][j] - dg[l][j][k];
                        let dbracket = ddg[j][k][l] + ddg[k][l][j] - ddg[l][j][k];
                        s = s - dginv[i][l] * bracket + ginv[i][l] * dbracket;
                    }
                    out[m][i][k][j] = half * s;
                }
            }
        }
    }
    Ok(out)
}

const FD_STEP: f64 = 1e-4;

/// Second derivatives `dd[a][b] = \partial_a \partial_b Gamma` by central
/// differences (step `1e-4`) of the analytic first derivatives.
pub fn christoffel_second_derivative<T: Real>(
    chart: &dyn MetricChart<T>,
    x: &Point<T>,
) -> Result<[ChristoffelDerivative<T>; MAX_DIM]> {
    let n = chart.dim();
    let h = lit::<T>(FD_STEP);
    let mut out = [[[[[T::zero(); MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for a in 0..n {
        let mut xp = *x;
        let mut xm = *x;
        xp[a] = xp[a] + h;
        xm[a] = xm[a] - h;
        let dp = christoffel_derivative(chart, &xp)?;
        let dm = christoffel_derivative(chart, &xm)?;
        for b in 0..n {
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        out[a][b][i][k][j] = (dp[b][i][k][j] - dm[b][i][k][j]) / (h + h);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Ricci tensor `R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik`.
pub fn ricci<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>) -> Result<Mat<T>> {
    let n = chart.dim();
    let g = christoffel(chart, x)?;
    let dg = christoffel_derivative(chart, x)?;
    let mut rc = zero_mat();
    for i in 0..n {
        for j in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                s = s + dg[k][k][i][j] - dg[j][k][i][k];
                for l in 0..n {
                    s = s + g[k][k][l] * g[l][i][j] - g[k][j][l] * g[l][i][k];
                }
            }
            rc[i][j] = s;
        }
    }
    Ok(rc)
}

/// Pointwise operator norm of a symmetric 2-tensor measured in the metric `g`.
pub fn operator_norm_in_metric<T: Real>(tensor: &Mat<T>, g: &Mat<T>, n: usize) -> Result<T> {
    let l = cholesky(g, n).ok_or_else(|| Error::Numerical("metric not positive definite".into()))?;
    let li = inverse(&l, n).ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut lit_ = zero_mat();
    for i in 0..n {
        for j in 0..n {
            lit_[i][j] = li[j][i];
        }
    }
    let m = matmul(&matmul(&li, tensor, n), &lit_, n);
    let ev = sym_eigenvalues(&m, n);
    Ok(ev.iter().fold(T::zero(), |a, v| a.max(v.abs())))
}

#[derive(Debug, Clone)]
pub struct RicciField<T> {
    pub points: Vec<Point<T>>,
    pub ricci: Vec<Mat<T>>,
    pub sup_norm_estimate: T,
}

pub fn ricci_field<T: Real>(chart: &dyn MetricChart<T>, points: &[Point<T>]) -> Result<RicciField<T>> {
    let n = chart.dim();
    let rows: Vec<Result<(Mat<T>, T)>> = points
        .par_iter()
        .map(|x| {
            let rc = ricci(chart, x)?;
            let nrm = operator_norm_in_metric(&rc, &chart.metric(x), n)?;
            Ok((rc, nrm))
        })
        .collect();
    let mut ricci = Vec::with_capacity(points.len());
    let mut sup = T::zero();
    for r in rows {
        let (rc, nrm) = r?;
        ricci.push(rc);
        sup = sup.max(nrm);
    }
    Ok(RicciField { points: points.to_vec(), ricci, sup_norm_estimate: sup })
}

// ---------------------------------------------------------------------------

/// Lattice points of spacing `h` inside the geodesic ball, clipped to its chart hull.
pub fn ball_lattice<T: Real>(chart: &dyn MetricChart<T>, center: &Point<T>, radius: T, h: T) -> Vec<Point<T>> {
    let n = chart.dim();
    let hull = chart.ball_hull(center, radius);
    let k = (hull.radius / h).ceil().to_i64().unwrap_or(0);
    let side = (2 * k + 1) as usize;
    let total = side.pow(n as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut p = hull.center;
        let mut rem = idx;
        for c in p.iter_mut().take(n) {
            let off = (rem % side) as i64 - k;
            rem /= side;
            *c = *c + lit::<T>(off as f64) * h;
        }
        if chart.contains(&p) && chart.in_ball(center, radius, &p) {
            out.push(p);
        }
    }
    if out.is_empty() {
        out.push(*center);
    }
    out
}

#[derive(Debug, Clone)]
pub struct CmtReport<T> {
    pub holds: bool,
    pub witness_constant: T,
    /// Largest `|d^{k-1} Gamma| / sum_{|beta| <= k} |d^beta g|` per `k = 1..=m`.
    pub per_order: Vec<T>,
    pub samples: usize,
    pub eps: T,
}

fn cmt_ratio_at<T: Real>(chart: &dyn MetricChart<T>, x: &Point<T>, m: usize) -> Result<Vec<T>> {
    let n = chart.dim();
    let mut derivs: Vec<T> = Vec::with_capacity(m + 1);
    for ord in 0..=m {
        let s =
            multi_indices(n, ord).iter().map(|b| max_abs(&chart.metric_derivative(x, b), n)).fold(T::zero(), T::max);
        derivs.push(s);
    }
    let mut out = Vec::with_capacity(m);
    let flat_max = |c: &Christoffel<T>| {
        let mut v = T::zero();
        for a in c.iter().take(n) {
            for b in a.iter().take(n) {
                for &e in b.iter().take(n) {
                    v = v.max(e.abs());
                }
            }
        }
        v
    };
    for k in 1..=m {
        let lhs = match k {
            1 => flat_max(&christoffel(chart, x)?),
            2 => christoffel_derivative(chart, x)?.iter().take(n).map(&flat_max).fold(T::zero(), T::max),
            3 => christoffel_second_derivative(chart, x)?
                .iter()
                .take(n)
                .flat_map(|d| d.iter().take(n).map(&flat_max))
                .fold(T::zero(), T::max),
            _ => unreachable!(),
        };
        let rhs: T = derivs[..=k].iter().copied().fold(T::zero(), |a, b| a + b);
        out.push(if lhs == T::zero() { T::zero() } else { lhs / rhs });
    }
    Ok(out)
}

/// Smallest `C` with `|d^{k-1} Gamma| <= C sum_{|beta|<=k} |d^beta g|` over a
/// sample lattice of the ball, for every `k <= m`.
pub fn cmt_bound_check<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    m: usize,
    eps: T,
) -> Result<CmtReport<T>> {
    cmt_bound_check_with(chart, center, radius, m, eps, 8)
}

pub fn cmt_bound_check_with<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    m: usize,
    eps: T,
    samples_per_radius: usize,
) -> Result<CmtReport<T>> {
    if m == 0 || m > chart.max_derivative_order() {
        return Err(Error::Capability(format!(
            "derivative order {m} not available for {} (supported 1..={})",
            chart.name(),
            chart.max_derivative_order()
        )));
    }
    let hull = chart.ball_hull(center, radius);
    if !chart.domain().contains_ball(&hull, chart.safety_margin()) {
        return Err(Error::Domain(format!("ball of radius {radius} exits the {} box", chart.name())));
    }
    let h = radius / from_usize::<T>(samples_per_radius.max(1));
    let pts = ball_lattice(chart, center, radius, h);
    let rows: Vec<Result<Vec<T>>> = pts.par_iter().map(|x| cmt_ratio_at(chart, x, m)).collect();
    let mut per_order = vec![T::zero(); m];
    for r in rows {
        for (acc, v) in per_order.iter_mut().zip(r?) {
            *acc = acc.max(v);
        }
    }
    let c = per_order.iter().copied().fold(T::zero(), T::max);
    Ok(CmtReport { holds: c.is_finite(), witness_constant: c, per_order, samples: pts.len(), eps })
}

// ---------------------------------------------------------------------------

const CHORD_NODES: usize = 16;
const CHORD_SCAN: usize = 16;
const CHORD_ITERATIONS: usize = 40;

fn chord_runs<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    hull: &ChartBall<T>,
    column: &Point<T>,
    half: T,
) -> Vec<(T, T)> {
    let n = chart.dim();
    let last = n - 1;
    let (z0, z1) = (hull.center[last] - half, hull.center[last] + half);
    if chart.hull_is_exact() {
        return vec![(z0, z1)];
    }
    let at = |z: T| {
        let mut p = *column;
        p[last] = z;
        chart.in_ball(center, radius, &p)
    };
    let excess = |z: T| {
        let mut p = *column;
        p[last] = z;
        chart.distance(center, &p) - radius
    };
    // Illinois regula falsi on d(center, .) - radius; the distance is smooth along a chord
    let refine = |inside: T, outside: T| {
        let (mut a, mut b) = (inside, outside);
        let (mut fa, mut fb) = (excess(a).min(T::zero()), excess(b).max(T::zero()));
        let tol = (z1 - z0).abs() * T::epsilon() * lit(16.0);
        let mut side = 0i8;
        for _ in 0..CHORD_ITERATIONS {
            if (b - a).abs() <= tol || fb == fa {
                break;
            }
            let c = b - fb * (b - a) / (fb - fa);
            let fc = excess(c);
            if fc <= T::zero() {
                a = c;
                fa = fc;
                if side == -1 {
                    fb = fb / lit(2.0);
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa = fa / lit(2.0);
                }
                side = 1;
            }
            if fc == T::zero() {
                break;
            }
        }
        if fa.abs() <= fb.abs() {
            a
        } else {
            b
        }
    };
    let step = (z1 - z0) / from_usize::<T>(CHORD_SCAN);
    let zs: Vec<T> = (0..=CHORD_SCAN).map(|i| z0 + from_usize::<T>(i) * step).collect();
    let flags: Vec<bool> = zs.iter().map(|&z| at(z)).collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i <= CHORD_SCAN {
        if !flags[i] {
            i += 1;
            continue;
        }
        let start = if i == 0 { zs[0] } else { refine(zs[i], zs[i - 1]) };
        let mut j = i;
        while j < CHORD_SCAN && flags[j + 1] {
            j += 1;
        }
        let end = if j == CHORD_SCAN { zs[j] } else { refine(zs[j], zs[j + 1]) };
        runs.push((start, end));
        i = j + 1;
    }
    runs
}

/// Riemannian volume of the geodesic ball `B(center, radius)`.
///
/// Midpoint rule with `resolution` cells per axis across the chart hull on the
/// first `n - 1` axes; along the last axis the chord of the ball is located
/// (exactly for closed-form hulls, by regula falsi otherwise) and integrated by
/// Gauss-Legendre, so the result is deterministic for fixed resolution.
pub fn volume_of_ball<T: Real>(
    chart: &dyn MetricChart<T>,
    center: &Point<T>,
    radius: T,
    resolution: usize,
) -> Result<T> {
    let n = chart.dim();
    if !(radius > T::zero()) || resolution == 0 {
        return Err(Error::Domain("volume needs a positive radius and resolution".into()));
    }
    let hull = chart.ball_hull(center, radius);
    if !chart.domain().contains_ball(&hull, chart.safety_margin()) {
        return Err(Error::Domain(format!("ball of radius {radius} exits the {} box", chart.name())));
    }
    if let Some(cap) = chart.injectivity_cap() {
        if radius > cap {
            return Err(Error::Domain(format!("radius {radius} exceeds the embedded-ball cap {cap}")));
        }
    }
    let (gx, gw) = gauss_legendre_unit::<T>(CHORD_NODES);
    let h = (hull.radius + hull.radius) / from_usize::<T>(resolution);
    let columns = resolution.pow((n - 1) as u32);
    let contributions: Vec<T> = (0..columns)
        .into_par_iter()
        .map(|idx| {
            let mut p = hull.center;
            let mut rem = idx;
            let mut rho2 = T::zero();
            for c in p.iter_mut().take(n - 1) {
                let i = rem % resolution;
                rem /= resolution;
                let off = -hull.radius + (from_usize::<T>(i) + lit(0.5)) * h;
                *c = *c + off;
                rho2 = rho2 + off * off;
            }
            let r2 = hull.radius * hull.radius;
            if rho2 >= r2 {
                return T::zero();
            }
            let half = (r2 - rho2).sqrt();
            let mut total = T::zero();
            for (a, b) in chord_runs(chart, center, radius, &hull, &p, half) {
                let len = b - a;
                let mut s = T::zero();
                for (&t, &w) in gx.iter().zip(&gw) {
                    let mut q = p;
                    q[n - 1] = a + t * len;
                    s = s + w * det(&chart.metric(&q), n).sqrt();
                }
                total = total + s * len;
            }
            total
        })
        .collect();
    Ok(pairwise_sum(&contributions) * h.powi((n - 1) as i32))
}

/// Euclidean unit-ball volume `nu_n`.
pub fn unit_ball_volume<T: Real>(n: usize) -> T {
    let pi = T::PI();
    match n {
        1 => lit(2.0),
        2 => pi,
        3 => lit::<T>(4.0) / lit(3.0) * pi,
        4 => pi * pi / lit(2.0),
        _ => {
            let nf = n as f64;
            lit(std::f64::consts::PI.powf(nf / 2.0) / gamma_half(nf / 2.0 + 1.0))
        }
    }
}

fn gamma_half(x: f64) -> f64 {
    // Gamma at integers and half-integers.
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut v = std::f64::consts::PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-9 {
            v *= t;
            t += 1.0;
        }
        v
    }
}
