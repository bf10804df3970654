//! Conformally flat model charts `g = phi(x) * delta`.

use super::chart::{order, ChartBall, CoordBox, MetricChart, MultiIndex};
use crate::linalg::{dist, gauss_legendre_unit, norm, sub, zero_mat, zero_point, Mat, Point};
use crate::scalar::{from_usize, lit, Real};

fn conformal<T: Real>(n: usize, phi: T) -> Mat<T> {
    let mut g = zero_mat();
    for (i, row) in g.iter_mut().enumerate().take(n) {
        row[i] = phi;
    }
    g
}

/// Axis list of a multi-index, e.g. `[1, 2, 0]` becomes `[0, 1, 1]`.
fn axes(beta: &MultiIndex) -> Vec<usize> {
    let mut out = Vec::new();
    for (axis, &b) in beta.iter().enumerate() {
        for _ in 0..b {
            out.push(axis);
        }
    }
    out
}

fn wrap<T: Real>(d: T, period: T) -> T {
    d - (d / period).round() * period
}

/// Range of `sin` over `[u, v]`.
fn sin_range<T: Real>(u: T, v: T) -> (T, T) {
    let two_pi = T::PI() + T::PI();
    if v - u >= two_pi {
        return (-T::one(), T::one());
    }
    let (su, sv) = (u.sin(), v.sin());
    let mut lo = su.min(sv);
    let mut hi = su.max(sv);
    // Critical points pi/2 + j pi inside (u, v).
    let half_pi = T::FRAC_PI_2();
    let mut c = ((u - half_pi) / T::PI()).ceil() * T::PI() + half_pi;
    while c < v {
        let s = c.sin();
        lo = lo.min(s);
        hi = hi.max(s);
        c = c + T::PI();
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Euclidean<T> {
    n: usize,
    domain: CoordBox<T>,
}

impl<T: Real> Euclidean<T> {
    pub fn new(domain: CoordBox<T>) -> Self {
        Self { n: domain.n, domain }
    }
}

impl<T: Real> MetricChart<T> for Euclidean<T> {
    fn name(&self) -> String {
        "euclidean".into()
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &CoordBox<T> {
        &self.domain
    }
    fn metric(&self, _x: &Point<T>) -> Mat<T> {
        conformal(self.n, T::one())
    }
    fn metric_derivative(&self, _x: &Point<T>, beta: &MultiIndex) -> Mat<T> {
        if order(beta) == 0 {
            conformal(self.n, T::one())
        } else {
            zero_mat()
        }
    }
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        dist(x, y, self.n)
    }
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T> {
        ChartBall { center: *center, radius }
    }
    fn ball_inner_radius(&self, _center: &Point<T>, radius: T) -> T {
        radius
    }
}

// ---------------------------------------------------------------------------

/// Flat torus `R^n / (L Z)^n` in the fundamental box `[0, L)^n`.
#[derive(Debug, Clone)]
pub struct FlatTorus<T> {
    n: usize,
    length: T,
    domain: CoordBox<T>,
}

impl<T: Real> FlatTorus<T> {
    pub fn new(n: usize, length: T) -> Self {
        let mut hi = zero_point();
        for v in hi.iter_mut().take(n) {
            *v = length;
        }
        Self { n, length, domain: CoordBox::periodic(n, zero_point(), hi) }
    }

    pub fn length(&self) -> T {
        self.length
    }
}

impl<T: Real> MetricChart<T> for FlatTorus<T> {
    fn name(&self) -> String {
        format!("flat-torus({})", self.length)
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &CoordBox<T> {
        &self.domain
    }
    fn metric(&self, _x: &Point<T>) -> Mat<T> {
        conformal(self.n, T::one())
    }
    fn metric_derivative(&self, _x: &Point<T>, beta: &MultiIndex) -> Mat<T> {
        if order(beta) == 0 {
            conformal(self.n, T::one())
        } else {
            zero_mat()
        }
    }
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            let d = wrap(x[i] - y[i], self.length);
            s = s + d * d;
        }
        s.sqrt()
    }
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T> {
        ChartBall { center: *center, radius }
    }
    fn ball_inner_radius(&self, _center: &Point<T>, radius: T) -> T {
        radius
    }
    fn injectivity_cap(&self) -> Option<T> {
        Some(self.length / lit(2.0))
    }
}

// ---------------------------------------------------------------------------

/// Upper half space `x_n > 0` with `g = x_n^{-2} delta`.
#[derive(Debug, Clone)]
pub struct HyperbolicHalfPlane<T> {
    n: usize,
    domain: CoordBox<T>,
}

impl<T: Real> HyperbolicHalfPlane<T> {
    pub fn new(domain: CoordBox<T>) -> Self {
        assert!(domain.lo[domain.n - 1] > T::zero(), "half-plane box must have y_min > 0");
        Self { n: domain.n, domain }
    }
}

impl<T: Real> MetricChart<T> for HyperbolicHalfPlane<T> {
    fn name(&self) -> String {
        "hyperbolic-halfplane".into()
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &CoordBox<T> {
        &self.domain
    }
    fn contains(&self, x: &Point<T>) -> bool {
        x[self.n - 1] > T::zero() && self.domain.contains(x)
    }
    fn metric(&self, x: &Point<T>) -> Mat<T> {
        let y = x[self.n - 1];
        conformal(self.n, T::one() / (y * y))
    }
    fn metric_derivative(&self, x: &Point<T>, beta: &MultiIndex) -> Mat<T> {
        let last = self.n - 1;
        let k = order(beta);
        if k != beta[last] as usize {
            return zero_mat();
        }
        // d^k / dy^k  y^{-2} = (-1)^k (k+1)! y^{-2-k}
        let fact: usize = (1..=k + 1).product();
        let sign = if k.is_multiple_of(2) { T::one() } else { -T::one() };
        let y = x[last];
        conformal(self.n, sign * from_usize::<T>(fact) * y.powi(-2 - k as i32))
    }
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        let n = self.n;
        let e = dist(x, y, n);
        lit::<T>(2.0) * (e / (lit::<T>(2.0) * (x[n - 1] * y[n - 1]).sqrt())).asinh()
    }
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T> {
        let last = self.n - 1;
        let mut c = *center;
        c[last] = center[last] * radius.cosh();
        ChartBall { center: c, radius: center[last] * radius.sinh() }
    }
    fn ball_inner_radius(&self, center: &Point<T>, radius: T) -> T {
        center[self.n - 1] * (T::one() - (-radius).exp())
    }
}

// ---------------------------------------------------------------------------

/// Poincare ball `|x| < 1` with `g = 4 (1 - |x|^2)^{-2} delta`.
#[derive(Debug, Clone)]
pub struct HyperbolicBall<T> {
    n: usize,
    domain: CoordBox<T>,
}

impl<T: Real> HyperbolicBall<T> {
    pub fn new(domain: CoordBox<T>) -> Self {
        Self { n: domain.n, domain }
    }

    /// Euclidean positions `t- < t+` of the ball's extreme points along the ray through `center`.
    fn diameter(&self, center: &Point<T>, radius: T) -> (T, T) {
        let c = norm(center, self.n);
        let two = lit::<T>(2.0);
        let s0 = two * c.atanh();
        (((s0 - radius) / two).tanh(), ((s0 + radius) / two).tanh())
    }
}

impl<T: Real> MetricChart<T> for HyperbolicBall<T> {
    fn name(&self) -> String {
        "hyperbolic-ball".into()
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &CoordBox<T> {
        &self.domain
    }
    fn contains(&self, x: &Point<T>) -> bool {
        norm(x, self.n) < T::one() && self.domain.contains(x)
    }
    fn metric(&self, x: &Point<T>) -> Mat<T> {
        let s = T::one() - norm(x, self.n).powi(2);
        conformal(self.n, lit::<T>(4.0) / (s * s))
    }
    fn metric_derivative(&self, x: &Point<T>, beta: &MultiIndex) -> Mat<T> {
        let n = self.n;
        let s = T::one() - norm(x, n).powi(2);
        let f = [
            lit::<T>(4.0) / s.powi(2),
            lit::<T>(-8.0) / s.powi(3),
            lit::<T>(24.0) / s.powi(4),
            lit::<T>(-96.0) / s.powi(5),
        ];
        let d1 = |i: usize| lit::<T>(-2.0) * x[i];
        let d2 = |i: usize, j: usize| if i == j { lit::<T>(-2.0) } else { T::zero() };
        let ax = axes(beta);
        let v = match ax.len() {
            0 => f[0],
            1 => f[1] * d1(ax[0]),
            2 => {
                let (i, j) = (ax[0], ax[1]);
                f[2] * d1(i) * d1(j) + f[1] * d2(i, j)
            }
            3 => {
                let (i, j, k) = (ax[0], ax[1], ax[2]);
                f[3] * d1(i) * d1(j) * d1(k) + f[2] * (d2(i, j) * d1(k) + d2(i, k) * d1(j) + d2(j, k) * d1(i))
            }
            k => panic!("metric derivative of order {k} not available"),
        };
        conformal(n, v)
    }
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        let n = self.n;
        let sx = T::one() - norm(x, n).powi(2);
        let sy = T::one() - norm(y, n).powi(2);
        lit::<T>(2.0) * (dist(x, y, n) / (sx * sy).sqrt()).asinh()
    }
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T> {
        let n = self.n;
        let c = norm(center, n);
        let (tm, tp) = self.diameter(center, radius);
        let mid = (tm + tp) / lit(2.0);
        let mut e = zero_point();
        if c > T::zero() {
            for i in 0..n {
                e[i] = center[i] / c * mid;
            }
        }
        ChartBall { center: e, radius: (tp - tm) / lit(2.0) }
    }
    fn ball_inner_radius(&self, center: &Point<T>, radius: T) -> T {
        let c = norm(center, self.n);
        let (tm, tp) = self.diameter(center, radius);
        (tp - c).min(c - tm)
    }
}

// ---------------------------------------------------------------------------

/// `g = (1 + a sin(f x_1)) delta`, |a| < 1.
///
/// No closed-form distance exists; it is computed by Ritz minimization over
/// paths `p + t (q - p) + sum_k b_k sin(k pi t)` with certified brackets
/// used first wherever a comparison suffices.
#[derive(Debug, Clone)]
pub struct PerturbedEuclidean<T> {
    n: usize,
    a: T,
    freq: T,
    domain: CoordBox<T>,
    quad: (Vec<T>, Vec<T>),
}

const RITZ_MODES: usize = 4;
const RITZ_NODES: usize = 20;

impl<T: Real> PerturbedEuclidean<T> {
    pub fn new(a: T, freq: T, domain: CoordBox<T>) -> Self {
        assert!(a.abs() < T::one(), "perturbation amplitude must satisfy |a| < 1");
        Self { n: domain.n, a, freq, domain, quad: gauss_legendre_unit(RITZ_NODES) }
    }

    pub fn amplitude(&self) -> T {
        self.a
    }

    pub fn frequency(&self) -> T {
        self.freq
    }

    fn phi(&self, x1: T) -> T {
        T::one() + self.a * (self.freq * x1).sin()
    }

    /// Range of `phi` for `x_1` in `[u, v]`.
    pub fn phi_range(&self, u: T, v: T) -> (T, T) {
        if self.freq == T::zero() || self.a == T::zero() {
            let p = self.phi(u);
            return (p, p);
        }
        let (fu, fv) =
            if self.freq > T::zero() { (self.freq * u, self.freq * v) } else { (self.freq * v, self.freq * u) };
        let (lo, hi) = sin_range(fu, fv);
        let (p, q) = (T::one() + self.a * lo, T::one() + self.a * hi);
        (p.min(q), p.max(q))
    }

    /// Nearest periodic image of `y` relative to `x` on a periodic box.
    fn lift(&self, x: &Point<T>, y: &Point<T>) -> Point<T> {
        let mut q = *y;
        if self.domain.periodic {
            for i in 0..self.n {
                q[i] = x[i] + wrap(y[i] - x[i], self.domain.width(i));
            }
        }
        q
    }

    fn straight_length(&self, p: &Point<T>, q: &Point<T>) -> T {
        let e = dist(p, q, self.n);
        let (t, w) = &self.quad;
        let s: T = t.iter().zip(w).map(|(&t, &w)| w * self.phi(p[0] + t * (q[0] - p[0])).sqrt()).sum();
        s * e
    }

    fn normals(&self, d: &Point<T>) -> Vec<Point<T>> {
        let n = self.n;
        let len = norm(d, n);
        let u = [d[0] / len, d[1] / len, d[2] / len];
        if n == 2 {
            return vec![[-u[1], u[0], T::zero()]];
        }
        // Gram-Schmidt against the least aligned axis, then the cross product.
        let mut axis = 0;
        for i in 1..n {
            if u[i].abs() < u[axis].abs() {
                axis = i;
            }
        }
        let mut e = zero_point();
        e[axis] = T::one();
        let proj = u[axis];
        let mut v = [e[0] - proj * u[0], e[1] - proj * u[1], e[2] - proj * u[2]];
        let vl = norm(&v, 3);
        for c in v.iter_mut() {
            *c = *c / vl;
        }
        let w = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        vec![v, w]
    }

    fn path_length(&self, p: &Point<T>, d: &Point<T>, normals: &[Point<T>], b: &[T]) -> T {
        let pi = T::PI();
        let (ts, ws) = &self.quad;
        let mut total = T::zero();
        for (&t, &w) in ts.iter().zip(ws) {
            let mut x1 = p[0] + t * d[0];
            let mut vel = *d;
            for (j, nv) in normals.iter().enumerate() {
                for k in 0..RITZ_MODES {
                    let coef = b[j * RITZ_MODES + k];
                    let kp = from_usize::<T>(k + 1) * pi;
                    x1 = x1 + coef * (kp * t).sin() * nv[0];
                    let dc = coef * kp * (kp * t).cos();
                    for i in 0..self.n {
                        vel[i] = vel[i] + dc * nv[i];
                    }
                }
            }
            total = total + w * self.phi(x1).sqrt() * norm(&vel, self.n);
        }
        total
    }

    fn ritz_distance(&self, p: &Point<T>, q: &Point<T>) -> T {
        let d = sub(q, p);
        let e = norm(&d, self.n);
        if e == T::zero() {
            return T::zero();
        }
        let normals = self.normals(&d);
        let np = normals.len() * RITZ_MODES;
        let mut b = vec![T::zero(); np];
        let mut best = self.path_length(p, &d, &normals, &b);
        let h = T::epsilon().sqrt().sqrt() * e;
        let two = lit::<T>(2.0);
        for _iter in 0..30 {
            let f = |b: &[T]| self.path_length(p, &d, &normals, b);
            let mut grad = vec![T::zero(); np];
            let mut hess = vec![vec![T::zero(); np]; np];
            let mut bp = b.clone();
            for i in 0..np {
                bp[i] = b[i] + h;
                let fp = f(&bp);
                bp[i] = b[i] - h;
                let fm = f(&bp);
                bp[i] = b[i];
                grad[i] = (fp - fm) / (two * h);
                hess[i][i] = (fp - two * best + fm) / (h * h);
            }
            for i in 0..np {
                for j in (i + 1)..np {
                    let mut s = T::zero();
                    for (si, sj, sg) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                        bp[i] = b[i] + lit::<T>(si) * h;
                        bp[j] = b[j] + lit::<T>(sj) * h;
                        s = s + lit::<T>(sg) * f(&bp);
                    }
                    bp[i] = b[i];
                    bp[j] = b[j];
                    let v = s / (lit::<T>(4.0) * h * h);
                    hess[i][j] = v;
                    hess[j][i] = v;
                }
            }
            let step = solve_small(hess, grad.clone())
                .filter(|s| s.iter().zip(&grad).map(|(&a, &g)| a * g).sum::<T>() > T::zero())
                .unwrap_or_else(|| grad.iter().map(|&g| g * e).collect());
            let mut t = T::one();
            let mut improved = false;
            for _ in 0..20 {
                let trial: Vec<T> = b.iter().zip(&step).map(|(&bi, &si)| bi - t * si).collect();
                let ft = f(&trial);
                if ft < best {
                    let gain = best - ft;
                    b = trial;
                    best = ft;
                    improved = gain > T::epsilon() * lit(8.0) * best;
                    break;
                }
                t = t / two;
            }
            let step_norm = step.iter().map(|&s| s * s).sum::<T>().sqrt() * t;
            if !improved || step_norm < T::epsilon().sqrt() * e * lit(1e-3) {
                break;
            }
        }
        best
    }
}

/// Gaussian elimination with partial pivoting for the tiny Newton systems.
fn solve_small<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= T::epsilon() * lit(1e-3) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = ((row + 1)..n).fold(b[row], |acc, k| acc - a[row][k] * x[k]);
        x[row] = s / a[row][row];
    }
    Some(x)
}

impl<T: Real> MetricChart<T> for PerturbedEuclidean<T> {
    fn name(&self) -> String {
        format!("perturbed-euclidean({}, {})", self.a, self.freq)
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &CoordBox<T> {
        &self.domain
    }
    fn metric(&self, x: &Point<T>) -> Mat<T> {
        conformal(self.n, self.phi(x[0]))
    }
    fn metric_derivative(&self, x: &Point<T>, beta: &MultiIndex) -> Mat<T> {
        let k = order(beta);
        if k == 0 {
            return self.metric(x);
        }
        if beta[0] as usize != k {
            return zero_mat();
        }
        // d^k sin(f x) = f^k sin(f x + k pi/2)
        let arg = self.freq * x[0] + from_usize::<T>(k) * T::FRAC_PI_2();
        conformal(self.n, self.a * self.freq.powi(k as i32) * arg.sin())
    }
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T {
        let q = self.lift(x, y);
        if self.a == T::zero() {
            return dist(x, &q, self.n);
        }
        self.ritz_distance(x, &q)
    }
    fn distance_bounds(&self, x: &Point<T>, y: &Point<T>) -> (T, T) {
        let q = self.lift(x, y);
        let e = dist(x, &q, self.n);
        let hi = self.straight_length(x, &q);
        // A curve no longer than `hi` stays within `hi / sqrt(min phi)` of x.
        let reach = hi / (T::one() - self.a.abs()).sqrt();
        let (lo_phi, _) = self.phi_range(x[0] - reach, x[0] + reach);
        (lo_phi.sqrt() * e, hi)
    }
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T> {
        let r0 = radius / (T::one() - self.a.abs()).sqrt();
        let (lo, _) = self.phi_range(center[0] - r0, center[0] + r0);
        ChartBall { center: *center, radius: radius / lo.sqrt() }
    }
    fn hull_is_exact(&self) -> bool {
        self.a == T::zero()
    }
    fn ball_inner_radius(&self, center: &Point<T>, radius: T) -> T {
        let r0 = radius / (T::one() - self.a.abs()).sqrt();
        let (_, hi) = self.phi_range(center[0] - r0, center[0] + r0);
        radius / hi.sqrt()
    }
}
