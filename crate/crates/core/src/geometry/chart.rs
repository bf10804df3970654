use crate::linalg::{Mat, Point, MAX_DIM};
use crate::scalar::Real;

/// Multi-index `beta` of a partial derivative: `beta[i]` derivatives along axis `i`.
pub type MultiIndex = [u8; MAX_DIM];

pub fn order(beta: &MultiIndex) -> usize {
    beta.iter().map(|&b| b as usize).sum()
}

/// All multi-indices of exactly `ord` in dimension `n`, in lexicographic order
/// (highest power of axis 0 first).
pub fn multi_indices(n: usize, ord: usize) -> Vec<MultiIndex> {
    fn rec(n: usize, axis: usize, left: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if axis + 1 == n {
            cur[axis] = left as u8;
            out.push(*cur);
            cur[axis] = 0;
            return;
        }
        for k in (0..=left).rev() {
            cur[axis] = k as u8;
            rec(n, axis + 1, left - k, cur, out);
        }
        cur[axis] = 0;
    }
    let mut out = Vec::new();
    let mut cur = [0u8; MAX_DIM];
    rec(n, 0, ord, &mut cur, &mut out);
    out
}

/// Axis-aligned coordinate box. A periodic box identifies opposite faces.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox<T> {
    pub n: usize,
    pub lo: Point<T>,
    pub hi: Point<T>,
    pub periodic: bool,
}

impl<T: Real> CoordBox<T> {
    pub fn new(n: usize, lo: Point<T>, hi: Point<T>) -> Self {
        Self { n, lo, hi, periodic: false }
    }

    pub fn periodic(n: usize, lo: Point<T>, hi: Point<T>) -> Self {
        Self { n, lo, hi, periodic: true }
    }

    pub fn cube(n: usize, lo: T, hi: T) -> Self {
        let mut a = [T::zero(); MAX_DIM];
        let mut b = [T::zero(); MAX_DIM];
        for i in 0..n {
            a[i] = lo;
            b[i] = hi;
        }
        Self::new(n, a, b)
    }

    pub fn contains(&self, x: &Point<T>) -> bool {
        (0..self.n).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn width(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    /// Whether the chart ball lies in the box shrunk by `margin` on every side.
    pub fn contains_ball(&self, ball: &ChartBall<T>, margin: T) -> bool {
        if self.periodic {
            return true;
        }
        (0..self.n).all(|i| {
            ball.center[i] - ball.radius >= self.lo[i] + margin && ball.center[i] + ball.radius <= self.hi[i] - margin
        })
    }
}

/// Euclidean ball in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartBall<T> {
    pub center: Point<T>,
    pub radius: T,
}

/// A model Riemannian manifold given by one analytic coordinate chart.
///
/// Implementations must be pure: every method is a function of its inputs.
pub trait MetricChart<T: Real>: Send + Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Working (truncated) box. Non-compact models are cut to this box.
    fn domain(&self) -> &CoordBox<T>;

    /// Whether `x` is a point of the chart where the metric is defined.
    fn contains(&self, x: &Point<T>) -> bool {
        let d = self.domain();
        d.periodic || d.contains(x)
    }

    fn metric(&self, x: &Point<T>) -> Mat<T>;

    /// `\partial^beta g_ij (x)`, closed form, for `|beta| <= max_derivative_order()`.
    fn metric_derivative(&self, x: &Point<T>, beta: &MultiIndex) -> Mat<T>;

    fn max_derivative_order(&self) -> usize {
        3
    }

    /// Geodesic distance.
    fn distance(&self, x: &Point<T>, y: &Point<T>) -> T;

    /// Cheap certified bracket `lo <= d(x, y) <= hi`.
    fn distance_bounds(&self, x: &Point<T>, y: &Point<T>) -> (T, T) {
        let d = self.distance(x, y);
        (d, d)
    }

    /// A chart ball containing the geodesic ball `B(center, radius)`.
    fn ball_hull(&self, center: &Point<T>, radius: T) -> ChartBall<T>;

    /// Whether `ball_hull` is exactly the geodesic ball.
    fn hull_is_exact(&self) -> bool {
        true
    }

    /// Radius of a chart ball centred at `center` contained in `B(center, radius)`.
    fn ball_inner_radius(&self, center: &Point<T>, radius: T) -> T;

    /// Largest radius below which geodesic balls are embedded discs regardless
    /// of the box (the torus's half period); `None` for simply connected models.
    fn injectivity_cap(&self) -> Option<T> {
        None
    }

    /// Margin kept between certified balls and the box faces.
    fn safety_margin(&self) -> T {
        T::zero()
    }

    /// Whether `x` lies in the geodesic ball, using the bracket before the exact distance.
    fn in_ball(&self, center: &Point<T>, radius: T, x: &Point<T>) -> bool {
        let (lo, hi) = self.distance_bounds(center, x);
        if hi <= radius {
            return true;
        }
        if lo > radius {
            return false;
        }
        self.distance(center, x) <= radius
    }
}
