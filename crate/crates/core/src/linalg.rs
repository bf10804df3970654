//! Tiny dense linear algebra for chart dimensions `n <= 3`.
//!
//! Points and tensors are stored in fixed `3`-wide arrays; only the leading
//! `n` entries (or `n x n` block) are meaningful, the rest stay zero.

use crate::scalar::{lit, Real};

pub const MAX_DIM: usize = 3;

pub type Point<T> = [T; MAX_DIM];
pub type Mat<T> = [[T; MAX_DIM]; MAX_DIM];

pub fn zero_point<T: Real>() -> Point<T> {
    [T::zero(); MAX_DIM]
}

pub fn zero_mat<T: Real>() -> Mat<T> {
    [[T::zero(); MAX_DIM]; MAX_DIM]
}

pub fn identity<T: Real>(n: usize) -> Mat<T> {
    let mut m = zero_mat();
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = T::one();
    }
    m
}

/// Builds a point from a slice of length `<= 3`.
pub fn point<T: Real>(xs: &[T]) -> Point<T> {
    let mut p = zero_point();
    p[..xs.len()].copy_from_slice(xs);
    p
}

pub fn sub<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add<T: Real>(a: &Point<T>, b: &Point<T>) -> Point<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale<T: Real>(a: &Point<T>, s: T) -> Point<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot<T: Real>(a: &Point<T>, b: &Point<T>, n: usize) -> T {
    (0..n).fold(T::zero(), |acc, i| acc + a[i] * b[i])
}

pub fn norm<T: Real>(a: &Point<T>, n: usize) -> T {
    dot(a, a, n).sqrt()
}

pub fn dist<T: Real>(a: &Point<T>, b: &Point<T>, n: usize) -> T {
    norm(&sub(a, b), n)
}

pub fn det<T: Real>(m: &Mat<T>, n: usize) -> T {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Inverse by the adjugate; `None` when the determinant vanishes.
pub fn inverse<T: Real>(m: &Mat<T>, n: usize) -> Option<Mat<T>> {
    let d = det(m, n);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut inv = zero_mat();
    match n {
        1 => inv[0][0] = T::one() / d,
        2 => {
            inv[0][0] = m[1][1] / d;
            inv[0][1] = -m[0][1] / d;
            inv[1][0] = -m[1][0] / d;
            inv[1][1] = m[0][0] / d;
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
                }
            }
        }
        _ => return None,
    }
    Some(inv)
}

pub fn matmul<T: Real>(a: &Mat<T>, b: &Mat<T>, n: usize) -> Mat<T> {
    let mut c = zero_mat();
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    c
}

pub fn mat_vec<T: Real>(a: &Mat<T>, v: &Point<T>, n: usize) -> Point<T> {
    let mut out = zero_point();
    for i in 0..n {
        out[i] = (0..n).fold(T::zero(), |acc, k| acc + a[i][k] * v[k]);
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn sym_eigenvalues<T: Real>(m: &Mat<T>, n: usize) -> Vec<T> {
    let mut a = *m;
    let eps = T::epsilon();
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[i][j] * a[i][j];
            }
        }
        let scale_sq = (0..n).fold(T::zero(), |acc, i| acc + a[i][i] * a[i][i]);
        if off <= eps * eps * scale_sq || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (lit::<T>(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Largest absolute entry of the leading `n x n` block.
pub fn max_abs<T: Real>(m: &Mat<T>, n: usize) -> T {
    let mut best = T::zero();
    for row in m.iter().take(n) {
        for &v in row.iter().take(n) {
            best = best.max(v.abs());
        }
    }
    best
}

/// Lower Cholesky factor of an SPD matrix; `None` if not positive definite.
pub fn cholesky<T: Real>(m: &Mat<T>, n: usize) -> Option<Mat<T>> {
    let mut l = zero_mat();
    for i in 0..n {
        for j in 0..=i {
            let s = (0..j).fold(m[i][j], |acc, k| acc - l[i][k] * l[j][k]);
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    // Newton iteration on P_order.
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    let nf = order as f64;
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(lit(0.5 * (1.0 - x)));
        weights.push(lit(0.5 * w));
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3x3_roundtrip() {
        let m: Mat<f64> = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(&m, 3).unwrap();
        let id = matmul(&m, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let m: Mat<f64> = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]];
        let ev = sym_eigenvalues(&m, 2);
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit::<f64>(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 1.0 / 12.0).abs() < 1e-14);
    }
}
