//! Compressed sparse rows, conjugate gradients and a Lanczos probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{lit, pairwise_sum, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub rows: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Sums duplicate entries; columns are sorted within each row.
    pub fn from_triplets(rows: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                let k = val.len() - 1;
                val[k] = val[k] + v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { rows, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(k) => self.val[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .into_par_iter()
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).fold(T::zero(), |a, k| a + self.val[k] * x[self.col[k]]))
            .collect()
    }

    /// `diag(d) + s * self`.
    pub fn shifted(&self, d: &[T], s: T) -> Self {
        let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(self.nnz() + self.rows);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                trip.push((i, self.col[k], s * self.val[k]));
            }
            trip.push((i, i, d[i]));
        }
        Self::from_triplets(self.rows, trip)
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let scale = self.val.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let mut worst = T::zero();
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.val[k] - self.get(self.col[k], i)).abs());
            }
        }
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let prod: Vec<T> = a.par_iter().zip(b).map(|(x, y)| *x * *y).collect();
    pairwise_sum(&prod)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CgStats<T> {
    pub iterations: usize,
    pub residual: T,
}

/// Relative residual any scalar type can reach.
pub fn default_tolerance<T: Real>() -> T {
    lit::<T>(1e-10).max(T::epsilon() * lit(100.0))
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
pub fn conjugate_gradient<T: Real>(a: &Csr<T>, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<CgStats<T>> {
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgStats { iterations: 0, residual: T::zero() });
    }
    let diag: Vec<T> = (0..a.rows).map(|i| a.get(i, i)).collect();
    if diag.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::Solver("system matrix has a non-positive diagonal".into()));
    }
    let ax = a.mul(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let mut z: Vec<T> = r.iter().zip(&diag).map(|(r, d)| *r / *d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..=max_iter {
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        if it == max_iter {
            break;
        }
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Solver("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x = *x + alpha * *p);
        r.par_iter_mut().zip(&ap).for_each(|(r, q)| *r = *r - alpha * *q);
        z.par_iter_mut().zip(r.par_iter().zip(&diag)).for_each(|(z, (r, d))| *z = *r / *d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = *z + beta * *p);
    }
    Err(Error::Solver(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

/// Smallest Ritz value of `D^-1/2 K D^-1/2` after `steps` Lanczos steps
/// (full reorthogonalization, fixed seed).
pub fn lanczos_min_ritz<T: Real>(k: &Csr<T>, d: &[T], steps: usize, seed: u64) -> T {
    let n = k.rows;
    let steps = steps.min(n);
    let sd: Vec<T> = d.iter().map(|v| v.sqrt()).collect();
    let op = |v: &[T]| -> Vec<T> {
        let w: Vec<T> = v.iter().zip(&sd).map(|(a, s)| *a / *s).collect();
        k.mul(&w).iter().zip(&sd).map(|(a, s)| *a / *s).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..n).map(|_| lit(rng.gen_range(-1.0..1.0))).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v = *v / nq);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for _ in 0..steps {
        let mut w = op(&q);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q.clone());
        for b in &basis {
            let c = dot(b, &w);
            w.iter_mut().zip(b).for_each(|(w, b)| *w = *w - c * *b);
        }
        let bn = dot(&w, &w).sqrt();
        if bn <= T::epsilon() * lit(10.0) {
            break;
        }
        beta.push(bn);
        q = w.into_iter().map(|v| v / bn).collect();
    }
    beta.truncate(alpha.len().saturating_sub(1));
    tridiagonal_min_eigenvalue(&alpha, &beta)
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_min_eigenvalue<T: Real>(alpha: &[T], beta: &[T]) -> T {
    let n = alpha.len();
    if n == 0 {
        return T::zero();
    }
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r =
            (if i > 0 { beta[i - 1].abs() } else { T::zero() }) + (if i + 1 < n { beta[i].abs() } else { T::zero() });
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let pivot_floor = T::epsilon() * (hi - lo).abs().max(T::one());
    // number of eigenvalues below x
    let count = |x: T| {
        let mut c = 0;
        let mut q = T::one();
        for i in 0..n {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { T::zero() };
            q = alpha[i] - x - if i > 0 { b2 / q } else { T::zero() };
            if q == T::zero() {
                q = pivot_floor;
            }
            if q < T::zero() {
                c += 1;
            }
        }
        c
    };
    let two = lit::<T>(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid == lo || mid == hi {
            break;
        }
        if count(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / two
}
