//! Vertex grids over chart boxes shared by the norms and the heat solver.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Point, MAX_DIM};
use crate::scalar::{from_usize, to_f64, Real};

/// Nodes `lo + i h` per axis. A periodic grid has `N` nodes with `h = L / N`
/// (the upper face is the lower one); otherwise `N` nodes span `[lo, hi]`
/// inclusively and the outer layer is the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeGrid<T> {
    pub n: usize,
    pub lo: Point<T>,
    pub hi: Point<T>,
    pub counts: [usize; MAX_DIM],
    pub periodic: bool,
}

impl<T: Real> NodeGrid<T> {
    pub fn new(lo: &Point<T>, hi: &Point<T>, counts: &[usize], periodic: bool) -> Result<Self> {
        let n = counts.len();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::Config(format!("grid dimension {n} unsupported")));
        }
        let min = if periodic { 3 } else { 4 };
        if counts.iter().any(|&c| c < min) {
            return Err(Error::Config(format!("grid needs at least {min} nodes per axis")));
        }
        if (0..n).any(|i| !(hi[i] > lo[i])) {
            return Err(Error::Config("grid box is empty".into()));
        }
        let mut c = [1usize; MAX_DIM];
        c[..n].copy_from_slice(counts);
        Ok(Self { n, lo: *lo, hi: *hi, counts: c, periodic })
    }

    /// Grid whose step is at most `h` on every axis.
    pub fn with_spacing(lo: &Point<T>, hi: &Point<T>, n: usize, h: T, periodic: bool) -> Result<Self> {
        if !(h > T::zero()) {
            return Err(Error::Config(format!("grid spacing {h} must be positive")));
        }
        let counts: Vec<usize> = (0..n)
            .map(|i| {
                let cells = to_f64((hi[i] - lo[i]) / h).round().max(1.0) as usize;
                if periodic {
                    cells
                } else {
                    cells + 1
                }
            })
            .collect();
        Self::new(lo, hi, &counts, periodic)
    }

    pub fn len(&self) -> usize {
        self.counts[..self.n].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        let cells = if self.periodic { self.counts[axis] } else { self.counts[axis] - 1 };
        (self.hi[axis] - self.lo[axis]) / from_usize(cells)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (i, slot) in idx.iter_mut().enumerate().take(self.n) {
            *slot = flat % self.counts[i];
            flat /= self.counts[i];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize; MAX_DIM]) -> usize {
        (0..self.n).rev().fold(0, |acc, i| acc * self.counts[i] + idx[i])
    }

    pub fn node(&self, flat: usize) -> Point<T> {
        let idx = self.multi_index(flat);
        let mut p = self.lo;
        for i in 0..self.n {
            p[i] = self.lo[i] + from_usize::<T>(idx[i]) * self.spacing(i);
        }
        p
    }

    /// Neighbour `flat + step e_axis`; wraps when periodic, `None` past the boundary.
    pub fn shift(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        let c = self.counts[axis] as isize;
        let v = idx[axis] as isize + step;
        idx[axis] = if self.periodic {
            v.rem_euclid(c) as usize
        } else if (0..c).contains(&v) {
            v as usize
        } else {
            return None;
        };
        Some(self.flat(&idx))
    }

    /// Flat indices of the nodes in the chart box `[lo, hi]` (every node when
    /// periodic), axis 0 fastest.
    pub fn nodes_in_box(&self, lo: &Point<T>, hi: &Point<T>) -> Vec<usize> {
        if self.periodic {
            return (0..self.len()).collect();
        }
        let mut range = [(0usize, 0usize); MAX_DIM];
        for i in 0..self.n {
            let h = self.spacing(i);
            let last = self.counts[i] as f64 - 1.0;
            let a = to_f64((lo[i] - self.lo[i]) / h).ceil().clamp(0.0, last + 1.0) as usize;
            let b = to_f64((hi[i] - self.lo[i]) / h).floor().clamp(-1.0, last);
            if b < 0.0 || a as f64 > b {
                return Vec::new();
            }
            range[i] = (a, b as usize);
        }
        let mut out = Vec::new();
        let mut idx = [0usize; MAX_DIM];
        for i in 0..self.n {
            idx[i] = range[i].0;
        }
        loop {
            out.push(self.flat(&idx));
            let mut axis = 0;
            loop {
                if axis == self.n {
                    return out;
                }
                if idx[axis] < range[axis].1 {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = range[axis].0;
                axis += 1;
            }
        }
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        if self.periodic {
            return false;
        }
        let idx = self.multi_index(flat);
        (0..self.n).any(|i| idx[i] == 0 || idx[i] + 1 == self.counts[i])
    }

    /// Trapezoid factor: `1/2` per boundary layer the node sits on.
    pub fn trapezoid_factor(&self, flat: usize) -> T {
        if self.periodic {
            return T::one();
        }
        let idx = self.multi_index(flat);
        let half = T::one() / (T::one() + T::one());
        (0..self.n).fold(T::one(), |w, i| if idx[i] == 0 || idx[i] + 1 == self.counts[i] { w * half } else { w })
    }

    pub fn cell_volume(&self) -> T {
        (0..self.n).fold(T::one(), |v, i| v * self.spacing(i))
    }
}
