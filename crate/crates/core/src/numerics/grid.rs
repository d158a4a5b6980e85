use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform tensor grid on the closed unit cube `[0,1]^d`, including boundary nodes.
///
/// Each axis carries `n` interior nodes plus the two boundary nodes, so the
/// spacing is `h = 1/(n+1)`. Nodes are stored in row-major order: for `d = 2`
/// the node `(i, j)` (with `x = i h`, `y = j h`) lives at `i * (n+2) + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::invalid(format!(
                "grid dimension must be 1 or 2, got {d}"
            )));
        }
        if n < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 interior points, got {n}"
            )));
        }
        Ok(Self { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes per axis, boundary included.
    pub fn axis_len(&self) -> usize {
        self.n + 2
    }

    pub fn len(&self) -> usize {
        self.axis_len().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.n + 1)
    }

    /// Axis indices of a flat node index; the second entry is 0 for `d = 1`.
    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            let m = self.axis_len();
            [idx / m, idx % m]
        }
    }

    #[inline]
    pub fn ravel(&self, ij: [usize; 2]) -> usize {
        if self.d == 1 {
            ij[0]
        } else {
            ij[0] * self.axis_len() + ij[1]
        }
    }

    /// Physical coordinates of a node (unused trailing entry is 0).
    pub fn coords<T: Real>(&self, idx: usize) -> [T; 2] {
        let h = self.h::<T>();
        let [i, j] = self.unravel(idx);
        if self.d == 1 {
            [T::from_usize_lossy(i) * h, T::zero()]
        } else {
            [T::from_usize_lossy(i) * h, T::from_usize_lossy(j) * h]
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let last = self.n + 1;
        let ij = self.unravel(idx);
        ij[..self.d].iter().any(|&i| i == 0 || i == last)
    }

    /// Composite trapezoidal weight of a node.
    pub fn trapezoid_weight<T: Real>(&self, idx: usize) -> T {
        let h = self.h::<T>();
        let half = T::lit(0.5);
        let last = self.n + 1;
        let ij = self.unravel(idx);
        ij[..self.d].iter().fold(T::one(), |w, &i| {
            if i == 0 || i == last {
                w * h * half
            } else {
                w * h
            }
        })
    }

    /// Quadrature weights of the whole grid.
    pub fn weights<T: Real>(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.trapezoid_weight(i)).collect()
    }

    /// Weights `h^d` on interior nodes and zero on the boundary. Used for fields
    /// that are only defined in the interior (PDE residuals and sources).
    pub fn interior_weights<T: Real>(&self) -> Vec<T> {
        let hd = self.h::<T>().powi(self.d as i32);
        (0..self.len())
            .map(|i| if self.is_boundary(i) { T::zero() } else { hd })
            .collect()
    }

    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| !self.is_boundary(i))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::invalid(format!(
                "grid mismatch: (d={}, n={}) vs (d={}, n={})",
                self.d, self.n, other.d, other.n
            )));
        }
        Ok(())
    }
}
