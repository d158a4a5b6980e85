use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::numerics::Grid;
use crate::scalar::Real;

/// Real-valued function sampled on every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite field value at node {pos}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node; `f` receives the coordinate slice of length `d`.
    pub fn from_fn(grid: Grid, f: impl Fn(&[T]) -> T) -> Self {
        let d = grid.d();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords::<T>(i);
                f(&x[..d])
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Minimum over interior nodes only.
    pub fn interior_min(&self) -> T {
        self.grid
            .interior_indices()
            .map(|i| self.values[i])
            .fold(T::infinity(), T::min)
    }

    /// Minimum over boundary nodes only.
    pub fn boundary_min(&self) -> T {
        (0..self.grid.len())
            .filter(|&i| self.grid.is_boundary(i))
            .map(|i| self.values[i])
            .fold(T::infinity(), T::min)
    }

    pub fn boundary_max_abs(&self) -> T {
        (0..self.grid.len())
            .filter(|&i| self.grid.is_boundary(i))
            .fold(T::zero(), |m, i| m.max(self.values[i].abs()))
    }

    /// Copy with boundary nodes set to zero.
    pub fn interior_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.grid.len() {
            if self.grid.is_boundary(i) {
                out.values[i] = T::zero();
            }
        }
        out
    }

    /// Multilinear interpolation of the node values at a point of `[0,1]^d`.
    pub fn interpolate(&self, point: &[T]) -> Result<T> {
        let stencil = interpolation_stencil(&self.grid, point)?;
        Ok(stencil
            .iter()
            .filter(|(_, w)| *w != T::zero())
            .map(|&(i, w)| w * self.values[i])
            .sum())
    }
}

/// Nodes and weights of the multilinear interpolation stencil at `point`.
pub fn interpolation_stencil<T: Real>(grid: &Grid, point: &[T]) -> Result<Vec<(usize, T)>> {
    let d = grid.d();
    if point.len() != d {
        return Err(Error::invalid(format!(
            "point has {} coordinates, grid dimension is {d}",
            point.len()
        )));
    }
    let cells = grid.n() + 1;
    let mut axis = [(0usize, T::zero()); 2];
    for (a, &x) in point.iter().enumerate() {
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::invalid(format!(
                "point coordinate {x} outside [0,1]"
            )));
        }
        let s = x * T::from_usize_lossy(cells);
        let i = s.floor().to_usize().unwrap_or(0).min(cells - 1);
        axis[a] = (i, s - T::from_usize_lossy(i));
    }
    let mut out = Vec::with_capacity(1 << d);
    if d == 1 {
        let (i, t) = axis[0];
        out.push((i, T::one() - t));
        out.push((i + 1, t));
    } else {
        let (i, s) = axis[0];
        let (j, t) = axis[1];
        for (di, wi) in [(0, T::one() - s), (1, s)] {
            for (dj, wj) in [(0, T::one() - t), (1, t)] {
                out.push((grid.ravel([i + di, j + dj]), wi * wj));
            }
        }
    }
    Ok(out)
}

impl<T: Real> Add for &GridField<T> {
    type Output = GridField<T>;
    fn add(self, rhs: Self) -> GridField<T> {
        self.zip_with(rhs, |a, b| a + b)
            .expect("grid mismatch in field addition")
    }
}

impl<T: Real> Sub for &GridField<T> {
    type Output = GridField<T>;
    fn sub(self, rhs: Self) -> GridField<T> {
        self.zip_with(rhs, |a, b| a - b)
            .expect("grid mismatch in field subtraction")
    }
}

impl<T: Real> Mul<T> for &GridField<T> {
    type Output = GridField<T>;
    fn mul(self, rhs: T) -> GridField<T> {
        self.scale(rhs)
    }
}
