//! Discrete Darcy (`∇·(f∇u) = g`, `u = 0` on the boundary) and Schrödinger
//! (`½Δu − fu = 0`, `u = g` on the boundary) operators and their solvers.
//!
//! Both use the standard 3/5-point stencils; the conductivity enters at
//! half-nodes as the average of the two neighbouring node values.

use crate::error::{Error, Result};
use crate::linalg::{check_residual, relative_residual, BandedCholesky, BandedSpd};
use crate::numerics::{Grid, GridField};
use crate::scalar::Real;

/// Flat index offsets of the two axis neighbours (`stride` per axis).
fn strides(grid: &Grid) -> [usize; 2] {
    if grid.d() == 1 {
        [1, 0]
    } else {
        [grid.axis_len(), 1]
    }
}

/// Discrete `∇·(f∇u)` at interior nodes; boundary nodes are zero.
pub fn darcy_apply<T: Real>(f: &GridField<T>, u: &GridField<T>) -> Result<GridField<T>> {
    f.grid().check_same(u.grid())?;
    let grid = *u.grid();
    let (fv, uv) = (f.values(), u.values());
    let h = grid.h::<T>();
    let inv = T::one() / (h * h);
    let half = T::lit(0.5);
    let st = strides(&grid);
    let mut out = vec![T::zero(); grid.len()];
    for p in grid.interior_indices() {
        let mut acc = T::zero();
        for &s in &st[..grid.d()] {
            let fp = half * (fv[p] + fv[p + s]);
            let fm = half * (fv[p] + fv[p - s]);
            acc += fp * (uv[p + s] - uv[p]) - fm * (uv[p] - uv[p - s]);
        }
        out[p] = acc * inv;
    }
    Ok(GridField::from_raw(grid, out))
}

/// Discrete `½Δu − f u` at interior nodes; boundary nodes are zero.
pub fn schrodinger_apply<T: Real>(f: &GridField<T>, u: &GridField<T>) -> Result<GridField<T>> {
    f.grid().check_same(u.grid())?;
    let grid = *u.grid();
    let (fv, uv) = (f.values(), u.values());
    let h = grid.h::<T>();
    let c = T::lit(0.5) / (h * h);
    let two = T::lit(2.0);
    let st = strides(&grid);
    let mut out = vec![T::zero(); grid.len()];
    for p in grid.interior_indices() {
        let mut lap = T::zero();
        for &s in &st[..grid.d()] {
            lap += uv[p + s] - two * uv[p] + uv[p - s];
        }
        out[p] = c * lap - fv[p] * uv[p];
    }
    Ok(GridField::from_raw(grid, out))
}

/// Interior-node values in solver ordering.
pub fn interior_vector<T: Real>(u: &GridField<T>) -> Vec<T> {
    u.grid().interior_indices().map(|i| u.values()[i]).collect()
}

/// Field with the given interior values and `boundary` everywhere else.
pub fn from_interior<T: Real>(
    grid: Grid,
    interior: &[T],
    boundary: Option<&GridField<T>>,
) -> GridField<T> {
    let mut out = match boundary {
        Some(b) => b.values().to_vec(),
        None => vec![T::zero(); grid.len()],
    };
    for (k, p) in grid.interior_indices().enumerate() {
        out[p] = interior[k];
    }
    GridField::from_raw(grid, out)
}

/// Maps a flat node index to its interior unknown index (caller ensures interior).
fn unknown(grid: &Grid, p: usize) -> usize {
    let n = grid.n();
    let [i, j] = grid.unravel(p);
    if grid.d() == 1 {
        i - 1
    } else {
        (i - 1) * n + (j - 1)
    }
}

/// Assembles `−A` where `A` is the interior Darcy matrix; SPD when `f > 0`.
fn darcy_matrix<T: Real>(f: &GridField<T>) -> BandedSpd<T> {
    let grid = *f.grid();
    let fv = f.values();
    let h = grid.h::<T>();
    let inv = T::one() / (h * h);
    let half = T::lit(0.5);
    let n = grid.n();
    let bw = if grid.d() == 1 { 1 } else { n };
    let mut m = BandedSpd::zeros(n.pow(grid.d() as u32), bw);
    let st = strides(&grid);
    for p in grid.interior_indices() {
        let k = unknown(&grid, p);
        for &s in &st[..grid.d()] {
            let fp = half * (fv[p] + fv[p + s]) * inv;
            let fm = half * (fv[p] + fv[p - s]) * inv;
            m.add(k, k, fp + fm);
            if !grid.is_boundary(p - s) {
                m.add(k, unknown(&grid, p - s), -fm);
            }
        }
    }
    m
}

/// Factorized Darcy operator for a fixed conductivity, reusable across
/// right-hand sides (the system is self-adjoint, so this also solves the
/// adjoint equation).
#[derive(Debug, Clone)]
pub struct DarcyOperator<T> {
    grid: Grid,
    neg: BandedSpd<T>,
    chol: BandedCholesky<T>,
}

impl<T: Real> DarcyOperator<T> {
    pub fn new(f: &GridField<T>) -> Result<Self> {
        let fmin = f.min();
        if fmin <= T::zero() {
            return Err(Error::precondition(format!(
                "conductivity must be positive, min f = {fmin}"
            )));
        }
        let neg = darcy_matrix(f);
        let chol = neg.cholesky()?;
        Ok(DarcyOperator {
            grid: *f.grid(),
            neg,
            chol,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Solves `A x = rhs` on interior unknowns.
    pub fn solve_interior(&self, rhs: &[T]) -> Result<Vec<T>> {
        let neg_rhs: Vec<T> = rhs.iter().map(|&v| -v).collect();
        let x = self.chol.solve(&neg_rhs);
        check_residual(relative_residual(&self.neg.matvec(&x), &neg_rhs))?;
        Ok(x)
    }

    /// Solution with zero boundary values and interior source `g`.
    pub fn solve(&self, g: &GridField<T>) -> Result<GridField<T>> {
        self.grid.check_same(g.grid())?;
        let x = self.solve_interior(&interior_vector(g))?;
        Ok(from_interior(self.grid, &x, None))
    }
}

/// Darcy forward problem: conductivity `f > 0` and source `g`.
#[derive(Debug, Clone)]
pub struct DarcyProblem<T> {
    pub f: GridField<T>,
    pub g: GridField<T>,
}

impl<T: Real> DarcyProblem<T> {
    pub fn new(f: GridField<T>, g: GridField<T>) -> Result<Self> {
        f.grid().check_same(g.grid())?;
        Ok(DarcyProblem { f, g })
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }
}

pub fn darcy_solve<T: Real>(problem: &DarcyProblem<T>) -> Result<GridField<T>> {
    DarcyOperator::new(&problem.f)?.solve(&problem.g)
}

/// Schrödinger forward problem: potential `f ≥ 0` and positive boundary
/// data (only the boundary nodes of `g_boundary` are read).
#[derive(Debug, Clone)]
pub struct SchrodingerProblem<T> {
    pub f: GridField<T>,
    pub g_boundary: GridField<T>,
}

impl<T: Real> SchrodingerProblem<T> {
    pub fn new(f: GridField<T>, g_boundary: GridField<T>) -> Result<Self> {
        f.grid().check_same(g_boundary.grid())?;
        Ok(SchrodingerProblem { f, g_boundary })
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }
}

/// Lower bound `g_min · exp(−‖f‖∞ / 4)` on the Schrödinger solution; `1/4`
/// bounds the expected exit time of `½Δ`-Brownian motion from the unit cube.
pub fn schrodinger_positivity_bound<T: Real>(g_min: T, f_sup: T) -> T {
    g_min * (-f_sup * T::lit(0.25)).exp()
}

pub fn schrodinger_solve<T: Real>(problem: &SchrodingerProblem<T>) -> Result<GridField<T>> {
    let grid = *problem.grid();
    let f = &problem.f;
    let gb = &problem.g_boundary;
    if f.min() < T::zero() {
        return Err(Error::precondition(format!(
            "potential must be non-negative, min f = {}",
            f.min()
        )));
    }
    let g_min = gb.boundary_min();
    if g_min <= T::zero() {
        return Err(Error::precondition(format!(
            "boundary data must be positive, min g = {g_min}"
        )));
    }
    let h = grid.h::<T>();
    let c = T::lit(0.5) / (h * h);
    let n = grid.n();
    let bw = if grid.d() == 1 { 1 } else { n };
    let mut m = BandedSpd::zeros(n.pow(grid.d() as u32), bw);
    let mut rhs = vec![T::zero(); m.dim()];
    let st = strides(&grid);
    let (fv, gv) = (f.values(), gb.values());
    for p in grid.interior_indices() {
        let k = unknown(&grid, p);
        m.add(k, k, fv[p]);
        for &s in &st[..grid.d()] {
            m.add(k, k, T::lit(2.0) * c);
            for q in [p - s, p + s] {
                if grid.is_boundary(q) {
                    rhs[k] += c * gv[q];
                } else if q < p {
                    m.add(k, unknown(&grid, q), -c);
                }
            }
        }
    }
    let x = m.cholesky()?.solve(&rhs);
    check_residual(relative_residual(&m.matvec(&x), &rhs))?;
    let mut out = gb.values().to_vec();
    for p in grid.interior_indices() {
        out[p] = x[unknown(&grid, p)];
    }
    let u = GridField::from_raw(grid, out);
    if u.min() <= T::zero() {
        return Err(Error::numerical(
            "Schrödinger solution lost positivity",
            u.min().to_f64_lossy(),
        ));
    }
    Ok(u)
}

#[cfg(test)]
mod tests;
