use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Grid, GridField};
use crate::scalar::Real;

/// Composite trapezoidal approximation of `∫ a·b` over the unit cube.
pub fn quadrature_inner<T: Real>(a: &GridField<T>, b: &GridField<T>) -> Result<T> {
    a.grid().check_same(b.grid())?;
    let grid = a.grid();
    Ok(a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(i, (&x, &y))| grid.trapezoid_weight::<T>(i) * x * y)
        .sum())
}

/// `∫ a·b` over interior nodes with weight `h^d` (boundary values ignored).
pub fn interior_inner<T: Real>(a: &GridField<T>, b: &GridField<T>) -> Result<T> {
    a.grid().check_same(b.grid())?;
    let grid = a.grid();
    let hd = grid.h::<T>().powi(grid.d() as i32);
    Ok(grid
        .interior_indices()
        .map(|i| a.values()[i] * b.values()[i])
        .sum::<T>()
        * hd)
}

/// Discrete L² norm over interior nodes; the norm used for PDE residuals.
pub fn interior_l2<T: Real>(u: &GridField<T>) -> T {
    interior_inner(u, u).expect("same grid").sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    H1,
    H2,
    Linf,
    C1,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(NormKind::L2),
            "h1" => Ok(NormKind::H1),
            "h2" => Ok(NormKind::H2),
            "linf" | "sup" => Ok(NormKind::Linf),
            "c1" => Ok(NormKind::C1),
            other => Err(Error::invalid(format!(
                "unknown norm kind '{other}' (expected l2, h1, h2, linf, c1)"
            ))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormKind::L2 => "l2",
            NormKind::H1 => "h1",
            NormKind::H2 => "h2",
            NormKind::Linf => "linf",
            NormKind::C1 => "c1",
        };
        f.write_str(s)
    }
}

fn l2_sq<T: Real>(u: &GridField<T>) -> T {
    quadrature_inner(u, u).expect("same grid")
}

/// Discrete surrogate of a Sobolev or sup norm.
///
/// Derivatives come from [`fd_derivative`]; `H1`/`H2` sum the squared L² norms
/// of all derivatives up to the given order (mixed derivatives counted twice in 2-D).
pub fn discrete_norm<T: Real>(u: &GridField<T>, kind: NormKind) -> Result<T> {
    let d = u.grid().d();
    match kind {
        NormKind::L2 => Ok(l2_sq(u).sqrt()),
        NormKind::Linf => Ok(u.max_abs()),
        NormKind::H1 | NormKind::H2 => {
            let mut total = l2_sq(u);
            let mut firsts = Vec::with_capacity(d);
            for axis in 0..d {
                let du = fd_derivative(u, axis, 1)?;
                total += l2_sq(&du);
                firsts.push(du);
            }
            if kind == NormKind::H2 {
                if u.grid().n() < 5 {
                    return Err(Error::precondition("H2 norm needs n >= 5"));
                }
                for axis in 0..d {
                    total += l2_sq(&fd_derivative(u, axis, 2)?);
                }
                if d == 2 {
                    let mixed = fd_derivative(&firsts[0], 1, 1)?;
                    total += T::lit(2.0) * l2_sq(&mixed);
                }
            }
            Ok(total.sqrt())
        }
        NormKind::C1 => {
            if u.grid().n() < 5 {
                return Err(Error::precondition("C1 norm needs n >= 5"));
            }
            let mut m = u.max_abs();
            for axis in 0..d {
                m = m.max(fd_derivative(u, axis, 1)?.max_abs());
            }
            Ok(m)
        }
    }
}

/// Finite-difference derivative of order 1 or 2 along `axis`.
///
/// Centered stencils in the interior, second-order one-sided stencils at the
/// boundary nodes; exact on polynomials of degree ≤ 2.
pub fn fd_derivative<T: Real>(u: &GridField<T>, axis: usize, order: usize) -> Result<GridField<T>> {
    let grid = *u.grid();
    if axis >= grid.d() {
        return Err(Error::invalid(format!(
            "axis {axis} out of range for d={}",
            grid.d()
        )));
    }
    if !(order == 1 || order == 2) {
        return Err(Error::invalid(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let m = grid.axis_len();
    let h = grid.h::<T>();
    let mut out = vec![T::zero(); grid.len()];
    let mut line = vec![T::zero(); m];
    let mut dline = vec![T::zero(); m];
    for_each_line(&grid, axis, |nodes| {
        for (k, &idx) in nodes.iter().enumerate() {
            line[k] = u.values()[idx];
        }
        stencil_1d(&line, h, order, &mut dline);
        for (k, &idx) in nodes.iter().enumerate() {
            out[idx] = dline[k];
        }
    });
    Ok(GridField::from_raw(grid, out))
}

fn stencil_1d<T: Real>(u: &[T], h: T, order: usize, out: &mut [T]) {
    let m = u.len();
    let two = T::lit(2.0);
    if order == 1 {
        let inv = T::one() / (two * h);
        out[0] = (T::lit(-3.0) * u[0] + T::lit(4.0) * u[1] - u[2]) * inv;
        for i in 1..m - 1 {
            out[i] = (u[i + 1] - u[i - 1]) * inv;
        }
        out[m - 1] = (T::lit(3.0) * u[m - 1] - T::lit(4.0) * u[m - 2] + u[m - 3]) * inv;
    } else {
        let inv = T::one() / (h * h);
        out[0] = (two * u[0] - T::lit(5.0) * u[1] + T::lit(4.0) * u[2] - u[3]) * inv;
        for i in 1..m - 1 {
            out[i] = (u[i + 1] - two * u[i] + u[i - 1]) * inv;
        }
        out[m - 1] =
            (two * u[m - 1] - T::lit(5.0) * u[m - 2] + T::lit(4.0) * u[m - 3] - u[m - 4]) * inv;
    }
}

/// Calls `f` with the flat node indices of every grid line parallel to `axis`.
pub(crate) fn for_each_line(grid: &Grid, axis: usize, mut f: impl FnMut(&[usize])) {
    let m = grid.axis_len();
    let mut nodes = vec![0usize; m];
    if grid.d() == 1 {
        for (k, n) in nodes.iter_mut().enumerate() {
            *n = k;
        }
        f(&nodes);
        return;
    }
    for other in 0..m {
        for (k, n) in nodes.iter_mut().enumerate() {
            *n = if axis == 0 {
                grid.ravel([k, other])
            } else {
                grid.ravel([other, k])
            };
        }
        f(&nodes);
    }
}
