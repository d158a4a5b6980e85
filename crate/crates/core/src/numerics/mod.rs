//! Grids, sampled fields, quadrature, finite differences and discrete norms.

mod calculus;
mod field;
mod grid;
mod io;

#[allow(unused_imports)]
pub(crate) use calculus::for_each_line;
pub use calculus::{
    discrete_norm, fd_derivative, interior_inner, interior_l2, quadrature_inner, NormKind,
};
pub use field::{interpolation_stencil, GridField};
pub use grid::Grid;

#[cfg(test)]
mod tests;
