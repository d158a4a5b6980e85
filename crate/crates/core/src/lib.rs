//! Numerical toolkit for recovering PDE coefficients from noisy point
//! samples of the solution.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; index loops
// mirror the textbook triangular solves.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes;
pub mod data;
pub mod error;
pub mod estimators;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod numerics;
pub mod pde;
pub mod scalar;
pub mod stability;

pub use data::Dataset;
pub use error::{Error, Result};
pub use frame::{Frame, FrameOptions, MultiIndex};
pub use numerics::{Grid, GridField, NormKind};
pub use scalar::Real;

pub type Field = GridField<f64>;
pub type Field32 = GridField<f32>;
pub type Frame64 = Frame<f64>;
pub type Frame32 = Frame<f32>;
