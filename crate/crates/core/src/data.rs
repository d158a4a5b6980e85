//! Point observations `Y_i = u(X_i) + σ ε_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Design points, responses and their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset<T> {
    pub d: usize,
    /// Design points; only the first `d` coordinates are meaningful.
    pub x: Vec<[T; 2]>,
    pub y: Vec<T>,
    pub sigma: f64,
    pub seed: u64,
    /// Interior points per axis of the grid the clean solution was computed on.
    pub fine_n: usize,
    /// Noise-free values `u₀(X_i)`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<Vec<T>>,
}

impl<T: Real> Dataset<T> {
    /// Observations without provenance (seed 0, unknown noise level).
    pub fn new(d: usize, x: Vec<[T; 2]>, y: Vec<T>) -> Result<Self> {
        let ds = Dataset {
            d,
            x,
            y,
            sigma: f64::NAN,
            seed: 0,
            fine_n: 0,
            clean: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return Err(Error::invalid(format!(
                "dataset dimension must be 1 or 2, got {}",
                self.d
            )));
        }
        if self.x.len() != self.y.len() {
            return Err(Error::invalid(format!(
                "dataset has {} points but {} responses",
                self.x.len(),
                self.y.len()
            )));
        }
        if let Some(c) = &self.clean {
            if c.len() != self.y.len() {
                return Err(Error::invalid("clean values do not match the responses"));
            }
        }
        for (i, p) in self.x.iter().enumerate() {
            if p[..self.d]
                .iter()
                .any(|&c| !(c > T::zero() && c < T::one()))
            {
                return Err(Error::invalid(format!(
                    "design point {i} is not strictly inside the domain"
                )));
            }
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("response {i} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}
