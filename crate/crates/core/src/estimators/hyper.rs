use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::resolution_level_for;

/// Which elliptic model the data come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `∇·(f∇u) = g`, `u = 0` on the boundary.
    Darcy,
    /// `½Δu − fu = 0`, `u = g` on the boundary.
    Schrodinger,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "darcy" => Ok(Model::Darcy),
            "schrodinger" | "schroedinger" => Ok(Model::Schrodinger),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected darcy or schrodinger)"
            ))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Darcy => "darcy",
            Model::Schrodinger => "schrodinger",
        })
    }
}

impl Model {
    /// How many derivatives the forward map gains: `u ∈ H^{α+gain}`.
    pub fn smoothing_gain(self) -> f64 {
        match self {
            Model::Darcy => 1.0,
            Model::Schrodinger => 2.0,
        }
    }
}

/// Tuning constants of the plug-in and joint estimators for a sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub model: Model,
    pub alpha: f64,
    pub d: usize,
    pub n_samples: usize,
    /// Weight of the PDE-residual term in the joint objective.
    pub lambda: f64,
    /// Regression penalty.
    pub mu: f64,
    /// Inversion penalty.
    pub nu: f64,
    /// Frame resolution level.
    pub j: usize,
    pub c_dim: f64,
}

impl Hyperparameters {
    /// Sobolev exponent of the regression penalty: `α+1` (Darcy), `α+2` (Schrödinger).
    pub fn regression_exponent(&self) -> f64 {
        self.alpha + self.model.smoothing_gain()
    }
}

/// Rate-optimal schedules. With `s = α + gain` (gain 1 for Darcy, 2 for
/// Schrödinger): `λ = N^{−2/(2s+d)}`, `μ = N^{−s/(2s+d)}`,
/// `ν = N^{−(s−2)/(2s+d)}`, and `J` from the resolution rule at smoothness `s`.
pub fn derive_hyperparams(
    model: Model,
    n_samples: usize,
    alpha: f64,
    d: usize,
    c_dim: f64,
) -> Result<Hyperparameters> {
    if n_samples < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    if !(alpha >= 2.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "smoothness alpha must be >= 2, got {alpha}"
        )));
    }
    if !(d == 1 || d == 2) {
        return Err(Error::invalid(format!("dimension must be 1 or 2, got {d}")));
    }
    if !(c_dim > 0.0) || !c_dim.is_finite() {
        return Err(Error::invalid(format!(
            "c_dim must be positive, got {c_dim}"
        )));
    }
    if alpha <= d as f64 / 2.0 + 1.0 {
        log::warn!("alpha = {alpha} is at or below d/2 + 1; rates are not covered by theory");
    }
    let s = alpha + model.smoothing_gain();
    let n = n_samples as f64;
    let denom = 2.0 * s + d as f64;
    Ok(Hyperparameters {
        model,
        alpha,
        d,
        n_samples,
        lambda: n.powf(-2.0 / denom),
        mu: n.powf(-s / denom),
        nu: n.powf(-(s - 2.0) / denom),
        j: resolution_level_for(n_samples, s, d, c_dim),
        c_dim,
    })
}

/// Exponent of the flop count of the plug-in estimator: `1 + 2d/(2(α+1)+d)`.
pub fn kappa(alpha: f64, d: usize) -> f64 {
    1.0 + 2.0 * d as f64 / (2.0 * (alpha + 1.0) + d as f64)
}

/// Theoretical log-log slopes of the mean squared errors `(forward, inverse)`.
pub fn theoretical_slopes(model: Model, alpha: f64, d: usize) -> (f64, f64) {
    let s = alpha + model.smoothing_gain();
    let denom = 2.0 * s + d as f64;
    (-2.0 * s / denom, -2.0 * (s - 2.0) / denom)
}
