use std::collections::BTreeMap;

use serde::Serialize;

use super::inversion::{build_psi, fit_inversion_with, pde_residual, target_gamma, InversionFit};
use super::regression::{fit_regression_with, RegressionFit};
use super::Model;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::frame::{resolution_level_for, Frame};
use crate::numerics::{Grid, GridField};
use crate::scalar::Real;

/// Smoothness range and constants of the adaptive estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveOptions {
    pub beta_min: u32,
    pub beta_max: u32,
    /// Offset `A` added to the penalty (`μ²(‖u‖² + A²)`).
    pub a: f64,
    /// Smoothness used in the inversion penalty.
    pub alpha_min: f64,
    pub c_dim: f64,
}

/// One candidate of the smoothness sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BetaCandidate {
    pub beta: u32,
    pub j: usize,
    pub mu: f64,
    /// Achieved objective including `μ²A²`.
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveFit<T> {
    pub beta_hat: u32,
    pub candidates: Vec<BetaCandidate>,
    pub regression: RegressionFit<T>,
    pub inversion: InversionFit<T>,
    /// Level of the frame used at `β̂`.
    pub j: usize,
}

/// Regression fits for every integer `β` in `[beta_min, beta_max]` with
/// `μ_β = N^{−β/(2β+d)}` and a matched resolution level; `β̂` minimizes the
/// achieved objective plus `μ_β² A²` (ties go to the larger `β`). The
/// coefficient is then inverted at smoothness `alpha_min` with
/// `ν = N^{−(β̂−2)/(2β̂+d)}`.
///
/// `frame_for(J)` supplies the frame at level `J` on the estimation grid.
pub fn adaptive_estimate<T: Real>(
    data: &Dataset<T>,
    model: Model,
    g: Option<&GridField<T>>,
    options: &AdaptiveOptions,
    mut frame_for: impl FnMut(usize) -> Result<Frame<T>>,
) -> Result<AdaptiveFit<T>> {
    let AdaptiveOptions {
        beta_min,
        beta_max,
        a,
        alpha_min,
        c_dim,
    } = *options;
    if beta_min < 2 || beta_min > beta_max {
        return Err(Error::invalid(format!(
            "smoothness range [{beta_min}, {beta_max}] is empty or starts below 2"
        )));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!(
            "offset A must be positive, got {a}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid(
            "adaptive estimator needs at least 2 observations",
        ));
    }
    let d = data.d;
    let nf = n as f64;
    let mut frames: BTreeMap<usize, Frame<T>> = BTreeMap::new();
    let mut candidates = Vec::new();
    let mut best: Option<(u32, usize, RegressionFit<T>, f64)> = None;
    for beta in beta_min..=beta_max {
        let b = beta as f64;
        let mu = nf.powf(-b / (2.0 * b + d as f64));
        let j = resolution_level_for(n, b, d, c_dim);
        if let std::collections::btree_map::Entry::Vacant(e) = frames.entry(j) {
            e.insert(frame_for(j)?);
        }
        let frame = &frames[&j];
        let fit = fit_regression_with(data, frame, mu, b)?;
        let objective = fit.objective.to_f64_lossy() + mu * mu * a * a;
        candidates.push(BetaCandidate {
            beta,
            j,
            mu,
            objective,
        });
        // `<=` sends ties to the larger smoothness.
        if best.as_ref().is_none_or(|(_, _, _, o)| objective <= *o) {
            best = Some((beta, j, fit, objective));
        }
    }
    let (beta_hat, j, regression, _) = best.expect("non-empty range");
    let frame = &frames[&j];
    let b = beta_hat as f64;
    let nu = nf.powf(-(b - 2.0) / (2.0 * b + d as f64));
    let psi = build_psi(frame, &regression.u_hat, model)?;
    let gamma = target_gamma(frame, model, &regression.u_hat, g)?;
    let mut inversion = fit_inversion_with(frame, &psi, &gamma, nu, alpha_min)?;
    inversion.pde_residual = Some(pde_residual(model, &inversion.f_hat, &regression.u_hat, g)?);
    Ok(AdaptiveFit {
        beta_hat,
        candidates,
        regression,
        inversion,
        j,
    })
}

/// Frame provider building every level on one grid with fixed options.
pub fn frames_on<T: Real>(
    grid: Grid,
    options: crate::frame::FrameOptions,
) -> impl FnMut(usize) -> Result<Frame<T>> {
    move |j| crate::frame::load_or_build(None, grid, j, options)
}
