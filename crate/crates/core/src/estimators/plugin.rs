use std::time::Instant;

use serde::Serialize;

use super::inversion::{build_psi, fit_inversion, pde_residual, target_gamma, InversionFit};
use super::regression::{fit_regression, RegressionFit};
use super::Hyperparameters;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::numerics::GridField;
use crate::scalar::Real;

/// Output of the two-stage plug-in estimator.
#[derive(Debug, Clone, Serialize)]
pub struct PluginFit<T> {
    pub hyperparameters: Hyperparameters,
    pub regression: RegressionFit<T>,
    pub inversion: InversionFit<T>,
    /// Operation count of the whole pipeline under a dense cost model.
    pub flops: u64,
    pub wall_time: f64,
}

/// Dense cost of assembling `Ψ`: one stencil application and one selection
/// (ridge solve plus refinement sweeps) per column.
pub fn psi_flops<T: Real>(frame: &Frame<T>) -> u64 {
    let p = frame.len() as u64;
    let nodes = frame.grid().len() as u64;
    p * (8 * nodes + 6 * p * p)
}

/// Regression for `û`, then the linear inversion for `f̂`. `g` is the Darcy
/// source (unused for Schrödinger). The forward solver is never called.
pub fn plugin_estimate<T: Real>(
    data: &Dataset<T>,
    frame: &Frame<T>,
    g: Option<&GridField<T>>,
    hp: &Hyperparameters,
) -> Result<PluginFit<T>> {
    let start = Instant::now();
    if data.len() != hp.n_samples {
        return Err(Error::invalid(format!(
            "dataset has {} samples, hyperparameters were derived for {}",
            data.len(),
            hp.n_samples
        )));
    }
    if frame.j() != hp.j {
        return Err(Error::invalid(format!(
            "frame has level {}, hyperparameters ask for {}",
            frame.j(),
            hp.j
        )));
    }
    if let Some(g) = g {
        frame.grid().check_same(g.grid())?;
    }
    let regression = fit_regression(data, frame, hp)?;
    let psi = build_psi(frame, &regression.u_hat, hp.model)?;
    let gamma = target_gamma(frame, hp.model, &regression.u_hat, g)?;
    let mut inversion = fit_inversion(frame, &psi, &gamma, hp)?;
    inversion.pde_residual = Some(pde_residual(
        hp.model,
        &inversion.f_hat,
        &regression.u_hat,
        g,
    )?);
    let flops = regression.flops + psi_flops(frame) + inversion.flops;
    Ok(PluginFit {
        hyperparameters: *hp,
        regression,
        inversion,
        flops,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
