//! Plug-in, PDE-penalized and adaptive estimators of the solution `u` and
//! the coefficient `f` from point observations. These only ever apply the
//! differential operators; no forward solve is involved.

mod adaptive;
mod hyper;
mod inversion;
mod joint;
mod plugin;
mod regression;
mod report;

pub use adaptive::{adaptive_estimate, frames_on, AdaptiveFit, AdaptiveOptions, BetaCandidate};
pub use hyper::{derive_hyperparams, kappa, theoretical_slopes, Hyperparameters, Model};
pub use inversion::{
    build_psi, fit_inversion, fit_inversion_with, pde_residual, target_gamma, InversionFit,
};
pub use joint::{joint_objective, joint_pde_penalized, JointFit, JointOptions};
pub use plugin::{plugin_estimate, psi_flops, PluginFit};
pub use regression::{fit_regression, fit_regression_with, RegressionFit};
pub use report::FitReport;
