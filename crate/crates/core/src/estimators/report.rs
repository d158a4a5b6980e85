use serde::{Deserialize, Serialize};

use super::{AdaptiveFit, Hyperparameters, JointFit, PluginFit};
use crate::data::Dataset;
use crate::error::Result;
use crate::numerics::{discrete_norm, GridField, NormKind};
use crate::scalar::Real;

/// JSON summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimator: String,
    pub hyperparameters: Option<Hyperparameters>,
    pub n_samples: usize,
    pub seed: u64,
    pub sigma: f64,
    pub u_hat_l2: f64,
    pub f_hat_l2: f64,
    pub f_hat_min: f64,
    pub f_hat_max: f64,
    pub empirical_rss: f64,
    pub pde_residual: Option<f64>,
    pub flops: Option<u64>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_hat: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
    pub eta_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
}

fn to64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

struct Fields<'a, T> {
    u: &'a GridField<T>,
    f: &'a GridField<T>,
}

impl<T: Real> Fields<'_, T> {
    fn norms(&self) -> Result<(f64, f64, f64, f64)> {
        Ok((
            discrete_norm(self.u, NormKind::L2)?.to_f64_lossy(),
            discrete_norm(self.f, NormKind::L2)?.to_f64_lossy(),
            self.f.min().to_f64_lossy(),
            self.f.max().to_f64_lossy(),
        ))
    }
}

impl FitReport {
    pub fn from_plugin<T: Real>(fit: &PluginFit<T>, data: &Dataset<T>) -> Result<Self> {
        let (ul2, fl2, fmin, fmax) = Fields {
            u: &fit.regression.u_hat,
            f: &fit.inversion.f_hat,
        }
        .norms()?;
        Ok(FitReport {
            estimator: "plugin".into(),
            hyperparameters: Some(fit.hyperparameters),
            n_samples: data.len(),
            seed: data.seed,
            sigma: data.sigma,
            u_hat_l2: ul2,
            f_hat_l2: fl2,
            f_hat_min: fmin,
            f_hat_max: fmax,
            empirical_rss: fit.regression.empirical_rss.to_f64_lossy(),
            pde_residual: fit.inversion.pde_residual.map(|r| r.to_f64_lossy()),
            flops: Some(fit.flops),
            wall_time: fit.wall_time,
            beta_hat: None,
            objective_trace: None,
            eta_hat: to64(&fit.regression.eta_hat),
            theta_hat: to64(&fit.inversion.theta_hat),
        })
    }

    pub fn from_joint<T: Real>(
        fit: &JointFit<T>,
        hp: &Hyperparameters,
        data: &Dataset<T>,
        pde_residual: Option<T>,
    ) -> Result<Self> {
        let (ul2, fl2, fmin, fmax) = Fields {
            u: &fit.u_hat,
            f: &fit.f_hat,
        }
        .norms()?;
        Ok(FitReport {
            estimator: "joint".into(),
            hyperparameters: Some(*hp),
            n_samples: data.len(),
            seed: data.seed,
            sigma: data.sigma,
            u_hat_l2: ul2,
            f_hat_l2: fl2,
            f_hat_min: fmin,
            f_hat_max: fmax,
            empirical_rss: fit.empirical_rss.to_f64_lossy(),
            pde_residual: pde_residual.map(|r| r.to_f64_lossy()),
            flops: None,
            wall_time: fit.wall_time,
            beta_hat: None,
            objective_trace: Some(to64(&fit.objective_trace)),
            eta_hat: to64(&fit.eta_hat),
            theta_hat: to64(&fit.theta_hat),
        })
    }

    pub fn from_adaptive<T: Real>(fit: &AdaptiveFit<T>, data: &Dataset<T>) -> Result<Self> {
        let (ul2, fl2, fmin, fmax) = Fields {
            u: &fit.regression.u_hat,
            f: &fit.inversion.f_hat,
        }
        .norms()?;
        Ok(FitReport {
            estimator: "adaptive".into(),
            hyperparameters: None,
            n_samples: data.len(),
            seed: data.seed,
            sigma: data.sigma,
            u_hat_l2: ul2,
            f_hat_l2: fl2,
            f_hat_min: fmin,
            f_hat_max: fmax,
            empirical_rss: fit.regression.empirical_rss.to_f64_lossy(),
            pde_residual: fit.inversion.pde_residual.map(|r| r.to_f64_lossy()),
            flops: Some(fit.regression.flops + fit.inversion.flops),
            wall_time: fit.regression.wall_time + fit.inversion.wall_time,
            beta_hat: Some(fit.beta_hat),
            objective_trace: None,
            eta_hat: to64(&fit.regression.eta_hat),
            theta_hat: to64(&fit.inversion.theta_hat),
        })
    }
}
