//! Synthetic observations from a fine-grid forward solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fixtures::{ground_truth, Fixture};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::Model;
use crate::numerics::{interpolation_stencil, Grid, GridField};
use crate::pde::{darcy_solve, schrodinger_solve, DarcyProblem, SchrodingerProblem};

/// Default interior points per axis of the estimation grid.
pub fn default_est_n(d: usize) -> usize {
    if d == 1 {
        511
    } else {
        63
    }
}

/// Default interior points per axis of the data-generation grid (four times
/// finer than the estimation grid).
pub fn default_fine_n(d: usize) -> usize {
    4 * (default_est_n(d) + 1) - 1
}

/// Rejects data-generation grids that are not at least four times finer
/// than the estimation grid.
pub fn check_grid_separation(est_n: usize, fine_n: usize) -> Result<()> {
    if fine_n + 1 < 4 * (est_n + 1) {
        return Err(Error::invalid(format!(
            "data grid (n={fine_n}) must be at least 4x finer than the estimation grid (n={est_n})"
        )));
    }
    Ok(())
}

/// Ground truth solved once on the fine grid.
#[derive(Debug, Clone)]
pub struct Truth {
    pub model: Model,
    pub fixture: Fixture,
    pub f0: GridField<f64>,
    pub g: GridField<f64>,
    pub u0: GridField<f64>,
}

impl Truth {
    pub fn solve(model: Model, fixture_name: &str, d: usize, fine_n: usize) -> Result<Self> {
        let fixture = ground_truth(model, fixture_name)?;
        let grid = Grid::new(d, fine_n)?;
        let (f0, g) = fixture.fields(grid);
        let u0 = match model {
            Model::Darcy => darcy_solve(&DarcyProblem::new(f0.clone(), g.clone())?)?,
            Model::Schrodinger => {
                schrodinger_solve(&SchrodingerProblem::new(f0.clone(), g.clone())?)?
            }
        };
        Ok(Truth {
            model,
            fixture,
            f0,
            g,
            u0,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    /// `N` observations `Y_i = u₀(X_i) + σ ε_i` with `X_i` uniform in the open
    /// cube (linear interpolation of the fine-grid solution). Points are drawn
    /// before the noise, so `σ = 0` and `σ > 0` with one seed share designs.
    pub fn sample(&self, n_samples: usize, sigma: f64, seed: u64) -> Result<Dataset<f64>> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise level must be non-negative, got {sigma}"
            )));
        }
        let d = self.grid().d();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let open = |rng: &mut ChaCha8Rng| loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                return v;
            }
        };
        let x: Vec<[f64; 2]> = (0..n_samples)
            .map(|_| {
                let a = open(&mut rng);
                let b = if d == 2 { open(&mut rng) } else { 0.0 };
                [a, b]
            })
            .collect();
        let clean: Vec<f64> = x
            .iter()
            .map(|p| {
                interpolation_stencil(self.grid(), &p[..d])
                    .map(|st| st.iter().map(|&(i, w)| w * self.u0.values()[i]).sum())
            })
            .collect::<Result<_>>()?;
        let y = clean
            .iter()
            .map(|&c| {
                let e: f64 = rng.sample(StandardNormal);
                c + sigma * e
            })
            .collect();
        let ds = Dataset {
            d,
            x,
            y,
            sigma,
            seed,
            fine_n: self.grid().n(),
            clean: Some(clean),
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// Parameters of [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: Model,
    pub fixture: String,
    pub d: usize,
    pub n_samples: usize,
    pub sigma: f64,
    pub seed: u64,
    pub est_n: usize,
    pub fine_n: usize,
}

impl SimulationConfig {
    pub fn new(
        model: Model,
        fixture: &str,
        d: usize,
        n_samples: usize,
        sigma: f64,
        seed: u64,
    ) -> Self {
        SimulationConfig {
            model,
            fixture: fixture.to_string(),
            d,
            n_samples,
            sigma,
            seed,
            est_n: default_est_n(d),
            fine_n: default_fine_n(d),
        }
    }
}

/// Solves the fixture on the fine grid and samples noisy observations.
pub fn simulate(config: &SimulationConfig) -> Result<Dataset<f64>> {
    check_grid_separation(config.est_n, config.fine_n)?;
    Truth::solve(config.model, &config.fixture, config.d, config.fine_n)?.sample(
        config.n_samples,
        config.sigma,
        config.seed,
    )
}
