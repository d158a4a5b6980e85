//! Convergence-rate and operation-count benchmarks of the plug-in estimator.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::{check_grid_separation, default_est_n, default_fine_n, Truth};
use super::stats::{derive_seed, loglog, mean_and_se, SlopeFit};
use crate::error::{Error, Result};
use crate::estimators::{derive_hyperparams, kappa, plugin_estimate, theoretical_slopes, Model};
use crate::frame::{load_or_build, Frame, FrameOptions};
use crate::numerics::{quadrature_inner, Grid, GridField};

/// Configuration shared by the rate and runtime benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub model: Model,
    pub fixture: String,
    pub alpha: f64,
    pub d: usize,
    pub sigma: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub est_n: usize,
    pub fine_n: usize,
    pub c_dim: f64,
    pub frame: FrameOptions,
    /// Worker threads for replications (`None`: rayon default).
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl BenchConfig {
    pub fn new(
        model: Model,
        fixture: &str,
        alpha: f64,
        d: usize,
        n_grid: Vec<usize>,
        reps: usize,
    ) -> Self {
        BenchConfig {
            model,
            fixture: fixture.to_string(),
            alpha,
            d,
            sigma: 0.05,
            n_grid,
            reps,
            seed: 0,
            est_n: default_est_n(d),
            fine_n: default_fine_n(d),
            c_dim: 4.0,
            frame: FrameOptions::default_for(d),
            jobs: None,
        }
    }

    /// Checks the sample-size grid (≥ 4 increasing values over ≥ 3 octaves),
    /// the replication count (≥ `min_reps`) and the grid separation.
    pub fn validate(&self, min_reps: usize) -> Result<()> {
        if self.n_grid.len() < 4 {
            return Err(Error::invalid("benchmark needs at least 4 sample sizes"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sample sizes must be strictly increasing"));
        }
        let (lo, hi) = (self.n_grid[0], *self.n_grid.last().unwrap());
        if lo < 2 || (hi as f64) < 8.0 * lo as f64 {
            return Err(Error::invalid("sample sizes must span at least 3 octaves"));
        }
        if self.reps < min_reps {
            return Err(Error::invalid(format!(
                "need at least {min_reps} replications, got {}",
                self.reps
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("noise level must be non-negative"));
        }
        check_grid_separation(self.est_n, self.fine_n)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))
    }
}

/// Monte-Carlo summary at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub replications: usize,
    pub j: usize,
    pub mse_u: f64,
    pub se_u: f64,
    pub mse_f: f64,
    pub se_f: f64,
    pub flops: u64,
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub slope_u: SlopeFit,
    pub slope_f: SlopeFit,
    /// Theoretical `(forward, inverse)` slopes.
    pub theory: (f64, f64),
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,replications,j,mse_u,se_u,mse_f,se_f,flops,wall\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{:e},{:e},{:e},{:e},{},{:e}",
                r.n, r.replications, r.j, r.mse_u, r.se_u, r.mse_f, r.se_f, r.flops, r.wall
            )
            .unwrap();
        }
        s
    }
}

/// Squared `L²` distance on the fine grid between the frame expansion `v`
/// and the reference field.
fn fine_error(frame: &Frame<f64>, v: &[f64], reference: &GridField<f64>) -> Result<f64> {
    let est = frame.evaluate_on(reference.grid(), v)?;
    let diff = &est - reference;
    quadrature_inner(&diff, &diff)
}

struct Replicate {
    err_u: f64,
    err_f: f64,
    flops: u64,
    wall: f64,
}

/// Frames for every level needed by the sample-size grid.
fn frames_for(
    config: &BenchConfig,
    levels: impl Iterator<Item = usize>,
) -> Result<BTreeMap<usize, Frame<f64>>> {
    let grid = Grid::new(config.d, config.est_n)?;
    let mut out = BTreeMap::new();
    for j in levels {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(j) {
            e.insert(load_or_build(None, grid, j, config.frame)?);
        }
    }
    Ok(out)
}

/// Mean squared errors of `û` and `f̂` against the fixture over a grid of
/// sample sizes, with log-log slope fits.
pub fn rate_benchmark(config: &BenchConfig) -> Result<RateTable> {
    config.validate(10)?;
    let truth = Truth::solve(config.model, &config.fixture, config.d, config.fine_n)?;
    let est_grid = Grid::new(config.d, config.est_n)?;
    let (_, g_est) = truth.fixture.fields(est_grid);
    let g = (config.model == Model::Darcy).then_some(&g_est);
    let hps: Vec<_> = config
        .n_grid
        .iter()
        .map(|&n| derive_hyperparams(config.model, n, config.alpha, config.d, config.c_dim))
        .collect::<Result<_>>()?;
    let frames = frames_for(config, hps.iter().map(|h| h.j))?;
    let pool = config.pool()?;
    let mut rows = Vec::new();
    for hp in &hps {
        let frame = &frames[&hp.j];
        let n = hp.n_samples;
        let reps: Vec<Replicate> = pool.install(|| {
            (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = derive_seed(config.seed, n, rep);
                    let run = || -> Result<Replicate> {
                        let start = Instant::now();
                        let data = truth.sample(n, config.sigma, seed)?;
                        let fit = plugin_estimate(&data, frame, g, hp)?;
                        Ok(Replicate {
                            err_u: fine_error(frame, &fit.regression.eta_hat, &truth.u0)?,
                            err_f: fine_error(frame, &fit.inversion.theta_hat, &truth.f0)?,
                            flops: fit.flops,
                            wall: start.elapsed().as_secs_f64(),
                        })
                    };
                    run().map_err(|e| e.context(format!("replication N={n} seed={seed}")))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let eu: Vec<f64> = reps.iter().map(|r| r.err_u).collect();
        let ef: Vec<f64> = reps.iter().map(|r| r.err_f).collect();
        let (mse_u, se_u) = mean_and_se(&eu);
        let (mse_f, se_f) = mean_and_se(&ef);
        rows.push(RateRow {
            n,
            replications: reps.len(),
            j: hp.j,
            mse_u,
            se_u,
            mse_f,
            se_f,
            flops: reps[0].flops,
            wall: reps.iter().map(|r| r.wall).sum::<f64>() / reps.len() as f64,
        });
        log::info!("N={n} J={} mse_u={mse_u:.3e} mse_f={mse_f:.3e}", hp.j);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let slope_u = loglog(&ns, &rows.iter().map(|r| r.mse_u).collect::<Vec<_>>());
    let slope_f = loglog(&ns, &rows.iter().map(|r| r.mse_f).collect::<Vec<_>>());
    Ok(RateTable {
        rows,
        slope_u,
        slope_f,
        theory: theoretical_slopes(config.model, config.alpha, config.d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub n: usize,
    pub j: usize,
    pub p: usize,
    pub flops: u64,
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeTable {
    pub rows: Vec<RuntimeRow>,
    pub flop_slope: SlopeFit,
    /// Informational only; depends on the machine.
    pub wall_slope: SlopeFit,
    /// `κ = 1 + 2d/(2(α+1)+d)`.
    pub kappa: f64,
}

impl RuntimeTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,j,p,flops,wall\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{},{:e}", r.n, r.j, r.p, r.flops, r.wall).unwrap();
        }
        s
    }
}

/// Operation counts and wall times of one plug-in fit per sample size.
pub fn runtime_benchmark(config: &BenchConfig) -> Result<RuntimeTable> {
    config.validate(1)?;
    let truth = Truth::solve(config.model, &config.fixture, config.d, config.fine_n)?;
    let est_grid = Grid::new(config.d, config.est_n)?;
    let (_, g_est) = truth.fixture.fields(est_grid);
    let g = (config.model == Model::Darcy).then_some(&g_est);
    let hps: Vec<_> = config
        .n_grid
        .iter()
        .map(|&n| derive_hyperparams(config.model, n, config.alpha, config.d, config.c_dim))
        .collect::<Result<_>>()?;
    let frames = frames_for(config, hps.iter().map(|h| h.j))?;
    let mut rows = Vec::new();
    for hp in &hps {
        let frame = &frames[&hp.j];
        let seed = derive_seed(config.seed, hp.n_samples, 0);
        let data = truth.sample(hp.n_samples, config.sigma, seed)?;
        let fit = plugin_estimate(&data, frame, g, hp)
            .map_err(|e| e.context(format!("N={} seed={seed}", hp.n_samples)))?;
        rows.push(RuntimeRow {
            n: hp.n_samples,
            j: hp.j,
            p: frame.len(),
            flops: fit.flops,
            wall: fit.wall_time,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let flop_slope = loglog(
        &ns,
        &rows.iter().map(|r| r.flops as f64).collect::<Vec<_>>(),
    );
    let wall_slope = loglog(
        &ns,
        &rows.iter().map(|r| r.wall.max(1e-9)).collect::<Vec<_>>(),
    );
    Ok(RuntimeTable {
        rows,
        flop_slope,
        wall_slope,
        kappa: kappa(config.alpha, config.d),
    })
}
