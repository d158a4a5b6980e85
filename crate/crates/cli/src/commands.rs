//! Subcommand bodies. Each takes the merged configuration and writes its
//! outputs next to a JSON sidecar that echoes the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use invlab::bayes::{
    default_step, ula_run, warm_start, DarcyPosterior, EigenBasis, GradientMode, LinkFunction,
    PosteriorSummary, PriorSpec, UlaConfig,
};
use invlab::estimators::{
    adaptive_estimate, derive_hyperparams, frames_on, joint_pde_penalized, pde_residual,
    plugin_estimate, AdaptiveOptions, FitReport, JointOptions, Model,
};
use invlab::frame::load_or_build;
use invlab::harness::{
    default_est_n, default_fine_n, ground_truth, rate_benchmark, runtime_benchmark, simulate,
    BenchConfig, SimulationConfig,
};
use invlab::stability::{stability_suite, SuiteConfig};
use invlab::{Dataset, Field, FrameOptions, Grid};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Estimator, RunConfig};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Provenance stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub model: Model,
    pub fixture: String,
    pub d: usize,
    pub n_samples: usize,
    pub sigma: f64,
    pub seed: u64,
    pub fine_n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    pub config: Value,
    pub provenance: Provenance,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required setting '{what}'")))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn default_alpha(model: Model) -> f64 {
    match model {
        Model::Darcy => 3.0,
        Model::Schrodinger => 2.0,
    }
}

fn frame_options(cfg: &RunConfig, d: usize) -> FrameOptions {
    let mut o = FrameOptions::default_for(d);
    if let Some(m) = cfg.order {
        o.order = m;
    }
    o
}

/// Source field on the estimation grid: the fixture's `g` for Darcy, none
/// for Schrödinger (its boundary data do not enter the estimators).
fn source_on(model: Model, fixture: &str, grid: Grid) -> Result<Option<Field>> {
    let fx = ground_truth(model, fixture)?;
    Ok((model == Model::Darcy).then(|| fx.fields(grid).1))
}

pub fn write_dataset_csv(data: &Dataset<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: &[&str] = if data.d == 1 {
        &["x1", "y"]
    } else {
        &["x1", "x2", "y"]
    };
    w.write_record(header)?;
    for (x, y) in data.x.iter().zip(&data.y) {
        let mut rec: Vec<String> = x[..data.d].iter().map(|c| c.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// Reads `x1[,x2],y` rows; the dimension comes from the header.
pub fn read_dataset_csv(path: &Path) -> Result<(usize, Vec<[f64; 2]>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d = match header
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["x1", "y"] => 1,
        ["x1", "x2", "y"] => 2,
        _ => {
            return Err(CliError::Usage(format!(
                "{}: expected header 'x1,y' or 'x1,x2,y', found '{}'",
                path.display(),
                header.join(",")
            )))
        }
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{} row {}: {e}", path.display(), i + 1)))?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage(format!(
                "{} row {}: non-finite value",
                path.display(),
                i + 1
            )));
        }
        let mut x = [0.0; 2];
        x[..d].copy_from_slice(&vals[..d]);
        xs.push(x);
        ys.push(vals[d]);
    }
    Ok((d, xs, ys))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let model = cfg.model.unwrap_or(Model::Darcy);
    let fixture = cfg.fixture.clone().unwrap_or_else(|| "bump".into());
    let d = cfg.d.unwrap_or(1);
    let out = require(cfg.out.clone(), "out")?;
    let mut sc = SimulationConfig::new(
        model,
        &fixture,
        d,
        require(cfg.n, "n")?,
        cfg.sigma.unwrap_or(0.05),
        cfg.seed.unwrap_or(0),
    );
    sc.est_n = cfg.est_n.unwrap_or(sc.est_n);
    sc.fine_n = cfg.fine_n.unwrap_or(sc.fine_n);
    let data = simulate(&sc)?;
    write_file(&out, &write_dataset_csv(&data)?)?;
    let sidecar = DatasetSidecar {
        config: cfg.to_echo(),
        provenance: Provenance {
            model,
            fixture,
            d,
            n_samples: data.len(),
            sigma: data.sigma,
            seed: data.seed,
            fine_n: data.fine_n,
        },
    };
    write_json(&sidecar_path(&out), &sidecar)?;
    Ok(format!("wrote {} samples to {}", data.len(), out.display()))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<String> {
    let path = require(cfg.data.clone(), "data")?;
    let out = require(cfg.out.clone(), "out")?;
    let side_path = sidecar_path(&path);
    let prov = if side_path.exists() {
        let text = fs::read_to_string(&side_path)?;
        let side: DatasetSidecar = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("sidecar {}: {e}", side_path.display())))?;
        Some(side.provenance)
    } else {
        None
    };
    let (d, x, y) = read_dataset_csv(&path)?;
    if let Some(want) = cfg.d.or(prov.as_ref().map(|p| p.d)) {
        if want != d {
            return Err(CliError::Usage(format!(
                "dataset is {d}-dimensional, configuration says {want}"
            )));
        }
    }
    let model = cfg
        .model
        .or(prov.as_ref().map(|p| p.model))
        .unwrap_or(Model::Darcy);
    let fixture = cfg
        .fixture
        .clone()
        .or(prov.as_ref().map(|p| p.fixture.clone()));
    let data = Dataset {
        d,
        x,
        y,
        sigma: prov.as_ref().map_or(f64::NAN, |p| p.sigma),
        seed: prov.as_ref().map_or(0, |p| p.seed),
        fine_n: prov.as_ref().map_or(0, |p| p.fine_n),
        clean: None,
    };
    data.validate()?;

    let alpha = cfg.alpha.unwrap_or(default_alpha(model));
    let c_dim = cfg.c_dim.unwrap_or(4.0);
    let grid = Grid::new(d, cfg.est_n.unwrap_or(default_est_n(d)))?;
    let options = frame_options(cfg, d);
    let g = match (model, &fixture) {
        (Model::Darcy, None) => {
            return Err(CliError::Usage(
                "a Darcy fit needs the fixture that supplies the source g".into(),
            ))
        }
        (_, Some(name)) => source_on(model, name, grid)?,
        (Model::Schrodinger, None) => None,
    };
    let n = data.len();
    let estimator = cfg.estimator.unwrap_or(Estimator::Plugin);
    let (report, u_hat, f_hat) = match estimator {
        Estimator::Plugin => {
            let hp = derive_hyperparams(model, n, alpha, d, c_dim)?;
            let frame = load_or_build(None, grid, hp.j, options)?;
            let fit = plugin_estimate(&data, &frame, g.as_ref(), &hp)?;
            (
                FitReport::from_plugin(&fit, &data)?,
                fit.regression.u_hat,
                fit.inversion.f_hat,
            )
        }
        Estimator::Joint => {
            let hp = derive_hyperparams(model, n, alpha, d, c_dim)?;
            let frame = load_or_build(None, grid, hp.j, options)?;
            let mut jo = JointOptions::default();
            jo.iters = cfg.iters.unwrap_or(jo.iters);
            jo.tol = cfg.tol.unwrap_or(jo.tol);
            let fit = joint_pde_penalized(&data, &frame, g.as_ref(), &hp, &jo)?;
            let res = pde_residual(model, &fit.f_hat, &fit.u_hat, g.as_ref())?;
            (
                FitReport::from_joint(&fit, &hp, &data, Some(res))?,
                fit.u_hat,
                fit.f_hat,
            )
        }
        Estimator::Adaptive => {
            let ao = AdaptiveOptions {
                beta_min: cfg.beta_min.unwrap_or(2),
                beta_max: cfg.beta_max.unwrap_or(4),
                a: cfg.a.unwrap_or(1.0),
                alpha_min: cfg.alpha_min.unwrap_or(2.0),
                c_dim,
            };
            let fit = adaptive_estimate(&data, model, g.as_ref(), &ao, frames_on(grid, options))?;
            (
                FitReport::from_adaptive(&fit, &data)?,
                fit.regression.u_hat,
                fit.inversion.f_hat,
            )
        }
    };
    write_json(&out, &json!({ "config": cfg.to_echo(), "report": report }))?;
    if let Some(dir) = &cfg.dump_fields {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("u_hat.json"), u_hat.to_json()?.as_bytes())?;
        write_file(&dir.join("f_hat.json"), f_hat.to_json()?.as_bytes())?;
    }
    Ok(format!(
        "{} fit on {n} samples: ‖f̂‖ = {:.4}, rss = {:.4e}; report in {}",
        report.estimator,
        report.f_hat_l2,
        report.empirical_rss,
        out.display()
    ))
}

fn bench_config(cfg: &RunConfig) -> Result<BenchConfig> {
    let model = cfg.model.unwrap_or(Model::Darcy);
    let d = cfg.d.unwrap_or(1);
    let mut b = BenchConfig::new(
        model,
        cfg.fixture.as_deref().unwrap_or("bump"),
        cfg.alpha.unwrap_or(default_alpha(model)),
        d,
        require(cfg.n_grid.clone(), "n_grid")?,
        cfg.reps.unwrap_or(20),
    );
    b.sigma = cfg.sigma.unwrap_or(b.sigma);
    b.seed = cfg.seed.unwrap_or(b.seed);
    b.est_n = cfg.est_n.unwrap_or(default_est_n(d));
    b.fine_n = cfg.fine_n.unwrap_or(default_fine_n(d));
    b.c_dim = cfg.c_dim.unwrap_or(b.c_dim);
    b.frame = frame_options(cfg, d);
    b.jobs = cfg.jobs;
    Ok(b)
}

pub fn cmd_bench_rates(cfg: &RunConfig) -> Result<String> {
    let dir = require(cfg.out.clone(), "out")?;
    let table = rate_benchmark(&bench_config(cfg)?)?;
    write_file(&dir.join("rates.csv"), table.to_csv().as_bytes())?;
    write_json(
        &dir.join("rates.json"),
        &json!({
            "config": cfg.to_echo(),
            "slope_u": table.slope_u,
            "slope_f": table.slope_f,
            "theory": { "forward": table.theory.0, "inverse": table.theory.1 },
        }),
    )?;
    Ok(format!(
        "forward slope {:.3} ± {:.3} (theory {:.3}), inverse slope {:.3} ± {:.3} (theory {:.3})",
        table.slope_u.slope,
        table.slope_u.se,
        table.theory.0,
        table.slope_f.slope,
        table.slope_f.se,
        table.theory.1
    ))
}

pub fn cmd_bench_runtime(cfg: &RunConfig) -> Result<String> {
    let dir = require(cfg.out.clone(), "out")?;
    let mut b = bench_config(cfg)?;
    b.reps = cfg.reps.unwrap_or(1);
    let table = runtime_benchmark(&b)?;
    write_file(&dir.join("runtime.csv"), table.to_csv().as_bytes())?;
    write_json(
        &dir.join("runtime.json"),
        &json!({
            "config": cfg.to_echo(),
            "flop_slope": table.flop_slope,
            "wall_slope": table.wall_slope,
            "kappa": table.kappa,
        }),
    )?;
    Ok(format!(
        "flop slope {:.3} (κ = {:.3}), wall slope {:.3}",
        table.flop_slope.slope, table.kappa, table.wall_slope.slope
    ))
}

pub fn cmd_mcmc(cfg: &RunConfig) -> Result<String> {
    let dir = require(cfg.out.clone(), "out")?;
    let model = cfg.model.unwrap_or(Model::Darcy);
    if model != Model::Darcy {
        return Err(CliError::Usage(
            "the Langevin sampler is implemented for the Darcy model only".into(),
        ));
    }
    let mc = cfg.mcmc.clone().unwrap_or_default();
    let d = cfg.d.unwrap_or(1);
    let fixture = cfg.fixture.clone().unwrap_or_else(|| "bump".into());
    let mut sc = SimulationConfig::new(
        model,
        &fixture,
        d,
        cfg.n.unwrap_or(1024),
        cfg.sigma.unwrap_or(0.05),
        cfg.seed.unwrap_or(0),
    );
    sc.est_n = cfg.est_n.unwrap_or(sc.est_n);
    sc.fine_n = cfg.fine_n.unwrap_or(sc.fine_n);
    let data = simulate(&sc)?;

    let alpha = cfg.alpha.unwrap_or(3.0);
    let grid = Grid::new(d, sc.est_n)?;
    let g = source_on(model, &fixture, grid)?.expect("Darcy has a source");
    let hp = derive_hyperparams(model, data.len(), alpha, d, cfg.c_dim.unwrap_or(4.0))?;
    let frame = load_or_build(None, grid, hp.j, frame_options(cfg, d))?;
    let plugin = plugin_estimate(&data, &frame, Some(&g), &hp)?;

    let basis = EigenBasis::new(grid, mc.dim.unwrap_or(8))?;
    let prior = PriorSpec::new(&basis, alpha, data.len())?;
    let link = LinkFunction::new(mc.link_floor.unwrap_or(0.5))?;
    let posterior = DarcyPosterior::new(
        &data,
        &basis,
        link,
        &prior,
        &g,
        mc.gradient.unwrap_or(GradientMode::Adjoint),
    )?
    .with_noise_sd(mc.noise_sd.unwrap_or(data.sigma))?;
    let theta_init = warm_start(
        &plugin.inversion.f_hat,
        &basis,
        link,
        mc.clamp_margin.unwrap_or(0.25),
    )?;

    let steps = mc.steps.unwrap_or(100_000);
    let fraction = mc.burn_in_fraction.unwrap_or(0.2);
    if !(0.0..1.0).contains(&fraction) {
        return Err(CliError::Usage(format!(
            "burn-in fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let delta = match mc.delta {
        Some(dl) => dl,
        None => default_step(&posterior, &theta_init)?,
    };
    let mut chain = ula_run(
        &posterior,
        &theta_init,
        &UlaConfig::new(delta, steps, cfg.seed.unwrap_or(0)),
    )?;
    chain.burn_in = (fraction * steps as f64).floor() as usize;
    let summary = PosteriorSummary::from_chain(&chain, chain.burn_in)?;
    let f_mean = link.apply_field(&basis.synthesize(&summary.mean)?);

    write_file(&dir.join("chain.csv"), chain.to_csv().as_bytes())?;
    write_file(&dir.join("f_mean.json"), f_mean.to_json()?.as_bytes())?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config": cfg.to_echo(),
            "theta_init": theta_init,
            "posterior": summary,
        }),
    )?;
    Ok(format!(
        "{steps} Langevin steps with δ = {delta:.3e}; posterior mean written to {}",
        dir.join("summary.json").display()
    ))
}

pub fn cmd_stability(cfg: &RunConfig) -> Result<String> {
    let out = require(cfg.out.clone(), "out")?;
    let mut sc = SuiteConfig::new(
        cfg.model.unwrap_or(Model::Darcy),
        cfg.d.unwrap_or(1),
        cfg.n.unwrap_or(127),
        cfg.pairs.unwrap_or(100),
        cfg.seed.unwrap_or(0),
    );
    sc.f_min = cfg.f_min.unwrap_or(sc.f_min);
    sc.g_min = cfg.g_min.unwrap_or(sc.g_min);
    sc.c_min = cfg.c_min.unwrap_or(sc.c_min);
    let summary = stability_suite(&sc)?;
    write_file(&out, summary.to_csv().as_bytes())?;
    write_json(
        &sidecar_path(&out),
        &json!({
            "config": cfg.to_echo(),
            "max_ratio": summary.max_ratio,
            "median_ratio": summary.median_ratio,
        }),
    )?;
    Ok(format!(
        "{} pairs: max ratio {:.4}, median {:.4}",
        summary.rows.len(),
        summary.max_ratio,
        summary.median_ratio
    ))
}
