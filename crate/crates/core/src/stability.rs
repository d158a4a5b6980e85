//! Diagnostics for generalized stability estimates: how well the coefficient
//! mismatch `‖f₁−f₂‖` is controlled by the solution mismatch plus the
//! violation of the PDE relation, for pairs that need not lie on the range of
//! the forward map.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::Model;
use crate::frame::{Frame, FrameOptions};
use crate::numerics::{discrete_norm, interior_l2, quadrature_inner, Grid, GridField, NormKind};
use crate::pde::{
    darcy_apply, darcy_solve, schrodinger_apply, schrodinger_solve, DarcyProblem,
    SchrodingerProblem,
};

/// Absolute interior residual, relative to `max(1, ‖g‖∞)`, below which a
/// triplet counts as satisfying its PDE relation.
pub const PDE_TOLERANCE: f64 = 1e-8;

/// `(u, f, g)` with `∇·(f∇u) = g` (Darcy) or `½Δu − f u = g` (Schrödinger,
/// where `g` is the interior residual `h`).
#[derive(Debug, Clone)]
pub struct Triplet {
    pub u: GridField<f64>,
    pub f: GridField<f64>,
    pub g: GridField<f64>,
}

impl Triplet {
    pub fn new(u: GridField<f64>, f: GridField<f64>, g: GridField<f64>) -> Result<Self> {
        u.grid().check_same(f.grid())?;
        u.grid().check_same(g.grid())?;
        Ok(Self { u, f, g })
    }

    /// Darcy triplet whose `g` is defined by applying the operator.
    pub fn darcy_consistent(u: GridField<f64>, f: GridField<f64>) -> Result<Self> {
        let g = darcy_apply(&f, &u)?;
        Self::new(u, f, g)
    }

    /// Schrödinger triplet whose residual `h` is defined by applying the operator.
    pub fn schrodinger_consistent(u: GridField<f64>, f: GridField<f64>) -> Result<Self> {
        let h = schrodinger_apply(&f, &u)?;
        Self::new(u, f, h)
    }

    fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `‖f₁−f₂‖_{L²}`.
    pub lhs: f64,
    /// `‖f₂‖_{C¹}·‖u₁−u₂‖_{H²}` (Darcy) or `‖u₁−u₂‖_{H²}` (Schrödinger).
    pub term_u: f64,
    /// `‖g₁−g₂‖_{L²}` over interior nodes.
    pub term_g: f64,
    /// `lhs/(term_u+term_g)`; 0 when everything vanishes, `∞` when only the
    /// denominator does.
    pub ratio: f64,
}

impl StabilityReport {
    fn new(lhs: f64, term_u: f64, term_g: f64) -> Self {
        let denom = term_u + term_g;
        let ratio = if denom > 0.0 {
            lhs / denom
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Self {
            lhs,
            term_u,
            term_g,
            ratio,
        }
    }
}

fn check_relation(name: &str, residual: &GridField<f64>, g: &GridField<f64>) -> Result<()> {
    let r = residual
        .zip_with(g, |a, b| a - b)?
        .interior_part()
        .max_abs();
    let scale = g.interior_part().max_abs().max(1.0);
    if r > PDE_TOLERANCE * scale {
        return Err(Error::precondition(format!(
            "{name} does not satisfy its PDE relation (interior residual {r:.3e})"
        )));
    }
    Ok(())
}

fn pair_terms(t1: &Triplet, t2: &Triplet) -> Result<(f64, f64, GridField<f64>)> {
    t1.grid().check_same(t2.grid())?;
    let df = &t1.f - &t2.f;
    let lhs = quadrature_inner(&df, &df)?.sqrt();
    let term_g = interior_l2(&(&t1.g - &t2.g));
    Ok((lhs, term_g, &t1.u - &t2.u))
}

/// Darcy stability report. Ellipticity, the source lower bound and the zero
/// boundary condition are required of the reference triplet `t1` only.
pub fn darcy_stability_gap(
    t1: &Triplet,
    t2: &Triplet,
    f_min: f64,
    g_min: f64,
) -> Result<StabilityReport> {
    if !(f_min > 0.0) || !(g_min > 0.0) {
        return Err(Error::invalid("f_min and g_min must be positive"));
    }
    if t1.f.min() < f_min {
        return Err(Error::precondition(format!(
            "reference conductivity min {:.4} is below f_min = {f_min}",
            t1.f.min()
        )));
    }
    if t1.g.interior_min() < g_min {
        return Err(Error::precondition(format!(
            "reference source min {:.4} is below g_min = {g_min}",
            t1.g.interior_min()
        )));
    }
    if t1.u.boundary_max_abs() > PDE_TOLERANCE {
        return Err(Error::precondition(
            "reference solution does not vanish on the boundary",
        ));
    }
    check_relation("triplet 1", &darcy_apply(&t1.f, &t1.u)?, &t1.g)?;
    check_relation("triplet 2", &darcy_apply(&t2.f, &t2.u)?, &t2.g)?;
    let (lhs, term_g, du) = pair_terms(t1, t2)?;
    let term_u = discrete_norm(&t2.f, NormKind::C1)? * discrete_norm(&du, NormKind::H2)?;
    Ok(StabilityReport::new(lhs, term_u, term_g))
}

/// Schrödinger stability report; both solutions must stay above `c_min`.
pub fn schrodinger_stability_gap(
    t1: &Triplet,
    t2: &Triplet,
    c_min: f64,
) -> Result<StabilityReport> {
    if !(c_min > 0.0) {
        return Err(Error::invalid("c_min must be positive"));
    }
    for (k, t) in [t1, t2].iter().enumerate() {
        if t.u.min() < c_min {
            return Err(Error::precondition(format!(
                "solution {} has minimum {:.4} below c_min = {c_min}",
                k + 1,
                t.u.min()
            )));
        }
    }
    check_relation("triplet 1", &schrodinger_apply(&t1.f, &t1.u)?, &t1.g)?;
    check_relation("triplet 2", &schrodinger_apply(&t2.f, &t2.u)?, &t2.g)?;
    let (lhs, term_g, du) = pair_terms(t1, t2)?;
    let term_u = discrete_norm(&du, NormKind::H2)?;
    Ok(StabilityReport::new(lhs, term_u, term_g))
}

/// Potential recovered pointwise from a positive solution: `f = (½Δu − h)/u`
/// at interior nodes (boundary nodes are zero).
pub fn potential_from_solution(u: &GridField<f64>, h: &GridField<f64>) -> Result<GridField<f64>> {
    let half_lap = schrodinger_apply(&GridField::zeros(*u.grid()), u)?;
    let grid = *u.grid();
    let mut out = vec![0.0; grid.len()];
    for i in grid.interior_indices() {
        let ui = u.values()[i];
        if !(ui > 0.0) {
            return Err(Error::precondition(format!(
                "solution is not positive at node {i}"
            )));
        }
        out[i] = (half_lap.values()[i] - h.values()[i]) / ui;
    }
    GridField::new(grid, out)
}

/// `τ² = ‖u − u₀‖²_N + penalty` from candidate values at the design points.
/// The target is the noiseless `u₀(X_i)` when the dataset carries it, the
/// responses `Y_i` otherwise.
pub fn discrepancy_tau_at(candidate: &[f64], penalty: f64, data: &Dataset<f64>) -> Result<f64> {
    if !(penalty >= 0.0) {
        return Err(Error::invalid(format!(
            "penalty must be non-negative, got {penalty}"
        )));
    }
    if candidate.len() != data.len() || data.is_empty() {
        return Err(Error::invalid(
            "candidate values must match a non-empty dataset",
        ));
    }
    let target = data.clean.as_deref().unwrap_or(&data.y);
    let sq: f64 = candidate
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / data.len() as f64 + penalty)
}

/// [`discrepancy_tau_at`] with the candidate interpolated from a grid field.
pub fn discrepancy_tau(u: &GridField<f64>, penalty: f64, data: &Dataset<f64>) -> Result<f64> {
    let d = u.grid().d();
    let values: Vec<f64> = data
        .x
        .iter()
        .map(|p| u.interpolate(&p[..d]))
        .collect::<Result<_>>()?;
    discrepancy_tau_at(&values, penalty, data)
}

/// Parameters of a random-pair suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub model: Model,
    pub d: usize,
    /// Interior nodes per axis.
    pub n: usize,
    pub pairs: usize,
    pub seed: u64,
    /// Darcy: lower bound on `f₁` and `g₁`. Schrödinger: lower bound on `u₁, u₂`.
    pub f_min: f64,
    pub g_min: f64,
    pub c_min: f64,
}

impl SuiteConfig {
    pub fn new(model: Model, d: usize, n: usize, pairs: usize, seed: u64) -> Self {
        Self {
            model,
            d,
            n,
            pairs,
            seed,
            f_min: 1.0,
            g_min: 1.0,
            c_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub seed: u64,
    /// Whether both triplets solve their PDE with the same `g` (term_g ≈ 0).
    pub on_range: bool,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

impl SuiteSummary {
    fn from_rows(rows: Vec<SuiteRow>) -> Self {
        let mut ratios: Vec<f64> = rows.iter().map(|r| r.report.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let median = if ratios.is_empty() {
            f64::NAN
        } else if ratios.len() % 2 == 1 {
            ratios[ratios.len() / 2]
        } else {
            0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
        };
        Self {
            max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
            median_ratio: median,
            rows,
        }
    }

    /// Every ratio finite and the largest within `factor` times the median.
    pub fn bounded(&self, factor: f64) -> bool {
        self.rows.iter().all(|r| r.report.ratio.is_finite())
            && self.max_ratio <= factor * self.median_ratio
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("seed,lhs,term_u,term_g,ratio\n");
        for r in &self.rows {
            let p = r.report;
            writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.seed, p.lhs, p.term_u, p.term_g, p.ratio
            )
            .unwrap();
        }
        s
    }
}

/// Smooth random fields: low-order frame expansions with level-decaying
/// Gaussian coefficients, normalized to unit discrete C¹ norm on a fixed
/// reference grid so that one seed gives the same function on every grid.
pub struct RandomFields {
    frame: Frame<f64>,
    reference: Grid,
}

impl RandomFields {
    pub fn new(d: usize) -> Result<Self> {
        let (base, j) = if d == 1 { (1, 1) } else { (0, 1) };
        let frame = Frame::with_options(Grid::new(d, 31)?, j, FrameOptions::new(4, base))?;
        let reference = Grid::new(d, if d == 1 { 511 } else { 127 })?;
        Ok(Self { frame, reference })
    }

    /// Draws a field with `‖·‖_{C¹} = 1` and evaluates it on `grid`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, grid: &Grid) -> Result<GridField<f64>> {
        let coeffs: Vec<f64> = self
            .frame
            .levels()
            .map(|l| {
                let z: f64 = rng.sample(StandardNormal);
                z * 0.25f64.powi(l as i32)
            })
            .collect();
        let norm = discrete_norm(
            &self.frame.evaluate_on(&self.reference, &coeffs)?,
            NormKind::C1,
        )?;
        let scaled: Vec<f64> = coeffs.iter().map(|c| c / norm).collect();
        self.frame.evaluate_on(grid, &scaled)
    }
}

/// Runs `pairs` random pairs. Even seeds perturb `u` freely (off the range of
/// the forward map), odd seeds re-solve with the reference `g` (on the range).
pub fn stability_suite(config: &SuiteConfig) -> Result<SuiteSummary> {
    if config.pairs == 0 {
        return Err(Error::invalid("suite needs at least one pair"));
    }
    let grid = Grid::new(config.d, config.n)?;
    let fields = RandomFields::new(config.d)?;
    let rows = (0..config.pairs)
        .into_par_iter()
        .map(|k| {
            let seed = config.seed.wrapping_add(k as u64);
            let on_range = k % 2 == 1;
            let report = match config.model {
                Model::Darcy => darcy_pair(config, &grid, &fields, seed, on_range),
                Model::Schrodinger => schrodinger_pair(config, &grid, &fields, seed, on_range),
            }
            .map_err(|e| e.context(format!("pair seed {seed}")))?;
            Ok(SuiteRow {
                seed,
                on_range,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteSummary::from_rows(rows))
}

fn darcy_pair(
    config: &SuiteConfig,
    grid: &Grid,
    fields: &RandomFields,
    seed: u64,
    on_range: bool,
) -> Result<StabilityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (f_min, g_min) = (config.f_min, config.g_min);
    let f1 = fields.draw(&mut rng, grid)?.map(|v| f_min + 0.5 + 0.45 * v);
    let g1 = fields.draw(&mut rng, grid)?.map(|v| g_min + 1.0 + 0.9 * v);
    let u1 = darcy_solve(&DarcyProblem::new(f1.clone(), g1.clone())?)?;
    let t_f: f64 = rng.random_range(0.05..0.4);
    let f2 = &f1 + &fields.draw(&mut rng, grid)?.scale(t_f);
    let t1 = Triplet::new(u1.clone(), f1, g1.clone())?;
    let t2 = if on_range {
        let u2 = darcy_solve(&DarcyProblem::new(f2.clone(), g1.clone())?)?;
        Triplet::new(u2, f2, g1)?
    } else {
        let t_u: f64 = rng.random_range(0.02..0.2) * t_f * u1.max_abs();
        let u2 = &u1 + &fields.draw(&mut rng, grid)?.scale(t_u);
        Triplet::darcy_consistent(u2, f2)?
    };
    darcy_stability_gap(&t1, &t2, f_min, g_min)
}

fn schrodinger_pair(
    config: &SuiteConfig,
    grid: &Grid,
    fields: &RandomFields,
    seed: u64,
    on_range: bool,
) -> Result<StabilityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boundary = GridField::constant(*grid, 1.0);
    let f1 = fields.draw(&mut rng, grid)?.map(|v| 1.0 + 0.9 * v);
    let u1 = schrodinger_solve(&SchrodingerProblem::new(f1.clone(), boundary.clone())?)?;
    let t_f: f64 = rng.random_range(0.05..0.4);
    let f2 = &f1 + &fields.draw(&mut rng, grid)?.scale(t_f);
    let t1 = Triplet::schrodinger_consistent(u1.clone(), f1)?;
    let t2 = if on_range {
        let u2 = schrodinger_solve(&SchrodingerProblem::new(f2.clone(), boundary)?)?;
        Triplet::schrodinger_consistent(u2, f2)?
    } else {
        let t_u: f64 = rng.random_range(0.02..0.2) * t_f;
        let u2 = &u1 + &fields.draw(&mut rng, grid)?.scale(t_u);
        Triplet::schrodinger_consistent(u2, f2)?
    };
    schrodinger_stability_gap(&t1, &t2, config.c_min)
}
