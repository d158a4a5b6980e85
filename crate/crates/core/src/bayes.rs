//! Gaussian-prior posterior for the Darcy conductivity in a truncated
//! Dirichlet-Laplacian eigenbasis, a warm-start initializer and an unadjusted
//! Langevin sampler.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{interpolation_stencil, quadrature_inner, Grid, GridField};
use crate::pde::{from_interior, interior_vector, DarcyOperator};

/// First `D` eigenpairs of the negative Dirichlet Laplacian on the unit cube,
/// sampled on a grid.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    grid: Grid,
    fields: Vec<GridField<f64>>,
    eigenvalues: Vec<f64>,
    modes: Vec<[usize; 2]>,
}

impl EigenBasis {
    /// `e_k = √2 sin(kπx)` in 1-D, tensor products in 2-D ordered by
    /// eigenvalue (ties by mode index). Modes must be resolved by the grid.
    pub fn new(grid: Grid, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("basis dimension must be positive"));
        }
        let n = grid.n();
        let mut modes: Vec<[usize; 2]> = if grid.d() == 1 {
            (1..=dim).map(|k| [k, 0]).collect()
        } else {
            let mut all = Vec::new();
            for a in 1..=dim {
                for b in 1..=dim {
                    all.push([a, b]);
                }
            }
            all.sort_by_key(|m| (m[0] * m[0] + m[1] * m[1], m[0], m[1]));
            all.truncate(dim);
            all
        };
        if modes.iter().any(|m| m[0] > n || m[1] > n) {
            return Err(Error::invalid(format!(
                "basis dimension {dim} needs frequencies beyond the grid (n = {n})"
            )));
        }
        modes.shrink_to_fit();
        let pi = std::f64::consts::PI;
        let fields = modes
            .iter()
            .map(|m| {
                GridField::from_fn(grid, |x: &[f64]| {
                    x.iter()
                        .zip(m)
                        .map(|(&c, &k)| std::f64::consts::SQRT_2 * (k as f64 * pi * c).sin())
                        .product()
                })
            })
            .collect();
        let eigenvalues = modes
            .iter()
            .map(|m| m[..grid.d()].iter().map(|&k| (k as f64 * pi).powi(2)).sum())
            .collect();
        Ok(Self {
            grid,
            fields,
            eigenvalues,
            modes,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, k: usize) -> &GridField<f64> {
        &self.fields[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Frequencies `(k₁, k₂)` of each element (`k₂ = 0` in 1-D).
    pub fn modes(&self) -> &[[usize; 2]] {
        &self.modes
    }

    /// `Σ θ_k e_k` on the grid.
    pub fn synthesize(&self, theta: &[f64]) -> Result<GridField<f64>> {
        self.check_len(theta)?;
        let mut out = vec![0.0; self.grid.len()];
        for (e, &t) in self.fields.iter().zip(theta) {
            for (o, v) in out.iter_mut().zip(e.values()) {
                *o += t * v;
            }
        }
        GridField::new(self.grid, out)
    }

    /// `⟨F, e_k⟩` by trapezoidal quadrature.
    pub fn project(&self, f: &GridField<f64>) -> Result<Vec<f64>> {
        self.fields.iter().map(|e| quadrature_inner(f, e)).collect()
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!(
                "parameter has length {}, basis dimension is {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Prior `N(0, N^{−d/(2α+d)} diag(λ_k^{−α}))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha: f64,
    pub n_samples: usize,
    pub variances: Vec<f64>,
}

impl PriorSpec {
    pub fn new(basis: &EigenBasis, alpha: f64, n_samples: usize) -> Result<Self> {
        if !(alpha > 0.0) || n_samples == 0 {
            return Err(Error::invalid(
                "prior needs alpha > 0 and a positive sample size",
            ));
        }
        let d = basis.grid().d() as f64;
        let scale = (n_samples as f64).powf(-d / (2.0 * alpha + d));
        let variances = basis
            .eigenvalues()
            .iter()
            .map(|l| scale * l.powf(-alpha))
            .collect();
        Ok(Self {
            alpha,
            n_samples,
            variances,
        })
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        -0.5 * theta
            .iter()
            .zip(&self.variances)
            .map(|(t, v)| t * t / v)
            .sum::<f64>()
    }
}

/// Shifted softplus `f = f_min + log(1 + eᶻ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFunction {
    pub f_min: f64,
}

impl LinkFunction {
    pub fn new(f_min: f64) -> Result<Self> {
        if !(f_min > 0.0) || !f_min.is_finite() {
            return Err(Error::invalid(format!(
                "link floor must be positive, got {f_min}"
            )));
        }
        Ok(Self { f_min })
    }

    pub fn apply(&self, z: f64) -> f64 {
        self.f_min + softplus(z)
    }

    /// Derivative, the logistic function; lies in (0, 1).
    pub fn derivative(&self, z: f64) -> f64 {
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    /// Inverse on `(f_min, ∞)`.
    pub fn invert(&self, f: f64) -> Result<f64> {
        let y = f - self.f_min;
        if !(y > 0.0) {
            return Err(Error::invalid(format!(
                "value {f} is not above the link floor {}",
                self.f_min
            )));
        }
        Ok(if y > 30.0 {
            y + (-(-y).exp()).ln_1p()
        } else {
            y.exp_m1().ln()
        })
    }

    pub fn apply_field(&self, z: &GridField<f64>) -> GridField<f64> {
        z.map(|v| self.apply(v))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Log-density with gradient, up to an additive constant.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn value_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Independent Gaussian target, mainly for checking the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl LogDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let grad = theta
            .iter()
            .zip(&self.mean)
            .zip(&self.variances)
            .map(|((t, m), v)| {
                value -= 0.5 * (t - m) * (t - m) / v;
                -(t - m) / v
            })
            .collect();
        Ok((value, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Adjoint,
    FiniteDifference,
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint" => Ok(GradientMode::Adjoint),
            "finite-difference" | "fd" => Ok(GradientMode::FiniteDifference),
            other => Err(Error::invalid(format!(
                "unknown gradient mode '{other}' (expected adjoint or finite-difference)"
            ))),
        }
    }
}

/// Posterior `∝ exp(−Σ_i [Y_i − u_f(X_i)]²/(2s²) − ½θᵀΣ⁻¹θ)` with
/// `f = link(Σ θ_k e_k)` and `u_f` the Darcy solution for the source `g`.
/// The noise scale `s` defaults to 1.
pub struct DarcyPosterior<'a> {
    pub data: &'a Dataset<f64>,
    pub basis: &'a EigenBasis,
    pub link: LinkFunction,
    pub prior: &'a PriorSpec,
    pub g: &'a GridField<f64>,
    pub mode: GradientMode,
    pub noise_sd: f64,
    /// Interpolation stencils of the design points on the basis grid.
    stencils: Vec<Vec<(usize, f64)>>,
}

impl<'a> DarcyPosterior<'a> {
    pub fn new(
        data: &'a Dataset<f64>,
        basis: &'a EigenBasis,
        link: LinkFunction,
        prior: &'a PriorSpec,
        g: &'a GridField<f64>,
        mode: GradientMode,
    ) -> Result<Self> {
        basis.grid().check_same(g.grid())?;
        if prior.variances.len() != basis.dim() {
            return Err(Error::invalid("prior and basis dimensions differ"));
        }
        if data.d != basis.grid().d() {
            return Err(Error::invalid("dataset and basis dimensions differ"));
        }
        data.validate()?;
        let d = data.d;
        let stencils = data
            .x
            .iter()
            .map(|p| interpolation_stencil(basis.grid(), &p[..d]))
            .collect::<Result<_>>()?;
        Ok(Self {
            data,
            basis,
            link,
            prior,
            g,
            mode,
            noise_sd: 1.0,
            stencils,
        })
    }

    pub fn with_noise_sd(mut self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid(format!(
                "noise scale must be positive, got {s}"
            )));
        }
        self.noise_sd = s;
        Ok(self)
    }

    /// Conductivity `f_θ` on the basis grid.
    pub fn conductivity(&self, theta: &[f64]) -> Result<GridField<f64>> {
        Ok(self.link.apply_field(&self.basis.synthesize(theta)?))
    }

    fn forward(
        &self,
        theta: &[f64],
    ) -> Result<(GridField<f64>, DarcyOperator<f64>, GridField<f64>)> {
        let z = self.basis.synthesize(theta)?;
        let f = self.link.apply_field(&z);
        let op = DarcyOperator::new(&f).map_err(|e| e.context("posterior forward solve"))?;
        let u = op.solve(self.g)?;
        Ok((z, op, u))
    }

    fn residuals(&self, u: &GridField<f64>) -> Vec<f64> {
        self.stencils
            .iter()
            .zip(&self.data.y)
            .map(|(st, y)| y - st.iter().map(|&(i, w)| w * u.values()[i]).sum::<f64>())
            .collect()
    }

    fn log_likelihood(&self, u: &GridField<f64>) -> f64 {
        let s2 = self.noise_sd * self.noise_sd;
        -0.5 * self.residuals(u).iter().map(|r| r * r).sum::<f64>() / s2
    }

    /// Log-likelihood alone, for diagnostics.
    pub fn log_likelihood_at(&self, theta: &[f64]) -> Result<f64> {
        let (_, _, u) = self.forward(theta)?;
        Ok(self.log_likelihood(&u))
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let (_, _, u) = self.forward(theta)?;
        Ok(self.log_likelihood(&u) + self.prior.log_density(theta))
    }

    /// Gradient of the log-likelihood through one forward and one adjoint solve.
    fn likelihood_grad_adjoint(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (z, op, u) = self.forward(theta)?;
        let grid = *self.basis.grid();
        let s2 = self.noise_sd * self.noise_sd;
        let res = self.residuals(&u);
        // dℓ/du at every node; boundary values are fixed and drop out.
        let mut b = vec![0.0; grid.len()];
        for (st, r) in self.stencils.iter().zip(&res) {
            for &(i, w) in st {
                b[i] += r * w / s2;
            }
        }
        let b = GridField::new(grid, b)?;
        let lam = from_interior(grid, &op.solve_interior(&interior_vector(&b))?, None);
        // dℓ/df_q = −Σ_p λ_p ∂(∇·(f∇u))_p/∂f_q.
        let h2 = grid.h::<f64>().powi(2);
        let (uv, lv) = (u.values(), lam.values());
        let strides: [usize; 2] = if grid.d() == 1 {
            [1, 0]
        } else {
            [grid.axis_len(), 1]
        };
        let mut gf = vec![0.0; grid.len()];
        for p in grid.interior_indices() {
            for &s in &strides[..grid.d()] {
                let plus = 0.5 * (uv[p + s] - uv[p]) / h2 * lv[p];
                let minus = 0.5 * (uv[p] - uv[p - s]) / h2 * lv[p];
                gf[p] -= plus - minus;
                gf[p + s] -= plus;
                gf[p - s] += minus;
            }
        }
        let chain: Vec<f64> = gf
            .iter()
            .zip(z.values())
            .map(|(g, &zv)| g * self.link.derivative(zv))
            .collect();
        let grad = (0..self.basis.dim())
            .map(|k| {
                chain
                    .iter()
                    .zip(self.basis.field(k).values())
                    .map(|(c, e)| c * e)
                    .sum()
            })
            .collect();
        let s2sum: f64 = res.iter().map(|r| r * r).sum();
        Ok((-0.5 * s2sum / s2, grad))
    }
}

impl LogDensity for DarcyPosterior<'_> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn value_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("parameter is not finite"));
        }
        match self.mode {
            GradientMode::Adjoint => {
                let (ll, mut grad) = self.likelihood_grad_adjoint(theta)?;
                for ((g, t), v) in grad.iter_mut().zip(theta).zip(&self.prior.variances) {
                    *g -= t / v;
                }
                Ok((ll + self.prior.log_density(theta), grad))
            }
            GradientMode::FiniteDifference => {
                let value = self.value(theta)?;
                let mut grad = Vec::with_capacity(theta.len());
                let mut th = theta.to_vec();
                for j in 0..theta.len() {
                    let step = 1e-5 * (1.0 + theta[j].abs());
                    th[j] = theta[j] + step;
                    let up = self.value(&th)?;
                    th[j] = theta[j] - step;
                    let down = self.value(&th)?;
                    th[j] = theta[j];
                    grad.push((up - down) / (2.0 * step));
                }
                Ok((value, grad))
            }
        }
    }
}

/// `θ_init,k = ⟨link⁻¹(max(f̂, f_min + margin)), e_k⟩`.
pub fn warm_start(
    f_hat: &GridField<f64>,
    basis: &EigenBasis,
    link: LinkFunction,
    clamp_margin: f64,
) -> Result<Vec<f64>> {
    basis.grid().check_same(f_hat.grid())?;
    if !(clamp_margin > 0.0) {
        return Err(Error::invalid("clamp margin must be positive"));
    }
    let floor = link.f_min + clamp_margin;
    let z: Vec<f64> = f_hat
        .values()
        .iter()
        .map(|&v| link.invert(v.max(floor)))
        .collect::<Result<_>>()?;
    basis.project(&GridField::new(*basis.grid(), z)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlaConfig {
    pub delta: f64,
    pub steps: usize,
    pub seed: u64,
    /// Chains whose state leaves this ball are aborted.
    #[serde(default = "UlaConfig::default_max_norm")]
    pub max_norm: f64,
}

impl UlaConfig {
    pub fn new(delta: f64, steps: usize, seed: u64) -> Self {
        Self {
            delta,
            steps,
            seed,
            max_norm: Self::default_max_norm(),
        }
    }

    fn default_max_norm() -> f64 {
        1e6
    }
}

/// States `ϑ_1 … ϑ_K` of an unadjusted Langevin chain.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaChain {
    pub samples: Vec<Vec<f64>>,
    pub delta: f64,
    pub seed: u64,
    pub burn_in: usize,
}

/// Default burn-in: the first fifth of the chain.
pub fn default_burn_in(steps: usize) -> usize {
    steps / 5
}

/// `ϑ_{k+1} = ϑ_k + δ∇log π(ϑ_k) + √(2δ)ξ_{k+1}` with standard normal `ξ`.
pub fn ula_run<L: LogDensity>(
    target: &L,
    theta_init: &[f64],
    config: &UlaConfig,
) -> Result<UlaChain> {
    if !(config.delta > 0.0) || !config.delta.is_finite() {
        return Err(Error::invalid(format!(
            "step size must be positive, got {}",
            config.delta
        )));
    }
    if theta_init.len() != target.dim() {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = (2.0 * config.delta).sqrt();
    let mut theta = theta_init.to_vec();
    let mut samples = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        let (_, grad) = target
            .value_and_grad(&theta)
            .map_err(|e| e.context(format!("Langevin step {k}")))?;
        for (t, g) in theta.iter_mut().zip(&grad) {
            let xi: f64 = rng.sample(StandardNormal);
            *t += config.delta * g + noise * xi;
        }
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if !(norm <= config.max_norm) {
            return Err(Error::numerical(
                format!(
                    "Langevin chain diverged at step {} (try a smaller step size)",
                    k + 1
                ),
                norm,
            ));
        }
        samples.push(theta.clone());
    }
    Ok(UlaChain {
        samples,
        delta: config.delta,
        seed: config.seed,
        burn_in: default_burn_in(config.steps),
    })
}

impl UlaChain {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    fn window(&self, burn_in: usize) -> Result<&[Vec<f64>]> {
        if burn_in >= self.samples.len() {
            return Err(Error::invalid(format!(
                "burn-in {burn_in} leaves no samples out of {}",
                self.samples.len()
            )));
        }
        Ok(&self.samples[burn_in..])
    }

    /// CSV with a comment line carrying the chain parameters.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = format!(
            "# D={d} delta={:e} seed={} burn_in={}\n",
            self.delta, self.seed, self.burn_in
        );
        let names: Vec<String> = (1..=d).map(|k| format!("theta_{k}")).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for row in &self.samples {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(s, "{}", vals.join(",")).unwrap();
        }
        s
    }
}

/// Ergodic average of the states after `burn_in`.
pub fn posterior_mean(chain: &UlaChain, burn_in: usize) -> Result<Vec<f64>> {
    let w = chain.window(burn_in)?;
    let mut mean = vec![0.0; chain.dim()];
    for s in w {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let n = w.len() as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// Number of batches used by [`batch_means_se`]. Few long batches keep the
/// batch length above the autocorrelation time of slowly mixing chains.
pub const BATCHES: usize = 25;

/// Monte-Carlo standard error of the ergodic average by non-overlapping
/// batch means over the retained states.
pub fn batch_means_se(chain: &UlaChain, burn_in: usize) -> Result<Vec<f64>> {
    let w = chain.window(burn_in)?;
    let batches = BATCHES;
    if w.len() < 2 * batches {
        return Err(Error::invalid("too few samples for batch means"));
    }
    let size = w.len() / batches;
    let d = chain.dim();
    let means: Vec<Vec<f64>> = (0..batches)
        .map(|b| {
            let mut m = vec![0.0; d];
            for s in &w[b * size..(b + 1) * size] {
                for (a, v) in m.iter_mut().zip(s) {
                    *a += v / size as f64;
                }
            }
            m
        })
        .collect();
    Ok((0..d)
        .map(|k| {
            let col: Vec<f64> = means.iter().map(|m| m[k]).collect();
            let mu = col.iter().sum::<f64>() / batches as f64;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        })
        .collect())
}

/// Largest curvature of `−log π` near `theta`, by power iteration on
/// finite-difference Hessian-vector products.
pub fn curvature_estimate<L: LogDensity>(
    target: &L,
    theta: &[f64],
    iterations: usize,
) -> Result<f64> {
    let d = target.dim();
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let eps = 1e-4 * (1.0 + theta.iter().map(|t| t * t).sum::<f64>().sqrt());
        let shifted = |sign: f64| -> Vec<f64> {
            theta
                .iter()
                .zip(&v)
                .map(|(t, x)| t + sign * eps * x)
                .collect()
        };
        let (_, gp) = target.value_and_grad(&shifted(1.0))?;
        let (_, gm) = target.value_and_grad(&shifted(-1.0))?;
        let hv: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(a, b)| -(a - b) / (2.0 * eps))
            .collect();
        let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numerical("curvature estimate failed", norm));
        }
        est = norm;
        v = hv.iter().map(|x| x / norm).collect();
    }
    Ok(est)
}

/// Default step `0.5/L̂` from [`curvature_estimate`].
pub fn default_step<L: LogDensity>(target: &L, theta: &[f64]) -> Result<f64> {
    Ok(0.5 / curvature_estimate(target, theta, 30)?)
}

/// Chain summary written next to the chain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub dim: usize,
    pub delta: f64,
    pub seed: u64,
    pub steps: usize,
    pub burn_in: usize,
    pub mean: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl PosteriorSummary {
    pub fn from_chain(chain: &UlaChain, burn_in: usize) -> Result<Self> {
        Ok(Self {
            dim: chain.dim(),
            delta: chain.delta,
            seed: chain.seed,
            steps: chain.samples.len(),
            burn_in,
            mean: posterior_mean(chain, burn_in)?,
            standard_errors: batch_means_se(chain, burn_in)?,
        })
    }
}
