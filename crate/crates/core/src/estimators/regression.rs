use std::time::Instant;

use serde::Serialize;

use super::Hyperparameters;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg::{dot, DenseMatrix};
use crate::numerics::GridField;
use crate::scalar::Real;

/// Penalized least-squares fit of the forward solution.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit<T> {
    pub eta_hat: Vec<T>,
    #[serde(skip)]
    pub u_hat: GridField<T>,
    /// `(1/N)‖Y − Φη̂‖²`.
    pub empirical_rss: T,
    /// `(1/N)‖Y − Φη̂‖² + μ² η̂ᵀΛ^s η̂`.
    pub objective: T,
    /// Penalty weight `μ` and Sobolev exponent `s` used.
    pub mu: f64,
    pub exponent: f64,
    pub flops: u64,
    pub wall_time: f64,
}

/// `η̂ = (ΦᵀΦ + Nμ²Λ^s)⁻¹ΦᵀY` with `s` the model's regression exponent.
pub fn fit_regression<T: Real>(
    data: &Dataset<T>,
    frame: &Frame<T>,
    hp: &Hyperparameters,
) -> Result<RegressionFit<T>> {
    fit_regression_with(data, frame, hp.mu, hp.regression_exponent())
}

/// Regression step for an explicit penalty `μ` and exponent `s`.
pub fn fit_regression_with<T: Real>(
    data: &Dataset<T>,
    frame: &Frame<T>,
    mu: f64,
    exponent: f64,
) -> Result<RegressionFit<T>> {
    let start = Instant::now();
    data.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("regression needs at least one observation"));
    }
    if data.d != frame.grid().d() {
        return Err(Error::invalid("dataset and frame dimensions differ"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "penalty mu must be positive, got {mu}"
        )));
    }
    let n = data.len();
    let p = frame.len();
    let phi = frame.design_matrix(&data.x)?;
    let (eta, rhs_flops) = solve_penalized(&phi, &data.y, mu, exponent, frame)?;
    let (rss, pen) = regression_terms(&phi, &data.y, &eta, frame, exponent);
    let mu2 = T::lit(mu * mu);
    let u_hat = frame.synthesize(&eta)?;
    let (n64, p64) = (n as u64, p as u64);
    let flops = n64 * p64 * p64 + rhs_flops + p64 * p64 * p64 / 3 + 2 * p64 * p64 + 2 * n64 * p64;
    Ok(RegressionFit {
        eta_hat: eta,
        u_hat,
        empirical_rss: rss,
        objective: rss + mu2 * pen,
        mu,
        exponent,
        flops,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn solve_penalized<T: Real>(
    phi: &DenseMatrix<T>,
    y: &[T],
    mu: f64,
    exponent: f64,
    frame: &Frame<T>,
) -> Result<(Vec<T>, u64)> {
    let n = phi.rows();
    let mut a = phi.gram();
    let scale = T::from_usize_lossy(n) * T::lit(mu * mu);
    let lw: Vec<T> = frame
        .level_weights(T::lit(exponent))
        .iter()
        .map(|&w| w * scale)
        .collect();
    a.add_diagonal(&lw);
    let b = phi.tr_matvec(y);
    let eta = a.solve_spd(&b)?;
    Ok((eta, (n * phi.cols()) as u64))
}

/// `((1/N)‖Y − Φη‖², ηᵀΛ^s η)`.
pub(crate) fn regression_terms<T: Real>(
    phi: &DenseMatrix<T>,
    y: &[T],
    eta: &[T],
    frame: &Frame<T>,
    exponent: f64,
) -> (T, T) {
    let fitted = phi.matvec(eta);
    let rss = fitted
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (&f, &v)| acc + (v - f) * (v - f))
        / T::from_usize_lossy(y.len().max(1));
    let lw = frame.level_weights(T::lit(exponent));
    let weighted: Vec<T> = lw.iter().zip(eta).map(|(&w, &e)| w * e).collect();
    (rss, dot(&weighted, eta))
}
