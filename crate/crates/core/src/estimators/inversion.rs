use std::time::Instant;

use serde::Serialize;

use super::{Hyperparameters, Model};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg::DenseMatrix;
use crate::numerics::{interior_l2, GridField};
use crate::pde::{darcy_apply, schrodinger_apply};
use crate::scalar::Real;

/// Coefficient estimate from the linearized PDE residual.
#[derive(Debug, Clone, Serialize)]
pub struct InversionFit<T> {
    pub theta_hat: Vec<T>,
    #[serde(skip)]
    pub f_hat: GridField<T>,
    /// Interior `L²` norm of `L_{f̂} û − g` (Darcy) or `L_{f̂} û` (Schrödinger),
    /// when the plug-in driver computed it.
    pub pde_residual: Option<T>,
    pub nu: f64,
    pub flops: u64,
    pub wall_time: f64,
}

/// `Ψ` with column `a` equal to the interior selection of `L_{φ_a} û`
/// (Darcy) or of `−φ_a û` (Schrödinger). Linear in `û`.
pub fn build_psi<T: Real>(
    frame: &Frame<T>,
    u_hat: &GridField<T>,
    model: Model,
) -> Result<DenseMatrix<T>> {
    frame.grid().check_same(u_hat.grid())?;
    let p = frame.len();
    let mut psi = DenseMatrix::zeros(p, p);
    for a in 0..p {
        let phi = frame.basis_field(a);
        let col = match model {
            Model::Darcy => darcy_apply(&phi, u_hat)?,
            Model::Schrodinger => phi.zip_with(u_hat, |a, b| -(a * b))?,
        };
        psi.set_column(a, &frame.select_interior(&col)?);
    }
    Ok(psi)
}

/// Target `γ`: interior selection of the source `g` (Darcy) or of `−½Δû`
/// (Schrödinger, whose interior equation has zero right-hand side).
pub fn target_gamma<T: Real>(
    frame: &Frame<T>,
    model: Model,
    u_hat: &GridField<T>,
    g: Option<&GridField<T>>,
) -> Result<Vec<T>> {
    match model {
        Model::Darcy => {
            let g = g.ok_or_else(|| Error::invalid("the Darcy model needs a source field g"))?;
            frame.select_interior(g)
        }
        Model::Schrodinger => {
            let zero = GridField::zeros(*frame.grid());
            let half_lap = schrodinger_apply(&zero, u_hat)?;
            Ok(frame
                .select_interior(&half_lap)?
                .into_iter()
                .map(|v| -v)
                .collect())
        }
    }
}

/// `θ̂ = (ΨᵀΨ + ν²Λ^α)⁻¹Ψᵀγ`.
pub fn fit_inversion<T: Real>(
    frame: &Frame<T>,
    psi: &DenseMatrix<T>,
    gamma: &[T],
    hp: &Hyperparameters,
) -> Result<InversionFit<T>> {
    fit_inversion_with(frame, psi, gamma, hp.nu, hp.alpha)
}

pub fn fit_inversion_with<T: Real>(
    frame: &Frame<T>,
    psi: &DenseMatrix<T>,
    gamma: &[T],
    nu: f64,
    alpha: f64,
) -> Result<InversionFit<T>> {
    let start = Instant::now();
    let p = frame.len();
    if psi.rows() != p || psi.cols() != p || gamma.len() != p {
        return Err(Error::invalid(
            "inversion system does not match the frame size",
        ));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::invalid(format!(
            "penalty nu must be positive, got {nu}"
        )));
    }
    let mut a = psi.gram();
    let lw: Vec<T> = frame
        .level_weights(T::lit(alpha))
        .iter()
        .map(|&w| w * T::lit(nu * nu))
        .collect();
    a.add_diagonal(&lw);
    let b = psi.tr_matvec(gamma);
    let theta = a.solve_spd(&b)?;
    let f_hat = frame.synthesize(&theta)?;
    let p64 = p as u64;
    let flops = p64 * p64 * p64 + p64 * p64 / 3 * p64 + 4 * p64 * p64;
    Ok(InversionFit {
        theta_hat: theta,
        f_hat,
        pde_residual: None,
        nu,
        flops,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Interior `L²` norm of the PDE residual of `(f, u)`.
pub fn pde_residual<T: Real>(
    model: Model,
    f: &GridField<T>,
    u: &GridField<T>,
    g: Option<&GridField<T>>,
) -> Result<T> {
    let r = match model {
        Model::Darcy => {
            let g = g.ok_or_else(|| Error::invalid("the Darcy model needs a source field g"))?;
            &darcy_apply(f, u)? - g
        }
        Model::Schrodinger => schrodinger_apply(f, u)?,
    };
    Ok(interior_l2(&r))
}
