use std::time::Instant;

use serde::Serialize;

use super::regression::{fit_regression, regression_terms};
use super::{Hyperparameters, Model};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg::DenseMatrix;
use crate::numerics::GridField;
use crate::pde::{darcy_apply, schrodinger_apply};
use crate::scalar::Real;

/// Stopping rule and initialization of the alternating minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointOptions {
    pub iters: usize,
    /// Stop once the relative objective decrease of an iteration is below this.
    pub tol: f64,
    /// Constant the coefficient is initialized at (Darcy ellipticity floor).
    pub f_init: f64,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            iters: 50,
            tol: 1e-8,
            f_init: 1.0,
        }
    }
}

/// Result of the PDE-penalized estimator.
#[derive(Debug, Clone, Serialize)]
pub struct JointFit<T> {
    pub eta_hat: Vec<T>,
    pub theta_hat: Vec<T>,
    #[serde(skip)]
    pub u_hat: GridField<T>,
    #[serde(skip)]
    pub f_hat: GridField<T>,
    /// Objective after initialization and after every full iteration.
    pub objective_trace: Vec<T>,
    /// `(1/N)‖Y − Φη̂‖²` at the final iterate.
    pub empirical_rss: T,
    pub iterations: usize,
    pub wall_time: f64,
}

/// Everything the objective needs besides the coefficients.
struct Problem<'a, T> {
    frame: &'a Frame<T>,
    phi: DenseMatrix<T>,
    y: &'a [T],
    /// Interior right-hand side of the PDE (zero for Schrödinger).
    rhs: Vec<T>,
    model: Model,
    lambda2_hd: T,
    mu2: T,
    s_u: f64,
    alpha: f64,
}

impl<T: Real> Problem<'_, T> {
    /// Interior values of `L_f u` as a dense `(n_int × p)` matrix in the
    /// coefficients of `u` (f fixed).
    fn operator_in_u(&self, f: &GridField<T>) -> Result<DenseMatrix<T>> {
        self.columns(|phi| match self.model {
            Model::Darcy => darcy_apply(f, phi),
            Model::Schrodinger => schrodinger_apply(f, phi),
        })
    }

    /// `L_f u` is affine in the coefficients of `f` (u fixed): `B θ + c`.
    fn operator_in_f(&self, u: &GridField<T>) -> Result<(DenseMatrix<T>, Vec<T>)> {
        match self.model {
            Model::Darcy => Ok((
                self.columns(|phi| darcy_apply(phi, u))?,
                vec![T::zero(); self.rhs.len()],
            )),
            Model::Schrodinger => {
                let b = self.columns(|phi| phi.zip_with(u, |a, b| -(a * b)))?;
                let zero = GridField::zeros(*u.grid());
                Ok((b, self.interior(&schrodinger_apply(&zero, u)?)))
            }
        }
    }

    fn columns(
        &self,
        op: impl Fn(&GridField<T>) -> Result<GridField<T>>,
    ) -> Result<DenseMatrix<T>> {
        let grid = self.frame.grid();
        let rows = self.rhs.len();
        let mut m = DenseMatrix::zeros(rows, self.frame.len());
        for a in 0..self.frame.len() {
            let col = op(&self.frame.basis_field(a))?;
            for (r, i) in grid.interior_indices().enumerate() {
                m[(r, a)] = col.values()[i];
            }
        }
        Ok(m)
    }

    fn interior(&self, f: &GridField<T>) -> Vec<T> {
        f.grid().interior_indices().map(|i| f.values()[i]).collect()
    }

    fn objective(&self, eta: &[T], theta: &[T]) -> Result<T> {
        let u = self.frame.synthesize(eta)?;
        let f = self.frame.synthesize(theta)?;
        let lu = match self.model {
            Model::Darcy => darcy_apply(&f, &u)?,
            Model::Schrodinger => schrodinger_apply(&f, &u)?,
        };
        let res = self
            .interior(&lu)
            .iter()
            .zip(&self.rhs)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        let (rss, pen_u) = regression_terms(&self.phi, self.y, eta, self.frame, self.s_u);
        let lw = self.frame.level_weights(T::lit(self.alpha));
        let pen_f = lw
            .iter()
            .zip(theta)
            .fold(T::zero(), |acc, (&w, &t)| acc + w * t * t);
        Ok(rss + self.lambda2_hd * res + self.mu2 * (pen_u + pen_f))
    }

    /// Exact minimizer over `η` for fixed `f`.
    fn u_step(&self, theta: &[T]) -> Result<Vec<T>> {
        let f = self.frame.synthesize(theta)?;
        let a = self.operator_in_u(&f)?;
        let inv_n = T::one() / T::from_usize_lossy(self.y.len());
        let mut h = DenseMatrix::zeros(self.frame.len(), self.frame.len());
        combine(&mut h, &self.phi.gram(), inv_n);
        combine(&mut h, &a.gram(), self.lambda2_hd);
        let lw: Vec<T> = self
            .frame
            .level_weights(T::lit(self.s_u))
            .iter()
            .map(|&w| w * self.mu2)
            .collect();
        h.add_diagonal(&lw);
        let mut b: Vec<T> = self
            .phi
            .tr_matvec(self.y)
            .iter()
            .map(|&v| v * inv_n)
            .collect();
        for (bi, ai) in b.iter_mut().zip(a.tr_matvec(&self.rhs)) {
            *bi += self.lambda2_hd * ai;
        }
        h.solve_spd(&b)
    }

    /// Exact minimizer over `θ` for fixed `u`.
    fn f_step(&self, eta: &[T]) -> Result<Vec<T>> {
        let u = self.frame.synthesize(eta)?;
        let (b, c) = self.operator_in_f(&u)?;
        let mut h = DenseMatrix::zeros(self.frame.len(), self.frame.len());
        combine(&mut h, &b.gram(), self.lambda2_hd);
        let lw: Vec<T> = self
            .frame
            .level_weights(T::lit(self.alpha))
            .iter()
            .map(|&w| w * self.mu2)
            .collect();
        h.add_diagonal(&lw);
        let target: Vec<T> = self.rhs.iter().zip(&c).map(|(&r, &ci)| r - ci).collect();
        let rhs: Vec<T> = b
            .tr_matvec(&target)
            .iter()
            .map(|&v| v * self.lambda2_hd)
            .collect();
        h.solve_spd(&rhs)
    }
}

fn combine<T: Real>(h: &mut DenseMatrix<T>, add: &DenseMatrix<T>, w: T) {
    for i in 0..h.rows() {
        for (x, &y) in h.row_mut(i).iter_mut().zip(add.row(i)) {
            *x += w * y;
        }
    }
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(
        data: &'a Dataset<T>,
        frame: &'a Frame<T>,
        g: Option<&GridField<T>>,
        hp: &Hyperparameters,
    ) -> Result<Self> {
        data.validate()?;
        if data.is_empty() {
            return Err(Error::invalid(
                "joint estimator needs at least one observation",
            ));
        }
        let grid = *frame.grid();
        let rhs = match hp.model {
            Model::Darcy => {
                let g =
                    g.ok_or_else(|| Error::invalid("the Darcy model needs a source field g"))?;
                grid.check_same(g.grid())?;
                grid.interior_indices().map(|i| g.values()[i]).collect()
            }
            Model::Schrodinger => vec![T::zero(); grid.interior_indices().count()],
        };
        let hd = grid.h::<T>().powi(grid.d() as i32);
        Ok(Problem {
            frame,
            phi: frame.design_matrix(&data.x)?,
            y: &data.y,
            rhs,
            model: hp.model,
            lambda2_hd: T::lit(hp.lambda * hp.lambda) * hd,
            mu2: T::lit(hp.mu * hp.mu),
            s_u: hp.regression_exponent(),
            alpha: hp.alpha,
        })
    }
}

/// Value of the PDE-penalized objective
/// `(1/N)‖Y − Φη‖² + λ²‖L_f u − g‖² + μ²(ηᵀΛ^{s}η + θᵀΛ^{α}θ)`, with the
/// residual measured in interior `L²`.
pub fn joint_objective<T: Real>(
    data: &Dataset<T>,
    frame: &Frame<T>,
    g: Option<&GridField<T>>,
    hp: &Hyperparameters,
    eta: &[T],
    theta: &[T],
) -> Result<T> {
    Problem::new(data, frame, g, hp)?.objective(eta, theta)
}

/// Alternating exact minimization of the joint objective over `u` and `f`
/// (each block is a quadratic problem). Starts from the regression fit for
/// `u` and the selected constant `f_init` for `f`; the `u` block is updated
/// first. The objective is biconvex, so only monotone descent is guaranteed.
pub fn joint_pde_penalized<T: Real>(
    data: &Dataset<T>,
    frame: &Frame<T>,
    g: Option<&GridField<T>>,
    hp: &Hyperparameters,
    options: &JointOptions,
) -> Result<JointFit<T>> {
    let start = Instant::now();
    if options.iters == 0 {
        return Err(Error::invalid(
            "joint estimator needs at least one iteration",
        ));
    }
    if !(options.tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let prob = Problem::new(data, frame, g, hp)?;
    let mut eta = fit_regression(data, frame, hp)?.eta_hat;
    let mut theta = frame.select(&GridField::constant(*frame.grid(), T::lit(options.f_init)))?;
    let mut current = prob.objective(&eta, &theta)?;
    let mut trace = vec![current];
    let slack = T::lit(1e-12);
    let check = |before: T, after: T, what: &str| -> Result<()> {
        if after > before + slack * (T::one() + before.abs()) {
            return Err(Error::numerical(
                format!("joint objective increased in the {what} step"),
                (after - before).to_f64_lossy(),
            ));
        }
        Ok(())
    };
    let mut iterations = 0;
    for _ in 0..options.iters {
        iterations += 1;
        eta = prob.u_step(&theta)?;
        let after_u = prob.objective(&eta, &theta)?;
        check(current, after_u, "u")?;
        theta = prob.f_step(&eta)?;
        let after_f = prob.objective(&eta, &theta)?;
        check(after_u, after_f, "f")?;
        trace.push(after_f);
        let decrease = current - after_f;
        current = after_f;
        if decrease <= T::lit(options.tol) * current.abs().max(T::min_positive_value()) {
            break;
        }
    }
    let (empirical_rss, _) = regression_terms(&prob.phi, &data.y, &eta, frame, prob.s_u);
    Ok(JointFit {
        empirical_rss,
        u_hat: frame.synthesize(&eta)?,
        f_hat: frame.synthesize(&theta)?,
        eta_hat: eta,
        theta_hat: theta,
        objective_trace: trace,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
