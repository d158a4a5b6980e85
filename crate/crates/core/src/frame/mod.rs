//! Hierarchical multiscale spline frame: basis sampling, level weights,
//! coefficient selection, synthesis and point evaluation.
//!
//! Level `l` consists of the `2^{l+L₀} + m − 1` clamped uniform B-splines of
//! order `m` on `2^{l+L₀}` knot intervals, scaled by `2^{(l+L₀)/2}` so their
//! L² norms are of order one; in two dimensions each level is the tensor
//! product of the one-dimensional level. The levels are nested, so the family
//! is redundant and coefficients are picked by a level-weighted ridge
//! projection (see [`Frame::select`]).

mod bspline;
mod cache;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::numerics::{Grid, GridField};
use crate::scalar::Real;
use bspline::ClampedSplines;

pub use cache::{load_or_build, CACHE_ENV};

/// Construction parameters shared by every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameOptions {
    /// Spline order `m` (degree `m − 1`, smoothness `C^{m−2}`).
    pub order: usize,
    /// Level 0 has `2^base_level` knot intervals per axis.
    pub base_level: usize,
}

impl FrameOptions {
    pub fn new(order: usize, base_level: usize) -> Self {
        FrameOptions { order, base_level }
    }

    /// Order 4; four coarse intervals in 1-D, one in 2-D.
    pub fn default_for(d: usize) -> Self {
        FrameOptions {
            order: 4,
            base_level: if d == 1 { 2 } else { 0 },
        }
    }
}

/// Position of a frame element: level `l` and per-axis translate `k`
/// (0-based; the second entry is 0 in one dimension).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub l: usize,
    pub k: [usize; 2],
}

/// Gram system of one quadrature rule together with its regularized factor.
#[derive(Debug, Clone)]
struct Selector<T> {
    gram: DenseMatrix<T>,
    factor: Cholesky<T>,
}

/// Frame elements up to level `J`, sampled on a grid.
#[derive(Debug, Clone)]
pub struct Frame<T> {
    grid: Grid,
    j: usize,
    options: FrameOptions,
    splines: Vec<ClampedSplines<T>>,
    index: Vec<MultiIndex>,
    level_offsets: Vec<usize>,
    /// Non-zero samples of each element as (node, value).
    samples: Vec<Vec<(u32, T)>>,
    full: Selector<T>,
    interior: Selector<T>,
}

/// Iterated-Tikhonov sweeps applied after the ridge solve in [`Frame::select`].
const REFINE_STEPS: usize = 2;

impl<T: Real> Frame<T> {
    /// Builds the frame with the default options for the grid dimension.
    pub fn build(grid: Grid, j: usize) -> Result<Self> {
        Self::with_options(grid, j, FrameOptions::default_for(grid.d()))
    }

    pub fn with_options(grid: Grid, j: usize, options: FrameOptions) -> Result<Self> {
        let parts = Self::sample(grid, j, options)?;
        let full = Self::selector(&grid, &parts, &grid.weights::<T>())?;
        let interior = Self::selector(&grid, &parts, &grid.interior_weights::<T>())?;
        Ok(Self::assemble(grid, j, options, parts, full, interior))
    }

    pub(crate) fn from_grams(
        grid: Grid,
        j: usize,
        options: FrameOptions,
        full: DenseMatrix<T>,
        interior: DenseMatrix<T>,
    ) -> Result<Self> {
        let parts = Self::sample(grid, j, options)?;
        if full.rows() != parts.index.len() || interior.rows() != parts.index.len() {
            return Err(Error::invalid("cached gram size does not match frame"));
        }
        let full = Self::factorize(&parts, full)?;
        let interior = Self::factorize(&parts, interior)?;
        Ok(Self::assemble(grid, j, options, parts, full, interior))
    }

    fn assemble(
        grid: Grid,
        j: usize,
        options: FrameOptions,
        parts: Sampled<T>,
        full: Selector<T>,
        interior: Selector<T>,
    ) -> Self {
        Frame {
            grid,
            j,
            options,
            splines: parts.splines,
            index: parts.index,
            level_offsets: parts.level_offsets,
            samples: parts.samples,
            full,
            interior,
        }
    }

    fn sample(grid: Grid, j: usize, options: FrameOptions) -> Result<Sampled<T>> {
        let m = options.order;
        if !(4..=12).contains(&m) {
            return Err(Error::invalid(format!(
                "spline order must be in 4..=12, got {m}"
            )));
        }
        let finest = 1usize << (j + options.base_level);
        let need = (finest * 2).max(1 << (j + 3));
        if grid.n() + 1 < need {
            return Err(Error::precondition(format!(
                "grid with n={} is too coarse for level {j} (needs n+1 >= {need})",
                grid.n()
            )));
        }
        let d = grid.d();
        let axis = grid.axis_len();
        let h = grid.h::<T>();
        let mut splines = Vec::with_capacity(j + 1);
        let mut index = Vec::new();
        let mut level_offsets = vec![0];
        let mut samples = Vec::new();
        let mut vals = vec![T::zero(); m];
        for l in 0..=j {
            let nint = 1usize << (l + options.base_level);
            let sp = ClampedSplines::<T>::new(m, nint);
            let scale = T::lit(2f64.powf((l + options.base_level) as f64 / 2.0));
            let count = sp.count();
            // One-dimensional samples of every spline on the axis nodes.
            let mut axis_samples: Vec<Vec<(usize, T)>> = vec![Vec::new(); count];
            for i in 0..axis {
                let x = T::from_usize_lossy(i) * h;
                let first = sp.eval(x, &mut vals);
                for (r, &v) in vals.iter().enumerate() {
                    if v != T::zero() {
                        axis_samples[first + r].push((i, v * scale));
                    }
                }
            }
            if d == 1 {
                for (k, s) in axis_samples.iter().enumerate() {
                    index.push(MultiIndex { l, k: [k, 0] });
                    samples.push(s.iter().map(|&(i, v)| (i as u32, v)).collect());
                }
            } else {
                for (k1, sx) in axis_samples.iter().enumerate() {
                    for (k2, sy) in axis_samples.iter().enumerate() {
                        index.push(MultiIndex { l, k: [k1, k2] });
                        let mut nz = Vec::with_capacity(sx.len() * sy.len());
                        for &(i, vx) in sx {
                            for &(jj, vy) in sy {
                                nz.push((grid.ravel([i, jj]) as u32, vx * vy));
                            }
                        }
                        samples.push(nz);
                    }
                }
            }
            level_offsets.push(index.len());
            splines.push(sp);
        }
        Ok(Sampled {
            splines,
            index,
            level_offsets,
            samples,
        })
    }

    fn selector(grid: &Grid, parts: &Sampled<T>, weights: &[T]) -> Result<Selector<T>> {
        let gram = weighted_gram(grid.len(), &parts.samples, weights);
        Self::factorize(parts, gram)
    }

    fn factorize(parts: &Sampled<T>, gram: DenseMatrix<T>) -> Result<Selector<T>> {
        let p = gram.rows();
        let ridge = ridge_factor::<T>() * gram.trace() / T::from_usize_lossy(p);
        let mut reg = gram.clone();
        let lw: Vec<T> = parts
            .index
            .iter()
            .map(|mi| level_weight(mi.l, T::one()))
            .collect();
        reg.add_diagonal(&lw.iter().map(|&w| w * ridge).collect::<Vec<_>>());
        let factor = reg.cholesky()?;
        Ok(Selector { gram, factor })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Maximal level `J`.
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn options(&self) -> FrameOptions {
        self.options
    }

    /// Total number of elements `p_J`.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Number of elements on level `l`.
    pub fn level_count(&self, l: usize) -> usize {
        self.level_offsets[l + 1] - self.level_offsets[l]
    }

    pub fn multi_index(&self, idx: usize) -> MultiIndex {
        self.index[idx]
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.index.iter().map(|mi| mi.l)
    }

    /// Flat position of `(l, k)`, if it exists.
    pub fn position(&self, mi: MultiIndex) -> Option<usize> {
        if mi.l > self.j {
            return None;
        }
        let per_axis = self.splines[mi.l].count();
        let d = self.grid.d();
        if mi.k[0] >= per_axis || (d == 2 && mi.k[1] >= per_axis) || (d == 1 && mi.k[1] != 0) {
            return None;
        }
        let local = if d == 1 {
            mi.k[0]
        } else {
            mi.k[0] * per_axis + mi.k[1]
        };
        Some(self.level_offsets[mi.l] + local)
    }

    /// Grid samples of element `idx`.
    pub fn basis_field(&self, idx: usize) -> GridField<T> {
        let mut v = vec![T::zero(); self.grid.len()];
        for &(i, x) in &self.samples[idx] {
            v[i as usize] = x;
        }
        GridField::from_raw(self.grid, v)
    }

    /// Non-zero grid samples of element `idx` as (node, value).
    pub fn basis_samples(&self, idx: usize) -> &[(u32, T)] {
        &self.samples[idx]
    }

    /// Quadrature Gram matrix `⟨φ_a, φ_b⟩`.
    pub fn gram(&self) -> &DenseMatrix<T> {
        &self.full.gram
    }

    /// Gram matrix with boundary nodes excluded from the quadrature.
    pub fn interior_gram(&self) -> &DenseMatrix<T> {
        &self.interior.gram
    }

    /// Quadrature inner products `⟨φ_a, w⟩` for every element.
    pub fn inner_products(&self, w: &GridField<T>) -> Result<Vec<T>> {
        self.grid.check_same(w.grid())?;
        let weights = self.grid.weights::<T>();
        Ok(self.moments(w.values(), &weights))
    }

    fn moments(&self, f: &[T], weights: &[T]) -> Vec<T> {
        self.samples
            .iter()
            .map(|nz| {
                nz.iter().fold(T::zero(), |acc, &(i, v)| {
                    acc + v * weights[i as usize] * f[i as usize]
                })
            })
            .collect()
    }

    /// Coefficients of `f`: minimizer of `‖Σ v_a φ_a − f‖² + ε Σ 2^{2l} v_a²`
    /// with a tiny ridge `ε`, followed by iterated-Tikhonov sweeps so that
    /// elements of the span are reproduced to near machine precision.
    pub fn select(&self, f: &GridField<T>) -> Result<Vec<T>> {
        self.grid.check_same(f.grid())?;
        Ok(self.select_with(&self.full, f.values(), &self.grid.weights::<T>()))
    }

    /// As [`Frame::select`] but fitting interior nodes only; used for fields
    /// that carry no information on the boundary (PDE residuals, sources).
    pub fn select_interior(&self, f: &GridField<T>) -> Result<Vec<T>> {
        self.grid.check_same(f.grid())?;
        Ok(self.select_with(
            &self.interior,
            f.values(),
            &self.grid.interior_weights::<T>(),
        ))
    }

    fn select_with(&self, sel: &Selector<T>, f: &[T], weights: &[T]) -> Vec<T> {
        let b = self.moments(f, weights);
        let mut v = sel.factor.solve(&b);
        for _ in 0..REFINE_STEPS {
            let gv = sel.gram.matvec(&v);
            let r: Vec<T> = b.iter().zip(&gv).map(|(&x, &y)| x - y).collect();
            for (vi, di) in v.iter_mut().zip(sel.factor.solve(&r)) {
                *vi += di;
            }
        }
        v
    }

    /// `Σ v_a φ_a` on the frame grid.
    pub fn synthesize(&self, v: &[T]) -> Result<GridField<T>> {
        self.check_len(v)?;
        let mut out = vec![T::zero(); self.grid.len()];
        for (nz, &c) in self.samples.iter().zip(v) {
            if c == T::zero() {
                continue;
            }
            for &(i, x) in nz {
                out[i as usize] += c * x;
            }
        }
        Ok(GridField::from_raw(self.grid, out))
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, frame has {} elements",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[T; 2]) -> Result<()> {
        for &c in &x[..self.grid.d()] {
            if !(c >= T::zero() && c <= T::one()) {
                return Err(Error::invalid(format!(
                    "point coordinate {c} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Non-zero element values at `x` as (element, value), computed from the
    /// spline formulas rather than the grid samples.
    pub fn eval_point(&self, x: &[T; 2]) -> Result<Vec<(usize, T)>> {
        self.check_point(x)?;
        let d = self.grid.d();
        let m = self.options.order;
        let mut out = Vec::with_capacity((self.j + 1) * m.pow(d as u32));
        let mut vx = vec![T::zero(); m];
        let mut vy = vec![T::zero(); m];
        for (l, sp) in self.splines.iter().enumerate() {
            let scale = T::lit(2f64.powf((l + self.options.base_level) as f64 / 2.0));
            let fx = sp.eval(x[0], &mut vx);
            let off = self.level_offsets[l];
            if d == 1 {
                for (r, &v) in vx.iter().enumerate() {
                    if v != T::zero() {
                        out.push((off + fx + r, v * scale));
                    }
                }
            } else {
                let per_axis = sp.count();
                let fy = sp.eval(x[1], &mut vy);
                for (r, &a) in vx.iter().enumerate() {
                    if a == T::zero() {
                        continue;
                    }
                    for (s, &b) in vy.iter().enumerate() {
                        if b != T::zero() {
                            out.push((off + (fx + r) * per_axis + fy + s, a * b * scale * scale));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Design matrix `Φ_{i,a} = φ_a(X_i)`.
    pub fn design_matrix(&self, points: &[[T; 2]]) -> Result<DenseMatrix<T>> {
        let mut phi = DenseMatrix::zeros(points.len(), self.len());
        for (i, x) in points.iter().enumerate() {
            for (a, v) in self.eval_point(x)? {
                phi[(i, a)] = v;
            }
        }
        Ok(phi)
    }

    /// Evaluates `Σ v_a φ_a` at every node of an arbitrary grid of the same
    /// dimension, from the spline formulas.
    pub fn evaluate_on(&self, grid: &Grid, v: &[T]) -> Result<GridField<T>> {
        self.check_len(v)?;
        if grid.d() != self.grid.d() {
            return Err(Error::invalid("evaluation grid has a different dimension"));
        }
        let mut out = vec![T::zero(); grid.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let x = grid.coords::<T>(i);
            *o = self
                .eval_point(&x)?
                .into_iter()
                .fold(T::zero(), |acc, (a, phi)| acc + v[a] * phi);
        }
        Ok(GridField::from_raw(*grid, out))
    }

    /// Diagonal of `Λ^s`: `2^{2ls}` for every element on level `l`.
    pub fn level_weights(&self, s: T) -> Vec<T> {
        self.index.iter().map(|mi| level_weight(mi.l, s)).collect()
    }

    /// `‖v‖_{h^s} = (Σ 2^{2ls} v²)^{1/2}`.
    pub fn h_norm(&self, v: &[T], s: T) -> Result<T> {
        self.check_len(v)?;
        Ok(self
            .index
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (mi, &c)| {
                acc + level_weight(mi.l, s) * c * c
            })
            .sqrt())
    }
}

struct Sampled<T> {
    splines: Vec<ClampedSplines<T>>,
    index: Vec<MultiIndex>,
    level_offsets: Vec<usize>,
    samples: Vec<Vec<(u32, T)>>,
}

/// `2^{2ls}`.
pub fn level_weight<T: Real>(l: usize, s: T) -> T {
    (T::lit(2.0 * l as f64) * s).exp2()
}

/// Relative ridge in the selection system; `1e-10` in double precision and a
/// multiple of machine epsilon for narrower types.
fn ridge_factor<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

fn weighted_gram<T: Real>(
    nodes: usize,
    samples: &[Vec<(u32, T)>],
    weights: &[T],
) -> DenseMatrix<T> {
    let p = samples.len();
    let mut per_node: Vec<Vec<(u32, T)>> = vec![Vec::new(); nodes];
    for (a, nz) in samples.iter().enumerate() {
        for &(i, v) in nz {
            if weights[i as usize] != T::zero() {
                per_node[i as usize].push((a as u32, v));
            }
        }
    }
    let mut g = DenseMatrix::zeros(p, p);
    for (i, list) in per_node.iter().enumerate() {
        let w = weights[i];
        for &(a, va) in list {
            let wa = w * va;
            for &(b, vb) in list {
                if b >= a {
                    g[(a as usize, b as usize)] += wa * vb;
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

/// Smallest `J` with `2^{Jd} ≥ c_dim · N^{d/(2s+d)}` for smoothness `s` of
/// the regression target.
pub fn resolution_level_for(n_samples: usize, s: f64, d: usize, c_dim: f64) -> usize {
    let target = c_dim * (n_samples as f64).powf(d as f64 / (2.0 * s + d as f64));
    let mut j = 0;
    // Small tolerance so exact powers of two are not pushed up by rounding.
    while 2f64.powi((j * d) as i32) < target * (1.0 - 1e-12) {
        j += 1;
    }
    j
}

/// Resolution level for the forward solution of a Darcy-type problem with
/// coefficient smoothness `alpha`: `2^{Jd} ≃ c_dim · N^{d/(2(α+1)+d)}`.
pub fn resolution_level(n_samples: usize, alpha: f64, d: usize, c_dim: f64) -> usize {
    if alpha <= d as f64 / 2.0 + 1.0 {
        log::warn!("smoothness alpha = {alpha} is at or below d/2 + 1");
    }
    resolution_level_for(n_samples, alpha + 1.0, d, c_dim)
}

#[cfg(test)]
mod tests;
