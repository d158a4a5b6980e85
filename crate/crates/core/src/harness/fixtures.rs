//! Analytic ground truths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::Model;
use crate::numerics::{Grid, GridField};

/// A coefficient `f₀` together with the Darcy source or Schrödinger boundary
/// data it is paired with.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Fixture {
    pub name: &'static str,
    pub model: Model,
    /// Lower bound of `f₀` over the closed domain.
    pub f_min: f64,
    pub description: &'static str,
    #[serde(skip)]
    f0: fn(&[f64]) -> f64,
    /// Darcy source, or Schrödinger boundary values.
    #[serde(skip)]
    g: fn(&[f64]) -> f64,
}

fn bump(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|c| (c - 0.5).powi(2)).sum();
    1.0 + 0.5 * (-r2 / 0.02).exp()
}

fn wave_source(x: &[f64]) -> f64 {
    2.0 + x
        .iter()
        .map(|c| (2.0 * std::f64::consts::PI * c).sin())
        .product::<f64>()
}

const REGISTRY: &[Fixture] = &[
    Fixture {
        name: "constant",
        model: Model::Darcy,
        f_min: 2.0,
        description: "f0 = 2, g = 2 + sin(2 pi x); analytic",
        f0: |_| 2.0,
        g: wave_source,
    },
    Fixture {
        name: "bump",
        model: Model::Darcy,
        f_min: 1.0,
        description: "f0 = 1 + exp(-|x - 1/2|^2 / 0.02) / 2, g = 2 + sin(2 pi x); analytic, min 1 + e^{-12.5}/2 on [0,1]",
        f0: bump,
        g: wave_source,
    },
    Fixture {
        name: "smooth",
        model: Model::Darcy,
        f_min: 1.0,
        description: "f0 = 1 + prod sin^2(pi x_i) / 2, g = 2 + sin(2 pi x); entire function",
        f0: |x| 1.0 + 0.5 * x.iter().map(|c| (std::f64::consts::PI * c).sin().powi(2)).product::<f64>(),
        g: wave_source,
    },
    Fixture {
        name: "wave",
        model: Model::Darcy,
        f_min: 1.0,
        description: "f0 = 1.5 + 0.3 sin(2 pi x) + 0.2 cos(3 pi x) (first axis), g = 2 + sin(2 pi x); entire function",
        f0: |x| {
            use std::f64::consts::PI;
            1.5 + 0.3 * (2.0 * PI * x[0]).sin() + 0.2 * (3.0 * PI * x[0]).cos()
        },
        g: wave_source,
    },
    Fixture {
        name: "zero",
        model: Model::Schrodinger,
        f_min: 0.0,
        description: "f0 = 0, boundary data 1; solution u = 1",
        f0: |_| 0.0,
        g: |_| 1.0,
    },
    Fixture {
        name: "constant",
        model: Model::Schrodinger,
        f_min: 1.0,
        description: "f0 = 1, boundary data 1",
        f0: |_| 1.0,
        g: |_| 1.0,
    },
    Fixture {
        name: "bump",
        model: Model::Schrodinger,
        f_min: 1.0,
        description: "f0 = 1 + exp(-|x - 1/2|^2 / 0.02) / 2, boundary data 1; analytic",
        f0: bump,
        g: |_| 1.0,
    },
];

/// Every registered fixture.
pub fn registry() -> &'static [Fixture] {
    REGISTRY
}

/// Looks up a fixture by model and name.
pub fn ground_truth(model: Model, name: &str) -> Result<Fixture> {
    REGISTRY
        .iter()
        .find(|f| f.model == model && f.name == name)
        .copied()
        .ok_or_else(|| {
            let names: Vec<&str> = REGISTRY
                .iter()
                .filter(|f| f.model == model)
                .map(|f| f.name)
                .collect();
            Error::invalid(format!(
                "unknown {model} fixture '{name}' (registry: {})",
                names.join(", ")
            ))
        })
}

impl Fixture {
    pub fn f0_at(&self, x: &[f64]) -> f64 {
        (self.f0)(x)
    }

    pub fn g_at(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    /// `(f₀, g)` sampled on `grid`; for Schrödinger `g` carries the boundary
    /// data (interior values are the same formula and unused).
    pub fn fields(&self, grid: Grid) -> (GridField<f64>, GridField<f64>) {
        (
            GridField::from_fn(grid, |x: &[f64]| (self.f0)(x)),
            GridField::from_fn(grid, |x: &[f64]| (self.g)(x)),
        )
    }
}
