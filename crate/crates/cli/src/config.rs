//! Run configuration: a JSON file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use invlab::bayes::GradientMode;
use invlab::estimators::Model;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Plugin,
    Joint,
    Adaptive,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    /// Number of eigenbasis coefficients `D`.
    pub dim: Option<usize>,
    pub steps: Option<usize>,
    /// Langevin step; estimated from the local curvature when absent.
    pub delta: Option<f64>,
    pub burn_in_fraction: Option<f64>,
    /// Floor of the softplus link.
    pub link_floor: Option<f64>,
    pub clamp_margin: Option<f64>,
    pub gradient: Option<GradientMode>,
    /// Likelihood noise scale; defaults to the dataset's noise level.
    pub noise_sd: Option<f64>,
}

/// Every setting any subcommand reads. Absent fields take the command's
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<Model>,
    pub fixture: Option<String>,
    pub alpha: Option<f64>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub est_n: Option<usize>,
    pub fine_n: Option<usize>,
    pub estimator: Option<Estimator>,
    pub c_dim: Option<f64>,
    /// Spline order `m` of the frame.
    pub order: Option<usize>,
    pub beta_min: Option<u32>,
    pub beta_max: Option<u32>,
    pub a: Option<f64>,
    pub alpha_min: Option<f64>,
    pub iters: Option<usize>,
    pub tol: Option<f64>,
    pub jobs: Option<usize>,
    pub pairs: Option<usize>,
    pub f_min: Option<f64>,
    pub g_min: Option<f64>,
    pub c_min: Option<f64>,
    pub mcmc: Option<McmcConfig>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub dump_fields: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// `self` with every field set in `over` replaced (nested blocks merge
    /// key by key).
    pub fn overlay(&self, over: &RunConfig) -> Result<RunConfig, CliError> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, serde_json::to_value(over)?);
        Ok(serde_json::from_value(base)?)
    }

    /// JSON with unset fields omitted, for echoing into output sidecars.
    pub fn to_echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        strip_nulls(&mut v);
        v
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn strip_nulls(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !x.is_null());
        for x in map.values_mut() {
            strip_nulls(x);
        }
        map.retain(|_, x| !matches!(x, Value::Object(m) if m.is_empty()));
    }
}

/// `a:b` is the doubling sequence from `a` to `b`; otherwise a comma list.
pub fn parse_n_grid(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    if let Some((a, b)) = s.split_once(':') {
        let (mut lo, hi) = (num(a)?, num(b)?);
        if lo == 0 || hi < lo {
            return Err(format!("empty doubling range '{s}'"));
        }
        let mut out = Vec::new();
        while lo <= hi {
            out.push(lo);
            lo *= 2;
        }
        Ok(out)
    } else {
        s.split(',').map(num).collect()
    }
}
