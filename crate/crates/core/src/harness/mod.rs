//! Ground truths, synthetic data and benchmarks.

mod bench;
mod fixtures;
mod simulate;
mod stats;

pub use crate::data::Dataset;
pub use bench::{
    rate_benchmark, runtime_benchmark, BenchConfig, RateRow, RateTable, RuntimeRow, RuntimeTable,
};
pub use fixtures::{ground_truth, registry, Fixture};
pub use simulate::{
    check_grid_separation, default_est_n, default_fine_n, simulate, SimulationConfig, Truth,
};
pub use stats::{derive_seed, loglog, mean_and_se, ols, SlopeFit, MIN_R2};
