//! Monte-Carlo studies and experiment grids, all in `f64`.
//!
//! Every replication, seed and grid cell draws from its own forked stream, so
//! results do not depend on how work is scheduled across threads.

mod coherence;
mod experiments;
mod qrisk;
mod sensitivity;

pub use coherence::{
    coherence_histogram, CoherenceHistogram, CoherenceOracle, CoherenceSample, CoherenceStudy,
    CoherenceSummary,
};
pub use experiments::{
    compare_grid, detection_race, mean_final_log_loss, CompareRow, EtaScale, RaceMethod,
    RaceOutcome, RaceRow, DEFAULT_ETA_GRID,
};
pub use qrisk::{rejection_threshold, type1_error_probability, QRiskQuery};
pub use sensitivity::{sensitivity_grid, SensitivityCell, SensitivityGrid, SensitivityRun};

use crate::error::Result;
use crate::objectives::{make_default_spec, Benchmark, Family};
use crate::rng::RngStream;

/// Child ids under an experiment's base stream.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const RUNS: u64 = 1;
    pub const REPLICATIONS: u64 = 2;

    /// Under a run or replication stream.
    pub const INIT: u64 = 0;
    pub const OPTIMIZER: u64 = 1;
    pub const BURN_IN: u64 = 2;
    pub const DIAGNOSTIC: u64 = 3;
}

/// Root stream of an experiment with user seed `seed`.
pub fn experiment_stream(seed: u64) -> RngStream {
    RngStream::new(seed, 0)
}

/// Default benchmark whose data is drawn from `experiment_stream(seed)`.
pub fn default_benchmark(family: Family, seed: u64) -> Result<Benchmark<f64>> {
    let mut spec = make_default_spec(family);
    spec.data_seed = experiment_stream(seed).fork(streams::DATA);
    Benchmark::new(spec)
}
