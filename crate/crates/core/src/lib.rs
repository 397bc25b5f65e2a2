//! Stationarity detection by splitting, the SplitSGD learning-rate schedule,
//! synthetic convex benchmarks with baseline schedules, and Monte-Carlo
//! checks of the diagnostic's sampling behaviour.
//!
//! The numeric core ([`vector`], [`kernel`], [`objectives`], [`diagnostic`],
//! [`optimizers`]) is generic over [`Scalar`] (`f32` or `f64`). Experiment
//! harnesses in [`analysis`] and the [`cli`] run in `f64`; the aliases below
//! name the `f64` instantiations.

pub mod analysis;
pub mod cli;
pub mod diagnostic;
pub mod error;
pub mod kernel;
pub mod objectives;
pub mod optimizers;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod vector;

pub use diagnostic::{
    decide, gradient_coherence_trace, run_diagnostic, DiagnosticConfig, DiagnosticResult,
};
pub use error::{Error, Result};
pub use kernel::{sgd_step, KernelKind, OptimizerKernel};
pub use objectives::{Benchmark, Dataset, Family, Problem, ProblemSpec, StartPoint};
pub use optimizers::{RunTrace, SplitSgdConfig};
pub use oracle::{GradientOracle, GradientSample, Objective};
pub use rng::{fork_stream, RngStream};
pub use scalar::Scalar;
pub use vector::{dot, ParamVector};

pub type ParamVec = ParamVector<f64>;
pub type ParamVec32 = ParamVector<f32>;
pub type Sample = GradientSample<f64>;
pub type Kernel = OptimizerKernel<f64>;
pub type Spec = ProblemSpec<f64>;
pub type Data = Dataset<f64>;
pub type Regression = Problem<f64>;
pub type Regression32 = Problem<f32>;
pub type Bench = Benchmark<f64>;
pub type DiagConfig = DiagnosticConfig<f64>;
pub type DiagResult = DiagnosticResult<f64>;
pub type SplitConfig = SplitSgdConfig<f64>;
