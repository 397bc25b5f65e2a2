//! SplitSGD and the baseline schedules it is compared against.

mod detection;
mod runs;
mod schedule;
mod trace;

pub use detection::{run_pflug_detection, run_split_detection, Detection};
pub use runs::{
    final_log_loss, run_constant_sgd, run_method, run_sgd_half, run_splitsgd, run_sqrt_decay_sgd,
    sqrt_decay_rate, Method, SplitSgdConfig, DIAGNOSTIC_STREAM_BASE,
};
pub use schedule::ScheduleState;
pub use trace::{Event, RunTrace, TraceRecord};
