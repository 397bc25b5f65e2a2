use crate::scalar::Scalar;

/// Learning rate and single-thread length of a decaying schedule.
///
/// After `k` detections the rate is `η·γ^k` (multiplied in order) and the
/// length is `t₁` with `t ← ⌊t/γ⌋` applied `k` times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleState<T> {
    pub eta: T,
    pub thread_len: u64,
    pub detections: u32,
}

impl<T: Scalar> ScheduleState<T> {
    pub fn new(eta: T, thread_len: u64) -> Self {
        Self {
            eta,
            thread_len,
            detections: 0,
        }
    }

    pub fn decay(&mut self, gamma: T) {
        self.eta *= gamma;
        self.thread_len = grow_len(self.thread_len, gamma.as_f64());
        self.detections += 1;
    }
}

/// `⌊t/γ⌋`, saturating at `u64::MAX`.
fn grow_len(t: u64, gamma: f64) -> u64 {
    let grown = (t as f64 / gamma).floor();
    if grown >= u64::MAX as f64 {
        u64::MAX
    } else {
        grown as u64
    }
}
