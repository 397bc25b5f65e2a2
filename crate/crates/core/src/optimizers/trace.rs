use std::fmt;
use std::io::Write;

use crate::error::Result;

/// Schedule event attached to a trace record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    None,
    /// Diagnostic finished and declared stationarity.
    DiagnosticS,
    /// Diagnostic finished without detecting stationarity.
    DiagnosticN,
    LrHalved,
    PflugDetect,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::None => "none",
            Event::DiagnosticS => "diagnostic-S",
            Event::DiagnosticN => "diagnostic-N",
            Event::LrHalved => "lr-halved",
            Event::PflugDetect => "pflug-detect",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    /// Completed epochs (diagnostics are charged `w·l` steps, not `2·w·l`).
    pub epoch: u64,
    /// True number of oracle calls so far.
    pub gradient_evals: u64,
    /// Rate in effect for the next step.
    pub learning_rate: f64,
    pub full_loss: f64,
    pub event: Event,
}

/// Per-epoch record of a run, plus schedule events.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    /// Oracle calls spent on single-thread steps.
    pub thread_steps: u64,
    /// Steps taken inside diagnostics (each costs two oracle calls).
    pub diagnostic_steps: u64,
    pub diagnostics_run: u64,
}

pub const TRACE_CSV_HEADER: &str = "epoch,gradient_evals,learning_rate,full_loss,event";

impl RunTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.full_loss)
    }

    /// Natural log of the last recorded loss.
    pub fn final_log_loss(&self) -> Option<f64> {
        self.final_loss().map(f64::ln)
    }

    pub fn learning_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.learning_rate).collect()
    }

    pub fn total_gradient_evals(&self) -> u64 {
        self.thread_steps + 2 * self.diagnostic_steps
    }

    pub fn count(&self, event: Event) -> usize {
        self.records.iter().filter(|r| r.event == event).count()
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.event != Event::None)
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|r| r.gradient_evals < record.gradient_evals));
        self.records.push(record);
    }

    /// Attaches `event` to the last record if it was taken at the same
    /// oracle count; otherwise appends `record`.
    pub(crate) fn mark(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last_mut() {
            if last.gradient_evals == record.gradient_evals && last.event == Event::None {
                last.event = record.event;
                last.learning_rate = record.learning_rate;
                return;
            }
        }
        self.push(record);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.gradient_evals, r.learning_rate, r.full_loss, r.event
            )?;
        }
        Ok(())
    }
}
