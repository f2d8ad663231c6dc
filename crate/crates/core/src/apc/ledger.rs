//! Downtime bookkeeping for the entanglement link.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DowntimeCause {
    /// Fidelity check that passed the trigger threshold.
    Check,
    /// Check followed by gradient optimization.
    Optimization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DowntimeInterval {
    pub start_s: f64,
    pub duration_s: f64,
    pub cause: DowntimeCause,
}

/// Elapsed time and the intervals during which the link was routing
/// classical probe light instead of entangled photons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UptimeLedger {
    elapsed_s: f64,
    intervals: Vec<DowntimeInterval>,
    total_downtime_s: f64,
}

impl UptimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an interval; intervals must be recorded in time order and
    /// must not overlap.
    pub fn record(&mut self, start_s: f64, duration_s: f64, cause: DowntimeCause) -> Result<()> {
        if !(duration_s >= 0.0 && start_s.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad downtime interval at {start_s} s")));
        }
        if let Some(last) = self.intervals.last() {
            if start_s < last.start_s + last.duration_s {
                return Err(Error::InvalidArgument(format!(
                    "downtime at {start_s} s overlaps the interval starting at {} s",
                    last.start_s
                )));
            }
        }
        self.intervals.push(DowntimeInterval {
            start_s,
            duration_s,
            cause,
        });
        self.total_downtime_s += duration_s;
        self.elapsed_s = self.elapsed_s.max(start_s + duration_s);
        Ok(())
    }

    /// Extends the elapsed time (never shrinks it).
    pub fn advance_to(&mut self, t_s: f64) {
        self.elapsed_s = self.elapsed_s.max(t_s);
    }

    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }

    pub fn intervals(&self) -> &[DowntimeInterval] {
        &self.intervals
    }

    pub fn total_downtime_s(&self) -> f64 {
        self.total_downtime_s
    }

    pub fn downtime_by(&self, cause: DowntimeCause) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.cause == cause)
            .map(|i| i.duration_s)
            .sum()
    }

    pub fn uptime(&self) -> f64 {
        uptime(self)
    }
}

/// `1 - downtime / elapsed`; 1 for an empty ledger.
pub fn uptime(ledger: &UptimeLedger) -> f64 {
    if ledger.elapsed_s <= 0.0 {
        return 1.0;
    }
    1.0 - ledger.total_downtime_s / ledger.elapsed_s
}
