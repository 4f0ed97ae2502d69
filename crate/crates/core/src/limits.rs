use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation bounds for the analytic pipeline.
///
/// `n1` bounds the queue occupancy, `n2` the input separation and `n3` the
/// output separation. Mass pushed past a bound is reported, never silently
/// renormalized inside the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Largest per-stage leakage accepted before an error is raised.
    pub tail_tolerance: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            n1: 60,
            n2: 60,
            n3: 60,
            tail_tolerance: 1e-6,
        }
    }
}

impl Limits {
    pub fn new(n1: usize, n2: usize, n3: usize, tail_tolerance: f64) -> Result<Self> {
        let limits = Self {
            n1,
            n2,
            n3,
            tail_tolerance,
        };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n2 < 1 || self.n3 < 1 {
            return Err(Error::Domain("n2 and n3 must be at least 1".into()));
        }
        if !(self.tail_tolerance > 0.0) {
            return Err(Error::Domain("tail tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Arrival-pmf length needed by every stage of the pipeline.
    pub(crate) fn arrival_support(&self) -> usize {
        self.n1.max(self.n2).max(self.n3) + 2
    }
}
