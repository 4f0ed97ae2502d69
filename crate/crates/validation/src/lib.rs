//! Reporting and scoring helpers for the acceptance run.

use std::panic::{catch_unwind, UnwindSafe};
use std::time::Instant;

use disperse_core::estimate::TraceRecord;
use disperse_core::Schedule;

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Runs one criterion, prints its `PASS`/`FAIL` line and returns whether it
/// passed. A panic counts as a failure.
pub fn run_criterion<F>(number: usize, title: &str, f: F) -> bool
where
    F: FnOnce() -> Verdict + UnwindSafe,
{
    let start = Instant::now();
    let v = catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Verdict::new(false, format!("panic: {msg}"))
    });
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {number} ({title}): {} [{:.1} s]", v.detail, start.elapsed().as_secs_f64());
    v.pass
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-coordinate mean absolute error of an estimate trace, skipping the
/// first `burn_in` fraction of blocks. The truth for each block is the
/// scheduled rate at the launch slot of its last pair.
pub fn tracking_error(trace: &[TraceRecord], schedules: &[Schedule], horizon: u64, burn_in: f64) -> Vec<f64> {
    let skip = (trace.len() as f64 * burn_in).floor() as usize;
    let kept = &trace[skip..];
    let mut err = vec![0.0; schedules.len()];
    for r in kept {
        let slot = r.slot.expect("trace records carry their slot");
        for (k, s) in schedules.iter().enumerate() {
            let truth = s.rate_at(slot, horizon).expect("schedule covers the run");
            err[k] += (r.estimate[k] - truth).abs();
        }
    }
    err.iter().map(|e| e / kept.len() as f64).collect()
}
