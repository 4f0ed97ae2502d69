use serde::{Deserialize, Serialize};

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::kernel::Priority;
use crate::network::Topology;

/// One piece of a rate schedule: the rate moves linearly from `rate_start`
/// at `start_slot` to `rate_end` at the next segment's start (or the end of
/// the run). A step change is a new segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_slot: u64,
    pub rate_start: f64,
    pub rate_end: f64,
}

/// Time-varying Poisson rate for one queue.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self> {
        segments.sort_by_key(|s| s.start_slot);
        for s in &segments {
            for r in [s.rate_start, s.rate_end] {
                if !(0.0..1.0).contains(&r) {
                    return Err(Error::Config(format!(
                        "schedule rate {r} at slot {} is outside [0, 1)",
                        s.start_slot
                    )));
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![Segment {
            start_slot: 0,
            rate_start: rate,
            rate_end: rate,
        }])
    }

    /// Linear ramp over `[start, end)` slots, constant outside.
    pub fn ramp(from: f64, to: f64, start: u64, end: u64) -> Result<Self> {
        Self::new(vec![
            Segment {
                start_slot: 0,
                rate_start: from,
                rate_end: from,
            },
            Segment {
                start_slot: start,
                rate_start: from,
                rate_end: to,
            },
            Segment {
                start_slot: end,
                rate_start: to,
                rate_end: to,
            },
        ])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Appends a segment starting at `start_slot` (a step if the rate jumps).
    pub fn then(mut self, segment: Segment) -> Result<Self> {
        self.segments.push(segment);
        Self::new(self.segments)
    }

    /// Rate in slot `slot` of a run lasting `horizon` slots.
    pub fn rate_at(&self, slot: u64, horizon: u64) -> Option<f64> {
        let idx = self.segments.partition_point(|s| s.start_slot <= slot);
        if idx == 0 {
            return None;
        }
        let seg = &self.segments[idx - 1];
        let end = self
            .segments
            .get(idx)
            .map(|s| s.start_slot)
            .unwrap_or(horizon.max(seg.start_slot + 1));
        if end <= seg.start_slot || slot >= end {
            return Some(seg.rate_end);
        }
        let frac = (slot - seg.start_slot) as f64 / (end - seg.start_slot) as f64;
        Some(seg.rate_start + (seg.rate_end - seg.rate_start) * frac)
    }

    pub fn max_rate(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| [s.rate_start, s.rate_end])
            .fold(0.0, f64::max)
    }
}

/// Everything a simulation run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    /// Per-slot probability of launching a pair.
    pub probe_rate: f64,
    /// Input separation of each pair, in slots.
    pub d0: usize,
    /// Slots during which pairs may be launched, warm-up included.
    pub horizon: u64,
    pub seed: u64,
    /// Per-queue rate schedules (node-id order); `None` keeps the node's law.
    pub schedules: Vec<Option<Schedule>>,
    /// Overrides the default warm-up of `max(10/(1-λmax), 1000)` slots.
    pub warmup: Option<u64>,
    /// Check per-queue work conservation at the end of the run.
    pub audit: bool,
    /// Record `(departures, arrivals)` at the root over each pair's window.
    pub record_root_window: bool,
}

impl SimConfig {
    pub fn new(topology: Topology, probe_rate: f64, d0: usize, horizon: u64, seed: u64) -> Self {
        let n = topology.len();
        Self {
            topology,
            probe_rate,
            d0,
            horizon,
            seed,
            schedules: vec![None; n],
            warmup: None,
            audit: false,
            record_root_window: false,
        }
    }

    /// Sets every queue to the given probe priority.
    pub fn with_priority(mut self, priority: Priority) -> Self {
        let mut topo = self.topology.clone();
        topo.set_priority_all(priority);
        self.topology = topo;
        self
    }

    pub fn with_schedule(mut self, node: usize, schedule: Schedule) -> Self {
        if node < self.schedules.len() {
            self.schedules[node] = Some(schedule);
        }
        self
    }

    /// Largest rate any queue sees during the run.
    pub fn max_rate(&self) -> f64 {
        (0..self.topology.len())
            .map(|k| match &self.schedules[k] {
                Some(s) => s.max_rate(),
                None => self.topology.node(k).arrival.mean(),
            })
            .fold(0.0, f64::max)
    }

    pub fn warmup_slots(&self) -> u64 {
        self.warmup.unwrap_or_else(|| {
            let lam = self.max_rate().min(0.999_999);
            ((10.0 / (1.0 - lam)).ceil() as u64).max(1000)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least one slot".into()));
        }
        if self.d0 < 1 {
            return Err(Error::Config("input separation must be at least one slot".into()));
        }
        if !(self.probe_rate > 0.0 && self.probe_rate <= 1.0) {
            return Err(Error::Config(format!("probe rate {} outside (0, 1]", self.probe_rate)));
        }
        if self.schedules.len() != self.topology.len() {
            return Err(Error::Config(format!(
                "{} schedules for {} queues",
                self.schedules.len(),
                self.topology.len()
            )));
        }
        for (k, s) in self.schedules.iter().enumerate() {
            match s {
                Some(s) => {
                    if s.is_empty() {
                        return Err(Error::Config(format!("queue {k} has an empty schedule")));
                    }
                    if s.segments()[0].start_slot != 0 {
                        return Err(Error::Config(format!("queue {k}'s schedule must start at slot 0")));
                    }
                    if !matches!(self.topology.node(k).arrival, ArrivalModel::Poisson { .. }) {
                        return Err(Error::Config(format!(
                            "queue {k}: schedules need a Poisson arrival law"
                        )));
                    }
                    Schedule::new(s.segments().to_vec())?;
                }
                None => self.topology.node(k).arrival.validate().map_err(|e| match e {
                    Error::Stability { rate } => {
                        Error::Config(format!("queue {k} is unstable (rate {rate})"))
                    }
                    other => other,
                })?,
            }
        }
        Ok(())
    }
}
