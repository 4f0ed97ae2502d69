//! Slot-level simulation of probe pairs, and the empirical laws built from it.

mod config;
mod engine;
mod occupancy;
mod samples;

pub use config::{Schedule, Segment, SimConfig};
pub use engine::{simulate, DispersionSamples, QueueAudit, RootWindow, SampleRecord};
pub use occupancy::occupancy_histogram;
pub use samples::{blocked_empirical_stream, empirical_dist, Blender};
