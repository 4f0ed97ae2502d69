//! Exact packet-pair dispersion laws for slotted FCFS queues, a matching
//! slot-level simulator, and distance-minimizing estimators of per-queue
//! arrival rates.

pub mod arrival;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod limits;
pub mod network;
pub mod pmf;
pub mod separation;
pub mod sim;
pub mod stationary;

pub use arrival::{materialize_arrival_pmf, position_split_pmf, ArrivalModel};
pub use error::{Error, Result};
pub use estimate::{
    adaptive_step, euclidean_distance, grid_search, kl_distance, numeric_gradient, run_adaptive, AdaptiveSettings,
    Distance, EstimatorState, GridSpec, Objective, ParameterVector,
};
pub use kernel::{
    conditional_output_dist, conditional_output_dist_equal_priority, joint_unconditioned,
    joint_unconditioned_equal_priority, joint_zero, joint_zero_equal_priority, op_count,
    output_dist, output_dist_equal_priority, transform_joint, transform_joint_equal_priority,
    ConditionalKernel, JointTable, JointVariant, Priority,
};
pub use limits::Limits;
pub use network::{
    apply_delay_kernel, light_load_kernel, propagate_path, propagate_tree, DelayKernel, KernelCache,
    LeafJointDist, Node, Topology,
};
pub use pmf::Pmf;
pub use separation::SeparationDist;
pub use sim::{
    blocked_empirical_stream, empirical_dist, simulate, DispersionSamples, Schedule, Segment, SimConfig,
};
pub use stationary::{stationary_dist, stationary_from_arrival, Observation, StationaryDist};
