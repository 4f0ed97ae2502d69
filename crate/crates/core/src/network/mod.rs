//! Networks of queues: topologies, link delays and leaf joint laws.

mod cache;
mod delay;
mod leaf;
mod propagate;
mod topology;

pub use cache::KernelCache;
pub use delay::{apply_delay_kernel, light_load_kernel, DelayKernel, JointDelayKernel};
pub use leaf::{LeafJointDist, DENSE_MAX_LEAVES};
pub use propagate::{
    propagate_path, propagate_tree, propagate_tree_cached, Propagation, Propagator, BRANCH_CUTOFF,
};
pub use topology::{Node, Topology};
