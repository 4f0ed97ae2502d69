//! Single-queue analytic core.
//!
//! For a probe pair entering a stationary queue `m` slots apart, the output
//! separation is `m + 1 + A - X`, where `A` counts cross-traffic packets
//! that get between the probes and `X` counts departures in the window. The
//! law of the pair `(X, A)` is built up as a [`JointTable`]; separation
//! distributions fall out as anti-diagonal sums.

mod conditional;
mod equal;
mod joint;
mod table;

pub use conditional::{
    conditional_output_dist, conditional_output_dist_equal_priority, output_dist,
    output_dist_equal_priority, ConditionalKernel, Mixed,
};
pub use equal::{
    joint_unconditioned_equal_priority, joint_zero_equal_priority, transform_joint_equal_priority,
};
pub use joint::{joint_unconditioned, joint_zero, transform_joint, ZeroTables};
pub use table::{JointTable, JointVariant};

use serde::{Deserialize, Serialize};

/// Where a probe sits relative to the cross-traffic batch of its own slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    /// Queued behind the whole batch.
    #[default]
    Lowest,
    /// Queued at a uniformly random position within the batch.
    Equal,
}

/// Additions and multiplications spent in the zero-backlog recursion for
/// all input separations up to `n2` and output separations up to `n3`:
/// `(n3(n3+1)/2 + 5/2) n2(n2+1)/2 - n2(n2+1)(2 n2+1)/12`, rounded.
///
/// The count grows with `n2` only while `n2` stays below roughly `n3²`; past
/// that the closed form turns over.
pub fn op_count(n2: u64, n3: u64) -> i64 {
    let n2 = n2 as i128;
    let n3 = n3 as i128;
    // Everything over a common denominator of 12.
    let numerator = n2 * (n2 + 1) * (3 * n3 * (n3 + 1) + 14 - 2 * n2);
    let rounded = if numerator >= 0 {
        (2 * numerator + 12) / 24
    } else {
        -((-2 * numerator + 12) / 24)
    };
    rounded as i64
}
