//! Joint law of departures and arrivals between two lowest-priority probes.

use crate::error::{Error, Result};
use crate::pmf::Pmf;
use crate::stationary::{Observation, StationaryDist};

use super::table::{JointTable, JointVariant};

/// `P{X⁰_{0,m-1} = l, A_{1,m} = j}` with only the first probe in the queue
/// at slot 0.
///
/// Columns beyond `j_max` are dropped; the recursion never reads a column
/// to the right of the one it writes, so the retained cells are exact.
pub fn joint_zero(arrival: &Pmf, m: usize, j_max: usize) -> Result<JointTable> {
    if m < 1 {
        return Err(Error::Domain("probe spacing must be at least one slot".into()));
    }
    Ok(ZeroTables::new(arrival, j_max).nth(m - 1).expect("iterator is unbounded"))
}

/// Zero-backlog tables for spacings `1, 2, 3, ...`, each built from the last.
pub struct ZeroTables {
    p: Vec<f64>,
    j_max: usize,
    current: Option<JointTable>,
}

impl ZeroTables {
    pub fn new(arrival: &Pmf, j_max: usize) -> Self {
        Self {
            p: arrival.dense_to(j_max),
            j_max,
            current: None,
        }
    }
}

impl Iterator for ZeroTables {
    type Item = JointTable;

    fn next(&mut self) -> Option<JointTable> {
        let jm = self.j_max;
        let next = match &self.current {
            None => {
                // One slot: the probe leaves, A_1 arrives behind it.
                let mut t = JointTable::zeros(1, 1, jm, JointVariant::ZeroInitial);
                t.row_mut(1).copy_from_slice(&self.p);
                t
            }
            Some(prev) => zero_step(prev, &self.p),
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// One step of the recursion, spacing `m - 1` to `m`:
/// `P(l, j) = Σ_{n=l-1..j} p_{j-n} P'(l-1, n) + p_{j-l+1} P'(l, l-1)`.
fn zero_step(prev: &JointTable, p: &[f64]) -> JointTable {
    let m = prev.slots + 1;
    let jm = prev.j_max;
    let mut next = JointTable::zeros(m, m, jm, JointVariant::ZeroInitial);
    for l in 1..=m {
        // Departure in slot m-1: the queue still held packets.
        let carried = prev.row(l - 1);
        // No departure in slot m-1: exactly l-1 arrivals so far, all served.
        let idle = if l < m { prev.get(l, l - 1) } else { 0.0 };
        let out = next.row_mut(l);
        for j in (l - 1)..=jm {
            let mut v = 0.0;
            for n in (l - 1)..=j {
                v += p[j - n] * carried[n];
            }
            v += p[j + 1 - l] * idle;
            out[j] = v;
        }
    }
    next
}

/// Moves a zero-backlog table to `c` extra packets ahead of the first probe.
///
/// Extra backlog only shifts the departure count, capped at the window
/// length: `X^c = min(slots, X⁰ + c)`.
pub(crate) fn shift_departures(zero: &JointTable, c: usize, variant: JointVariant) -> JointTable {
    let slots = zero.slots;
    let mut out = JointTable::zeros(zero.spacing, slots, zero.j_max, variant);
    for l in (c + 1)..slots {
        out.row_mut(l).copy_from_slice(zero.row(l - c));
    }
    let first = slots.saturating_sub(c);
    for t in first..=slots {
        let src = zero.row(t).to_vec();
        for (o, v) in out.row_mut(slots).iter_mut().zip(src) {
            *o += v;
        }
    }
    out
}

/// `P{X^q_{0,m-1} = l, A_{1,m} = j}` from the zero-backlog table.
pub fn transform_joint(zero: &JointTable, q: usize) -> Result<JointTable> {
    if zero.variant != JointVariant::ZeroInitial {
        return Err(Error::Usage(format!(
            "transform_joint expects a zero-initial table, got {:?}",
            zero.variant
        )));
    }
    Ok(shift_departures(zero, q, JointVariant::Conditioned { q }))
}

/// Mixing weights over the backlog `c` ahead of the first probe.
///
/// `explicit[c]` is a vector over an extra arrival shift (non-trivial only for
/// equal priority, where packets behind the first probe count as arrivals);
/// every backlog of at least `slots - 1` saturates the window and is lumped
/// into `saturated`.
pub(crate) struct BacklogWeights {
    pub explicit: Vec<Vec<f64>>,
    pub saturated: Vec<f64>,
    pub omitted: f64,
}

impl BacklogWeights {
    /// Lowest priority: weight `π_c` on backlog `c`, no arrival shift.
    pub fn lowest(pi: &StationaryDist, slots: usize) -> Self {
        let n1 = pi.bound();
        let explicit_max = slots.saturating_sub(2);
        let mut explicit = Vec::new();
        if slots >= 2 {
            for c in 0..=explicit_max.min(n1) {
                explicit.push(vec![pi.get(c)]);
            }
        }
        let (saturated, omitted) = if slots < 2 {
            (1.0, 0.0)
        } else if n1 >= explicit_max {
            (1.0 - pi.cumulative(explicit_max), 0.0)
        } else {
            (0.0, 1.0 - pi.cumulative(n1))
        };
        Self {
            explicit,
            saturated: vec![saturated.max(0.0)],
            omitted: omitted.max(0.0),
        }
    }
}

/// `Σ_c weight_c ⊛ shift(zero, c)`, with the arrival-axis convolution applied
/// row by row.
pub(crate) fn mix_backlog(zero: &JointTable, weights: &BacklogWeights, variant: JointVariant) -> JointTable {
    let slots = zero.slots;
    let jm = zero.j_max;
    let mut out = JointTable::zeros(zero.spacing, slots, jm, variant);
    out.omitted_mass = weights.omitted;

    // Rows below the cap: backlog c moves row l-c to row l.
    for l in 1..slots {
        for (c, w) in weights.explicit.iter().enumerate().take(l) {
            let src = zero.row(l - c);
            accumulate_convolved(out.row_mut(l), src, w);
        }
    }

    // Cap row: suffix sums of the zero table.
    let mut suffix = vec![vec![0.0; jm + 1]; slots + 2];
    for t in (0..=slots).rev() {
        let (head, tail) = suffix.split_at_mut(t + 1);
        for ((s, z), nxt) in head[t].iter_mut().zip(zero.row(t)).zip(&tail[0]) {
            *s = z + nxt;
        }
    }
    let mut cap = vec![0.0; jm + 1];
    for (c, w) in weights.explicit.iter().enumerate() {
        accumulate_convolved(&mut cap, &suffix[slots - c], w);
    }
    accumulate_convolved(&mut cap, &suffix[0], &weights.saturated);
    out.row_mut(slots).copy_from_slice(&cap);
    out
}

fn accumulate_convolved(out: &mut [f64], src: &[f64], w: &[f64]) {
    let len = out.len();
    for (shift, &wv) in w.iter().enumerate().take(len) {
        if wv == 0.0 {
            continue;
        }
        for (o, s) in out[shift..].iter_mut().zip(src) {
            *o += wv * s;
        }
    }
}

/// `P{X_{0,m-1} = l, A_{1,m} = j}` with the backlog drawn from the late
/// stationary law.
///
/// All backlogs `q >= m - 1` yield the same saturated table, so the infinite
/// sum over `q` is evaluated exactly whenever `n1 >= m - 2`; otherwise the
/// occupancy tail past `n1` is dropped and reported as omitted mass.
pub fn joint_unconditioned(arrival: &Pmf, stationary: &StationaryDist, m: usize, j_max: usize) -> Result<JointTable> {
    if stationary.observation() != Observation::Late {
        return Err(Error::Usage(
            "lowest-priority probes see the late (after-arrivals) occupancy".into(),
        ));
    }
    let zero = joint_zero(arrival, m, j_max)?;
    Ok(unconditioned_from_zero(&zero, stationary))
}

pub(crate) fn unconditioned_from_zero(zero: &JointTable, stationary: &StationaryDist) -> JointTable {
    let weights = BacklogWeights::lowest(stationary, zero.slots);
    mix_backlog(zero, &weights, JointVariant::Unconditioned)
}
