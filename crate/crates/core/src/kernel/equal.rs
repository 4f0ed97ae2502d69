//! Equal-priority probes: each probe lands at a uniformly random position
//! inside its slot's batch.
//!
//! Here the occupancy is observed before the slot's arrivals. With the
//! pair entering `m + 1` slots apart, the output separation is
//! `m + 2 + Ā - X`, where `X` counts departures over slots `0..=m` and `Ā`
//! counts packets behind the first probe in its batch, all batches in
//! between, and packets ahead of the second probe in its batch.

use crate::arrival::position_split_pmf;
use crate::error::{Error, Result};
use crate::pmf::{convolve_truncated, Pmf};
use crate::stationary::{Observation, StationaryDist};

use super::joint::{mix_backlog, shift_departures, BacklogWeights};
use super::table::{JointTable, JointVariant};

/// `P{X^{0,0}_{0,m} = l, A'_{1,m+1} = j}`: empty queue, empty first batch,
/// departures over slots `0..=m`, arrivals counted through the packets queued
/// ahead of the second probe in its own batch. `A_{1,0}` is the empty sum.
pub fn joint_zero_equal_priority(arrival: &Pmf, m: usize, j_max: usize) -> Result<JointTable> {
    let zero = EqualZeroTables::new(arrival, j_max)
        .nth(m)
        .expect("iterator is unbounded");
    with_position_split(&zero, &position_split_pmf(arrival))
}

pub(crate) struct EqualZeroTables {
    p: Vec<f64>,
    j_max: usize,
    current: Option<JointTable>,
}

impl EqualZeroTables {
    pub fn new(arrival: &Pmf, j_max: usize) -> Self {
        Self {
            p: arrival.dense_to(j_max),
            j_max,
            current: None,
        }
    }
}

impl Iterator for EqualZeroTables {
    type Item = JointTable;

    fn next(&mut self) -> Option<JointTable> {
        let next = match &self.current {
            None => {
                let mut t = JointTable::zeros(0, 1, self.j_max, JointVariant::EqualZero);
                t.row_mut(1)[0] = 1.0;
                t
            }
            Some(prev) => equal_zero_step(prev, &self.p),
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// Spacing `m - 1` to `m`. A departure in slot `m` needs `A_{1,m} >= X_{0,m-1}`,
/// so the sum over the previous arrival count starts at `l - 2` and the
/// no-departure branch is the Kronecker term at `j = l - 1`.
fn equal_zero_step(prev: &JointTable, p: &[f64]) -> JointTable {
    let m = prev.spacing + 1;
    let slots = m + 1;
    let jm = prev.j_max;
    let mut next = JointTable::zeros(m, slots, jm, JointVariant::EqualZero);
    for l in 1..=slots {
        let carried = prev.row(l - 1);
        let idle = if l <= prev.slots { prev.get(l, l - 1) } else { 0.0 };
        let out = next.row_mut(l);
        // Kronecker branch: no departure in slot m, nothing arrived in it.
        if l - 1 <= jm {
            out[l - 1] += idle * p[0];
        }
        for j in (l.saturating_sub(1))..=jm {
            let mut v = 0.0;
            for n in l.saturating_sub(2)..=j {
                v += carried[n] * p[j - n];
            }
            out[j] += v;
        }
    }
    next
}

/// Adds the packets queued ahead of the second probe in its batch.
pub(crate) fn with_position_split(zero: &JointTable, split: &Pmf) -> Result<JointTable> {
    if zero.variant != JointVariant::EqualZero {
        return Err(Error::Usage(format!(
            "position split expects an equal-priority zero table, got {:?}",
            zero.variant
        )));
    }
    let mut out = JointTable::zeros(zero.spacing, zero.slots, zero.j_max, JointVariant::EqualZeroSplit);
    let g = split.dense_to(zero.j_max);
    for l in 0..=zero.slots {
        let row = convolve_truncated(zero.row(l), &g, zero.j_max + 1);
        out.row_mut(l).copy_from_slice(&row);
    }
    Ok(out)
}

/// Backlog `q` plus first batch `a`: identical to the lowest-priority shift
/// with `q + a` packets in place of `q`.
pub fn transform_joint_equal_priority(split_table: &JointTable, q: usize, a: usize) -> Result<JointTable> {
    if split_table.variant != JointVariant::EqualZeroSplit {
        return Err(Error::Usage(format!(
            "equal-priority transform expects a split zero table, got {:?}",
            split_table.variant
        )));
    }
    Ok(shift_departures(
        split_table,
        q + a,
        JointVariant::EqualConditioned { q, a },
    ))
}

impl BacklogWeights {
    /// Joint weights over the packets `c = q + a` ahead of the first probe
    /// and the `ã` packets of its batch queued behind it.
    pub fn equal(arrival: &Pmf, pi: &StationaryDist, slots: usize, j_max: usize) -> Self {
        let n1 = pi.bound();
        let explicit_len = slots.saturating_sub(1);
        let mut explicit: Vec<Vec<f64>> = (0..explicit_len).map(|c| vec![0.0; c.min(j_max) + 1]).collect();
        let mut saturated = vec![0.0; j_max + 1];
        let mut omitted = arrival.tail_mass();
        for a in 0..=arrival.truncation_bound() {
            let pa = arrival.get(a);
            if pa == 0.0 {
                continue;
            }
            let share = pa / (a as f64 + 1.0);
            let shifts = a.min(j_max);
            if a + 1 >= slots {
                // Window saturated whatever the backlog.
                for s in &mut saturated[..=shifts] {
                    *s += share;
                }
                continue;
            }
            let explicit_max = slots - 2 - a;
            for q in 0..=explicit_max.min(n1) {
                let w = share * pi.get(q);
                for s in &mut explicit[q + a][..=shifts] {
                    *s += w;
                }
            }
            if n1 >= explicit_max {
                let rest = (1.0 - pi.cumulative(explicit_max)).max(0.0) * share;
                for s in &mut saturated[..=shifts] {
                    *s += rest;
                }
            } else {
                omitted += pa * (1.0 - pi.cumulative(n1)).max(0.0);
            }
        }
        Self {
            explicit,
            saturated,
            omitted,
        }
    }
}

/// `P{X_{0,m} = l, Ā_{0,m+1} = j}` averaged over the early occupancy, the
/// first batch and the first probe's position in it.
pub fn joint_unconditioned_equal_priority(
    arrival: &Pmf,
    stationary: &StationaryDist,
    m: usize,
    j_max: usize,
) -> Result<JointTable> {
    if stationary.observation() != Observation::Early {
        return Err(Error::Usage(
            "equal-priority probes need the early (before-arrivals) occupancy".into(),
        ));
    }
    let split = joint_zero_equal_priority(arrival, m, j_max)?;
    Ok(equal_unconditioned_from_split(&split, arrival, stationary))
}

pub(crate) fn equal_unconditioned_from_split(
    split: &JointTable,
    arrival: &Pmf,
    stationary: &StationaryDist,
) -> JointTable {
    let weights = BacklogWeights::equal(arrival, stationary, split.slots, split.j_max);
    mix_backlog(split, &weights, JointVariant::EqualUnconditioned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrival::{materialize_arrival_pmf, ArrivalModel};

    #[test]
    fn base_case() {
        let p = materialize_arrival_pmf(&ArrivalModel::poisson(0.5).unwrap(), 10).unwrap();
        let t = EqualZeroTables::new(&p, 10).next().unwrap();
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.total(), 1.0);
    }

    #[test]
    fn empty_traffic_keeps_all_mass_on_the_probe() {
        let p = Pmf::new(0, vec![1.0]).unwrap();
        for m in 0..6 {
            let t = joint_zero_equal_priority(&p, m, 8).unwrap();
            assert_eq!(t.get(1, 0), 1.0, "m={m}");
            assert_eq!(t.total(), 1.0);
        }
    }

    #[test]
    fn transform_identity_and_saturation() {
        let p = materialize_arrival_pmf(&ArrivalModel::poisson(0.5).unwrap(), 30).unwrap();
        let zero = EqualZeroTables::new(&p, 30).nth(3).unwrap();
        let split = joint_zero_equal_priority(&p, 3, 30).unwrap();
        let same = transform_joint_equal_priority(&split, 0, 0).unwrap();
        assert_eq!(same.data, split.data);
        let marg = split.arrival_marginal();
        let sat = transform_joint_equal_priority(&split, 2, 3).unwrap();
        assert_eq!(sat.row(4), &marg[..]);
        assert!(transform_joint_equal_priority(&zero, 0, 0).is_err());
    }

    #[test]
    fn zero_table_columns_follow_the_arrival_law() {
        let p = materialize_arrival_pmf(&ArrivalModel::poisson(0.6).unwrap(), 40).unwrap();
        let pv = p.dense_to(40);
        let mut sum_law = vec![1.0];
        for t in EqualZeroTables::new(&p, 40).take(5) {
            let marg = t.arrival_marginal();
            for j in 0..=20 {
                assert!((marg[j] - sum_law.get(j).copied().unwrap_or(0.0)).abs() < 1e-13);
            }
            sum_law = convolve_truncated(&sum_law, &pv, 41);
        }
    }
}
