//! Stationary queue occupancy of the slotted single-server queue.
//!
//! Two observation points are supported. `Early` looks at the queue at the
//! start of a slot before that slot's batch has arrived; `Late` looks just
//! after the batch. Their generating functions are
//! `(1-λ)(z-1)/(z-P(z))` and `(1-λ)(z-1)P(z)/(z-P(z))`, so the late law is the
//! early law convolved with the batch law.
//!
//! The early law is computed with the level-crossing balance
//! `r_{q+1} p_0 = r_0 P̄_{q+1} + Σ_{i=1..q} r_i P̄_{q+1-i}`, where
//! `P̄_k = P{A > k}`. It follows from the same generating function as the
//! textbook forward recursion but only ever adds non-negative terms, which
//! keeps it stable when `p_0` is small.

use serde::{Deserialize, Serialize};

use crate::arrival::{materialize_arrival_pmf, ArrivalModel};
use crate::error::{Error, Result};
use crate::pmf::Pmf;

/// Below this a negative recursion output is treated as round-off and clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// After the slot's arrivals (lowest-priority probes see this).
    Late,
    /// Before the slot's arrivals (equal-priority analysis uses this).
    Early,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryDist {
    pmf: Pmf,
    observation: Observation,
}

impl StationaryDist {
    /// Wraps an arbitrary occupancy law. Mainly useful to drive the kernel
    /// with hand-built backlog distributions.
    pub fn from_pmf(pmf: Pmf, observation: Observation) -> Result<Self> {
        if pmf.offset() != 0 {
            return Err(Error::Usage("occupancy pmf must start at 0".into()));
        }
        Ok(Self { pmf, observation })
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    pub fn get(&self, q: usize) -> f64 {
        self.pmf.get(q)
    }

    /// Largest stored occupancy (N1).
    pub fn bound(&self) -> usize {
        self.pmf.truncation_bound()
    }

    /// `Σ_{q <= k} π_q`, with `k` clipped to the stored range.
    pub(crate) fn cumulative(&self, k: usize) -> f64 {
        self.pmf.mass().iter().take(k + 1).sum()
    }
}

pub fn stationary_dist(model: &ArrivalModel, n1: usize, observation: Observation) -> Result<StationaryDist> {
    let arrival = materialize_arrival_pmf(model, n1 + 2)?;
    stationary_from_arrival(&arrival, model.mean(), n1, observation)
}

/// Stationary occupancy for a materialized batch law with mean `lambda`.
pub fn stationary_from_arrival(
    arrival: &Pmf,
    lambda: f64,
    n1: usize,
    observation: Observation,
) -> Result<StationaryDist> {
    if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
        return Err(Error::Stability { rate: lambda });
    }
    let p0 = arrival.get(0);
    if p0 <= 0.0 {
        return Err(Error::DivisionByZero);
    }
    // survival[k] = P{A > k} for k = 0 ..= n1 + 1, summed from the top.
    let bound = n1 + 1;
    let mut survival = vec![0.0; bound + 1];
    let mut acc = arrival.tail_mass() + arrival.mass_above(bound);
    for k in (0..=bound).rev() {
        survival[k] = acc;
        acc += arrival.get(k);
    }

    let mut early = Vec::with_capacity(n1 + 1);
    early.push((1.0 - lambda) / p0);
    for q in 0..n1 {
        let mut flow = early[0] * survival[q + 1];
        for i in 1..=q {
            flow += early[i] * survival[q + 1 - i];
        }
        early.push(clamp_round_off(flow / p0, q + 1)?);
    }

    let mass = match observation {
        Observation::Early => early,
        Observation::Late => (0..=n1)
            .map(|q| {
                let v: f64 = (0..=q).map(|k| early[q - k] * arrival.get(k)).sum();
                clamp_round_off(v, q)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    // Guard against totals creeping past one through round-off.
    let total: f64 = mass.iter().sum();
    let mass = if total > 1.0 {
        mass.into_iter().map(|p| p / total).collect()
    } else {
        mass
    };
    Ok(StationaryDist {
        pmf: Pmf::new(0, mass)?,
        observation,
    })
}

fn clamp_round_off(value: f64, index: usize) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -NEGATIVE_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeProbability { index, value })
    }
}
