//! Output-separation laws: conditional on the input separation, and mixed
//! over an input distribution.

use crate::arrival::{materialize_arrival_pmf, position_split_pmf, ArrivalModel};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::pmf::Pmf;
use crate::separation::SeparationDist;
use crate::stationary::{stationary_from_arrival, Observation, StationaryDist};

use super::equal::{equal_unconditioned_from_split, with_position_split, EqualZeroTables};
use super::joint::{joint_unconditioned, unconditioned_from_zero, ZeroTables};
use super::table::JointTable;
use super::Priority;

/// `P{d_o = s | d_i = t}` for `t = 1..=rows` and `s = 1..=n3`.
///
/// Rows are filled from one sweep of the zero-backlog recursion, so building
/// all of them costs the same as building the last.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalKernel {
    priority: Priority,
    n3: usize,
    rows: Vec<Vec<f64>>,
    leakage: Vec<f64>,
}

impl ConditionalKernel {
    /// All rows `t = 1..=n2` for one queue.
    pub fn build(model: &ArrivalModel, priority: Priority, limits: &Limits) -> Result<Self> {
        limits.validate()?;
        let arrival = materialize_arrival_pmf(model, limits.arrival_support())?;
        Self::from_arrival(&arrival, model.mean(), priority, limits, limits.n2)
    }

    /// Rows `t = 1..=rows` for a materialized batch law with mean `lambda`.
    pub fn from_arrival(
        arrival: &Pmf,
        lambda: f64,
        priority: Priority,
        limits: &Limits,
        rows: usize,
    ) -> Result<Self> {
        limits.validate()?;
        let n3 = limits.n3;
        let j_max = n3 - 1;
        let mut kernel = Self {
            priority,
            n3,
            rows: Vec::with_capacity(rows),
            leakage: Vec::with_capacity(rows),
        };
        match priority {
            Priority::Lowest => {
                let pi = stationary_from_arrival(arrival, lambda, limits.n1, Observation::Late)?;
                for zero in ZeroTables::new(arrival, j_max).take(rows) {
                    kernel.push(&unconditioned_from_zero(&zero, &pi));
                }
            }
            Priority::Equal => {
                let pi = stationary_from_arrival(arrival, lambda, limits.n1, Observation::Early)?;
                let split = position_split_pmf(arrival);
                for zero in EqualZeroTables::new(arrival, j_max).take(rows) {
                    let table = with_position_split(&zero, &split)?;
                    kernel.push(&equal_unconditioned_from_split(&table, arrival, &pi));
                }
            }
        }
        Ok(kernel)
    }

    fn push(&mut self, table: &JointTable) {
        let row = anti_diagonals(table, self.n3);
        self.leakage.push((1.0 - row.iter().sum::<f64>()).max(0.0));
        self.rows.push(row);
    }

    pub fn priority(&self) -> Priority {
        self.priority
    }

    /// Largest input separation covered.
    pub fn n2(&self) -> usize {
        self.rows.len()
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    /// `[P{d_o = 1 | d_i = t}, ..., P{d_o = n3 | d_i = t}]`.
    pub fn row_mass(&self, t: usize) -> Option<&[f64]> {
        t.checked_sub(1).and_then(|i| self.rows.get(i)).map(Vec::as_slice)
    }

    pub fn row(&self, t: usize) -> Option<SeparationDist> {
        let i = t.checked_sub(1)?;
        Some(SeparationDist::from_parts(self.rows.get(i)?.clone(), self.leakage[i]))
    }

    /// Mass of `d_o` beyond `n3` (plus any occupancy truncation) given `d_i = t`.
    pub fn row_leakage(&self, t: usize) -> f64 {
        t.checked_sub(1)
            .and_then(|i| self.leakage.get(i))
            .copied()
            .unwrap_or(1.0)
    }

    /// `Σ_t P{d_o = s | d_i = t} input[t]` over `s = 1..=n3`.
    ///
    /// Returns the unnormalized output together with the input mass the
    /// kernel does not cover and the mass pushed past `n3`.
    pub fn mix(&self, input: &SeparationDist) -> Mixed {
        let mut out = vec![0.0; self.n3];
        let mut uncovered = 0.0;
        let mut pushed_out = 0.0;
        for t in 1..=input.max_separation() {
            let w = input.get(t);
            if w == 0.0 {
                continue;
            }
            let Some(row) = self.row_mass(t) else {
                uncovered += w;
                continue;
            };
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
            pushed_out += w * self.leakage[t - 1];
        }
        Mixed {
            mass: out,
            uncovered,
            pushed_out,
        }
    }
}

/// Result of [`ConditionalKernel::mix`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mixed {
    /// `mass[s - 1]` is the probability of output separation `s`.
    pub mass: Vec<f64>,
    /// Stored input mass beyond the kernel's rows.
    pub uncovered: f64,
    /// Covered input mass mapped past `n3`.
    pub pushed_out: f64,
}

impl Mixed {
    /// Output as a sub-distribution; its tail also carries whatever the
    /// input had already lost.
    pub fn into_separation(self) -> SeparationDist {
        let total: f64 = self.mass.iter().sum();
        SeparationDist::from_parts(self.mass, 1.0 - total)
    }
}

/// `P{d_o = s} = Σ_l P{X = l, A = s - t - 1 + l}` for a table spanning `t`
/// departure slots; input separation `t` in both priority conventions.
fn anti_diagonals(table: &JointTable, n3: usize) -> Vec<f64> {
    let t = table.slots;
    let mut out = vec![0.0; n3];
    for l in 1..=t {
        for (j, &v) in table.row(l).iter().enumerate() {
            let s = t + 1 + j - l;
            if s <= n3 {
                out[s - 1] += v;
            }
        }
    }
    out
}

/// `P{d_o = s | d_i = m}` for a lowest-priority pair, `s = 1..=n3`.
pub fn conditional_output_dist(
    arrival: &Pmf,
    stationary: &StationaryDist,
    m: usize,
    n3: usize,
) -> Result<SeparationDist> {
    if n3 < 1 {
        return Err(Error::Domain("n3 must be at least 1".into()));
    }
    let table = joint_unconditioned(arrival, stationary, m, n3 - 1)?;
    Ok(separation_from_table(&table, n3))
}

/// Equal-priority analogue of [`conditional_output_dist`]; `stationary` must
/// use the before-arrivals convention.
pub fn conditional_output_dist_equal_priority(
    arrival: &Pmf,
    stationary: &StationaryDist,
    d_i: usize,
    n3: usize,
) -> Result<SeparationDist> {
    if n3 < 1 || d_i < 1 {
        return Err(Error::Domain("separations start at one slot".into()));
    }
    let table = super::joint_unconditioned_equal_priority(arrival, stationary, d_i - 1, n3 - 1)?;
    Ok(separation_from_table(&table, n3))
}

fn separation_from_table(table: &JointTable, n3: usize) -> SeparationDist {
    let mass = anti_diagonals(table, n3);
    let total: f64 = mass.iter().sum();
    SeparationDist::from_parts(mass, 1.0 - total)
}

/// Output separation law of a lowest-priority pair whose input separation
/// has law `input`; renormalized once at the end.
pub fn output_dist(arrival: &Pmf, input: &SeparationDist, limits: &Limits) -> Result<SeparationDist> {
    output_dist_with(arrival, input, limits, Priority::Lowest)
}

/// As [`output_dist`], with each probe at a uniformly random position in its
/// slot's batch.
pub fn output_dist_equal_priority(
    arrival: &Pmf,
    input: &SeparationDist,
    limits: &Limits,
) -> Result<SeparationDist> {
    output_dist_with(arrival, input, limits, Priority::Equal)
}

fn output_dist_with(
    arrival: &Pmf,
    input: &SeparationDist,
    limits: &Limits,
    priority: Priority,
) -> Result<SeparationDist> {
    limits.validate()?;
    let above = input.pmf().mass_above(limits.n2);
    if above > limits.tail_tolerance {
        return Err(Error::Truncation {
            stage: 0,
            leaked: above,
            tolerance: limits.tail_tolerance,
        });
    }
    let rows = input.max_separation().min(limits.n2);
    let kernel = ConditionalKernel::from_arrival(arrival, arrival.mean(), priority, limits, rows)?;
    Ok(kernel.mix(input).into_separation().renormalize())
}
