//! Random link delays acting on a probe separation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::separation::SeparationDist;

/// Row sums must match one within this.
pub const ROW_SUM_SLACK: f64 = 1e-9;

/// `P{d' = j | d = i}` for the separation after a link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DelayKernel {
    /// Fixed delay; separations pass through unchanged.
    Identity,
    /// Each probe meets at most one extra packet on the link, independently
    /// with probability `alpha`.
    LightLoad { alpha: f64 },
    /// Sparse rows keyed by the incoming separation.
    Explicit { rows: BTreeMap<usize, Vec<(usize, f64)>> },
}

impl Default for DelayKernel {
    fn default() -> Self {
        DelayKernel::Identity
    }
}

pub fn light_load_kernel(alpha: f64) -> Result<DelayKernel> {
    let kernel = DelayKernel::LightLoad { alpha };
    kernel.validate()?;
    Ok(kernel)
}

impl DelayKernel {
    pub fn explicit(rows: BTreeMap<usize, Vec<(usize, f64)>>) -> Result<Self> {
        let kernel = DelayKernel::Explicit { rows };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn is_identity(&self) -> bool {
        match self {
            DelayKernel::Identity => true,
            DelayKernel::LightLoad { alpha } => *alpha == 0.0,
            DelayKernel::Explicit { .. } => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DelayKernel::Identity => Ok(()),
            DelayKernel::LightLoad { alpha } => {
                if (0.0..=1.0).contains(alpha) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("light-load alpha {alpha} outside [0, 1]")))
                }
            }
            DelayKernel::Explicit { rows } => {
                for (&from, row) in rows {
                    if from < 1 {
                        return Err(Error::Domain("delay kernel row for separation 0".into()));
                    }
                    let mut sum = 0.0;
                    for &(to, p) in row {
                        if to < 1 {
                            return Err(Error::Domain(format!(
                                "delay kernel row {from} maps to separation 0"
                            )));
                        }
                        if !(p >= 0.0) {
                            return Err(Error::InvalidPmf(format!("delay kernel row {from} has entry {p}")));
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > ROW_SUM_SLACK {
                        return Err(Error::InvalidPmf(format!("delay kernel row {from} sums to {sum}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Row for incoming separation `i`, or `None` if the kernel does not cover it.
    pub fn row(&self, i: usize) -> Option<Vec<(usize, f64)>> {
        if i < 1 {
            return None;
        }
        match self {
            DelayKernel::Identity => Some(vec![(i, 1.0)]),
            DelayKernel::LightLoad { alpha } => {
                let a = *alpha;
                if a == 0.0 {
                    return Some(vec![(i, 1.0)]);
                }
                if i == 1 {
                    Some(vec![(1, 1.0 - a), (2, a)])
                } else {
                    let side = a * (1.0 - a);
                    Some(vec![(i - 1, side), (i, 1.0 - 2.0 * side), (i + 1, side)])
                }
            }
            DelayKernel::Explicit { rows } => rows.get(&i).cloned(),
        }
    }
}

/// `P{d' = j} = Σ_i P{d' = j | d = i} P{d = i}`.
pub fn apply_delay_kernel(sep: &SeparationDist, kernel: &DelayKernel) -> Result<SeparationDist> {
    if kernel.is_identity() {
        return Ok(sep.clone());
    }
    let mut out: Vec<f64> = Vec::new();
    for i in 1..=sep.max_separation() {
        let w = sep.get(i);
        if w == 0.0 {
            continue;
        }
        let row = kernel.row(i).ok_or(Error::KernelDomain { separation: i })?;
        for (j, p) in row {
            if out.len() < j {
                out.resize(j, 0.0);
            }
            out[j - 1] += w * p;
        }
    }
    Ok(SeparationDist::from_parts(out, sep.pmf().tail_mass()))
}

/// Joint law of the separations handed to several children of one node:
/// `P{d'_1 = x_1, ..., d'_k = x_k | d = i}`. Listed children take their input
/// from this kernel instead of their own edge kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDelayKernel {
    /// Child node ids, in the order of each outcome vector.
    pub children: Vec<usize>,
    pub rows: BTreeMap<usize, Vec<(Vec<usize>, f64)>>,
}

impl JointDelayKernel {
    /// Independent edges written as a joint kernel, over incoming
    /// separations `1..=n`.
    pub fn independent(children: Vec<usize>, kernels: &[DelayKernel], n: usize) -> Result<Self> {
        if children.len() != kernels.len() {
            return Err(Error::Usage("one edge kernel per child expected".into()));
        }
        let mut rows = BTreeMap::new();
        for i in 1..=n {
            let mut outcomes: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for k in kernels {
                let row = k.row(i).ok_or(Error::KernelDomain { separation: i })?;
                outcomes = outcomes
                    .into_iter()
                    .flat_map(|(v, p)| {
                        row.iter().map(move |&(x, q)| {
                            let mut v = v.clone();
                            v.push(x);
                            (v, p * q)
                        })
                    })
                    .collect();
            }
            rows.insert(i, outcomes);
        }
        Ok(Self { children, rows })
    }

    pub fn validate(&self) -> Result<()> {
        for (&from, row) in &self.rows {
            let mut sum = 0.0;
            for (xs, p) in row {
                if xs.len() != self.children.len() || xs.iter().any(|&x| x < 1) {
                    return Err(Error::Domain(format!("joint delay row {from} has a malformed outcome")));
                }
                if !(*p >= 0.0) {
                    return Err(Error::InvalidPmf(format!("joint delay row {from} has entry {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_SLACK {
                return Err(Error::InvalidPmf(format!("joint delay row {from} sums to {sum}")));
            }
        }
        Ok(())
    }
}
