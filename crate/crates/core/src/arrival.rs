//! I.i.d. batch-arrival laws for a single queue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::Pmf;

/// Per-slot batch size distribution of cross traffic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArrivalModel {
    /// Poisson batches with the given mean (packets per slot).
    Poisson { rate: f64 },
    /// An arbitrary batch-size pmf, indexed from zero.
    Explicit(Vec<f64>),
}

impl ArrivalModel {
    pub fn poisson(rate: f64) -> Result<Self> {
        let model = ArrivalModel::Poisson { rate };
        model.validate()?;
        Ok(model)
    }

    pub fn explicit(mass: Vec<f64>) -> Result<Self> {
        let model = ArrivalModel::Explicit(mass);
        model.validate()?;
        Ok(model)
    }

    /// Mean batch size `E[A_0]`.
    pub fn mean(&self) -> f64 {
        match self {
            ArrivalModel::Poisson { rate } => *rate,
            ArrivalModel::Explicit(mass) => mass.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
        }
    }

    /// The scalar parameter estimated by the tomography layer, when the
    /// family has one.
    pub fn rate(&self) -> Option<f64> {
        match self {
            ArrivalModel::Poisson { rate } => Some(*rate),
            ArrivalModel::Explicit(_) => None,
        }
    }

    /// Same family with a new rate. Only one-parameter families support this.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        match self {
            ArrivalModel::Poisson { .. } => ArrivalModel::poisson(rate),
            ArrivalModel::Explicit(_) => Err(Error::Usage(
                "explicit-pmf arrival models carry no rate parameter".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArrivalModel::Poisson { rate } => {
                if !rate.is_finite() || *rate < 0.0 || *rate >= 1.0 {
                    return Err(Error::Stability { rate: *rate });
                }
            }
            ArrivalModel::Explicit(mass) => {
                let pmf = Pmf::new(0, mass.clone())?;
                if pmf.tail_mass() > 1e-9 {
                    return Err(Error::InvalidPmf(format!(
                        "explicit arrival pmf sums to {}, expected 1",
                        pmf.total()
                    )));
                }
                let mean = self.mean();
                if mean >= 1.0 {
                    return Err(Error::Stability { rate: mean });
                }
            }
        }
        Ok(())
    }

    /// Key identifying the law bit-for-bit, for kernel caching.
    pub(crate) fn cache_key(&self) -> Vec<u64> {
        match self {
            ArrivalModel::Poisson { rate } => vec![0, rate.to_bits()],
            ArrivalModel::Explicit(mass) => {
                std::iter::once(1).chain(mass.iter().map(|p| p.to_bits())).collect()
            }
        }
    }
}

/// Evaluates `p_0 ..= p_{n_max}`; the mass beyond `n_max` is kept as the tail.
pub fn materialize_arrival_pmf(model: &ArrivalModel, n_max: usize) -> Result<Pmf> {
    model.validate()?;
    match model {
        ArrivalModel::Poisson { rate } => {
            let mut mass = Vec::with_capacity(n_max + 1);
            let mut term = (-rate).exp();
            for k in 0..=n_max {
                if k > 0 {
                    term *= rate / k as f64;
                }
                mass.push(term);
            }
            // Sum the tail directly; `1 - sum` would bottom out at round-off.
            let mut tail = 0.0;
            let mut k = n_max;
            loop {
                k += 1;
                term *= rate / k as f64;
                if term == 0.0 || term < tail * 1e-17 {
                    break;
                }
                tail += term;
            }
            Pmf::with_tail(0, mass, tail)
        }
        ArrivalModel::Explicit(full) => {
            let kept: Vec<f64> = full.iter().copied().take(n_max + 1).collect();
            let dropped: f64 = full.iter().skip(n_max + 1).sum();
            let stored_deficit = (1.0 - full.iter().sum::<f64>()).max(0.0);
            Pmf::with_tail(0, kept, dropped + stored_deficit)
        }
    }
}

/// Law of the number of same-slot packets queued ahead of (equivalently,
/// behind) a probe placed uniformly at random within its batch:
/// `P{A' = k} = sum_{j >= k} P{A_0 = j} / (j + 1)`.
pub fn position_split_pmf(arrival: &Pmf) -> Pmf {
    let bound = arrival.truncation_bound();
    let mut out = vec![0.0; bound + 1];
    let mut acc = 0.0;
    for j in (0..=bound).rev() {
        acc += arrival.get(j) / (j as f64 + 1.0);
        out[j] = acc;
    }
    Pmf::with_tail(0, out, arrival.tail_mass()).expect("split law preserves validity")
}
