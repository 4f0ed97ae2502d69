//! Distributions of probe separations (support starts at one slot).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmf::Pmf;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationDist {
    pmf: Pmf,
    /// Stored total before the final renormalization, when one was applied.
    renormalized_from: Option<f64>,
}

impl SeparationDist {
    /// `mass[i]` is the probability of separation `i + 1`.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        Ok(Self {
            pmf: Pmf::new(1, mass)?,
            renormalized_from: None,
        })
    }

    pub fn from_pmf(pmf: Pmf) -> Result<Self> {
        if pmf.offset() < 1 {
            if pmf.get(0) > 0.0 {
                return Err(Error::Domain("separation must be at least one slot".into()));
            }
            let mass = pmf.mass()[1 - pmf.offset()..].to_vec();
            return Ok(Self {
                pmf: Pmf::with_tail(1, mass, pmf.tail_mass())?,
                renormalized_from: None,
            });
        }
        if pmf.offset() == 1 {
            return Ok(Self {
                pmf,
                renormalized_from: None,
            });
        }
        let mut mass = vec![0.0; pmf.offset() - 1];
        mass.extend_from_slice(pmf.mass());
        Ok(Self {
            pmf: Pmf::with_tail(1, mass, pmf.tail_mass())?,
            renormalized_from: None,
        })
    }

    pub fn point(separation: usize) -> Result<Self> {
        if separation < 1 {
            return Err(Error::Domain("separation must be at least one slot".into()));
        }
        let mut mass = vec![0.0; separation];
        mass[separation - 1] = 1.0;
        Self::new(mass)
    }

    pub(crate) fn from_parts(mass: Vec<f64>, tail: f64) -> Self {
        let tail = tail.max(0.0);
        Self {
            pmf: Pmf::with_tail(1, mass, tail).expect("kernel output is a valid sub-distribution"),
            renormalized_from: None,
        }
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    /// Probability of separation `s`.
    pub fn get(&self, s: usize) -> f64 {
        self.pmf.get(s)
    }

    /// Largest separation with stored mass.
    pub fn max_separation(&self) -> usize {
        self.pmf.truncation_bound()
    }

    /// Mass lost to truncation (before any renormalization).
    pub fn leakage(&self) -> f64 {
        match self.renormalized_from {
            Some(total) => 1.0 - total,
            None => self.pmf.tail_mass(),
        }
    }

    pub fn renormalized_from(&self) -> Option<f64> {
        self.renormalized_from
    }

    pub fn mean(&self) -> f64 {
        self.pmf.mean()
    }

    pub fn tv_distance(&self, other: &SeparationDist) -> f64 {
        self.pmf.tv_distance(&other.pmf)
    }

    /// Dense `[P{d=1}, ..., P{d=n}]`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|s| self.get(s)).collect()
    }

    /// Final-stage renormalization; records the factor and logs it.
    pub fn renormalize(mut self) -> Self {
        let total = self.pmf.renormalize();
        if total < 1.0 {
            log::debug!("renormalized separation distribution by 1/{total}");
        }
        self.renormalized_from = Some(total);
        self
    }

    pub fn to_csv(&self) -> String {
        self.pmf.to_csv("separation")
    }

    pub fn to_json(&self) -> serde_json::Value {
        self.pmf.to_json()
    }
}
