use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LO: f64 = 0.01;
pub const DEFAULT_HI: f64 = 0.99;

/// Per-queue arrival rates in node-id order, with a box constraint on each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParameterVector {
    /// Default box `[0.01, 0.99]` on every coordinate. Values are projected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let k = values.len();
        Self::with_box(values, vec![DEFAULT_LO; k], vec![DEFAULT_HI; k])
    }

    pub fn with_box(values: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if values.is_empty() || lo.len() != values.len() || hi.len() != values.len() {
            return Err(Error::Usage("parameter vector and box must have equal, non-zero length".into()));
        }
        for (k, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l >= 0.0 && l <= h && h < 1.0) {
                return Err(Error::Domain(format!("box [{l}, {h}] for coordinate {k} is not inside [0, 1)")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameter values must be finite".into()));
        }
        let mut out = Self { values, lo, hi };
        out.project();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamp each coordinate into its box.
    pub fn project(&mut self) {
        for ((v, &l), &h) in self.values.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(l, h);
        }
    }

    pub fn in_box(&self) -> bool {
        self.values
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| l <= v && v <= h)
    }

    /// Same box, new values (projected).
    pub fn moved_to(&self, values: Vec<f64>) -> Self {
        let mut out = Self {
            values,
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        };
        out.project();
        out
    }
}
