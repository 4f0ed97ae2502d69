//! Truncated probability mass functions over the non-negative integers.
//!
//! Mass is stored for the indices `offset ..= offset + len - 1`; whatever is
//! missing from unit total is kept explicitly as [`Pmf::tail_mass`] instead
//! of being renormalized away.

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed on the total before a vector is rejected as over-normalized.
pub const SUM_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pmf {
    offset: usize,
    mass: Vec<f64>,
    tail_mass: f64,
}

impl Pmf {
    /// Builds a pmf whose tail deficit is `1 - sum(mass)`.
    pub fn new(offset: usize, mass: Vec<f64>) -> Result<Self> {
        let total = validate(&mass)?;
        Ok(Self {
            offset,
            mass,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    /// Builds a pmf with an explicitly known tail (more accurate than the
    /// subtraction `1 - sum` when the tail is tiny).
    pub fn with_tail(offset: usize, mass: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let total = validate(&mass)?;
        if !(tail_mass >= 0.0) || total + tail_mass > 1.0 + 1e-9 {
            return Err(Error::InvalidPmf(format!(
                "tail mass {tail_mass} inconsistent with stored total {total}"
            )));
        }
        Ok(Self {
            offset,
            mass,
            tail_mass,
        })
    }

    pub fn point(at: usize) -> Self {
        Self {
            offset: at,
            mass: vec![1.0],
            tail_mass: 0.0,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Largest index with stored mass.
    pub fn truncation_bound(&self) -> usize {
        (self.offset + self.mass.len()).saturating_sub(1)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Probability of index `k` (zero outside the stored range).
    pub fn get(&self, k: usize) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        self.mass.get(k - self.offset).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, p)| (i + self.offset) as f64 * p)
            .sum()
    }

    /// Mass stored strictly above index `bound`.
    pub fn mass_above(&self, bound: usize) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| i + self.offset > bound)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn ensure_tail_below(&self, tolerance: f64) -> Result<()> {
        if self.tail_mass >= tolerance {
            return Err(Error::Truncation {
                stage: 0,
                leaked: self.tail_mass,
                tolerance,
            });
        }
        Ok(())
    }

    /// Dense copy of the mass over indices `0 ..= bound` (zero-padded).
    pub fn dense_to(&self, bound: usize) -> Vec<f64> {
        (0..=bound).map(|k| self.get(k)).collect()
    }

    /// Rescales stored mass to unit total. Returns the pre-normalization total.
    pub fn renormalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            for p in &mut self.mass {
                *p /= total;
            }
            self.tail_mass = 0.0;
        }
        total
    }

    /// Total-variation distance over the union of both supports.
    pub fn tv_distance(&self, other: &Pmf) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = self.truncation_bound().max(other.truncation_bound());
        0.5 * (lo..=hi)
            .map(|k| (self.get(k) - other.get(k)).abs())
            .sum::<f64>()
    }

    /// `index,mass` rows with a header line.
    pub fn to_csv(&self, index_name: &str) -> String {
        let mut out = format!("{index_name},probability\n");
        for (i, p) in self.mass.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + self.offset, p));
        }
        out
    }

    /// JSON array of `[index, mass]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.mass
                .iter()
                .enumerate()
                .map(|(i, p)| serde_json::json!([i + self.offset, p]))
                .collect(),
        )
    }
}

fn validate(mass: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &p) in mass.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
        }
        total += p;
    }
    if total > 1.0 + SUM_SLACK {
        return Err(Error::InvalidPmf(format!("entries sum to {total} > 1")));
    }
    Ok(total)
}

/// Discrete convolution of two dense vectors, truncated to `len` entries.
pub(crate) fn convolve_truncated(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (k, &y) in b.iter().enumerate().take(len - i) {
            out[i + k] += x * y;
        }
    }
    out
}
