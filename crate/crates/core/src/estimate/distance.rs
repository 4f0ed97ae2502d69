use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LeafJointDist;

/// Model cells below this are raised to it before taking the log, but only
/// where the empirical table has mass.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Kullback-Leibler divergence of the model from the empirical table.
    Kl,
    /// Sum of squared cell differences.
    #[default]
    Euclidean,
}

impl Distance {
    pub fn eval(self, empirical: &LeafJointDist, model: &LeafJointDist) -> Result<f64> {
        match self {
            Distance::Kl => kl_distance(empirical, model),
            Distance::Euclidean => euclidean_distance(empirical, model),
        }
    }
}

/// Cell pairs `(empirical, model)` over the union of both supports.
fn paired_cells(a: &LeafJointDist, b: &LeafJointDist) -> Result<Vec<(f64, f64)>> {
    a.check_shape(b)?;
    if let (Some(x), Some(y)) = (a.dense_cells(), b.dense_cells()) {
        return Ok(x.iter().copied().zip(y.iter().copied()).collect());
    }
    let mut merged: std::collections::BTreeMap<u64, (f64, f64)> = std::collections::BTreeMap::new();
    for (c, v) in a.cells() {
        merged.entry(c).or_default().0 = v;
    }
    for (c, v) in b.cells() {
        merged.entry(c).or_default().1 = v;
    }
    Ok(merged.into_values().collect())
}

/// `Σ_x ψ̂_x log(ψ̂_x / ψ_x)` over the table cells, both sides scaled to unit
/// total first. Model cells are floored at [`KL_FLOOR`] where the empirical
/// table is positive, so truncation alone cannot make the value infinite.
pub fn kl_distance(empirical: &LeafJointDist, model: &LeafJointDist) -> Result<f64> {
    kl_impl(empirical, model, true)
}

/// As [`kl_distance`] without the floor: a model zero under empirical mass
/// is a [`Error::Divergence`].
pub fn kl_distance_unsmoothed(empirical: &LeafJointDist, model: &LeafJointDist) -> Result<f64> {
    kl_impl(empirical, model, false)
}

fn kl_impl(empirical: &LeafJointDist, model: &LeafJointDist, smooth: bool) -> Result<f64> {
    let mut pairs = paired_cells(empirical, model)?;
    let e_total: f64 = pairs.iter().map(|p| p.0).sum();
    if e_total <= 0.0 {
        return Err(Error::EmptySamples);
    }
    for (e, m) in pairs.iter_mut() {
        if *e > 0.0 && *m < KL_FLOOR {
            if !smooth {
                return Err(Error::Divergence { empirical: *e / e_total });
            }
            *m = KL_FLOOR;
        }
    }
    let m_total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut d = 0.0;
    for &(e, m) in &pairs {
        if e > 0.0 {
            let pe = e / e_total;
            d += pe * (pe / (m / m_total)).ln();
        }
    }
    // Gibbs' inequality holds exactly; anything below zero is round-off.
    Ok(d.max(0.0))
}

/// `Σ_x (ψ̂_x - ψ_x)²` over the table cells.
pub fn euclidean_distance(empirical: &LeafJointDist, model: &LeafJointDist) -> Result<f64> {
    Ok(paired_cells(empirical, model)?
        .into_iter()
        .map(|(e, m)| (e - m) * (e - m))
        .sum())
}
