use crate::error::{Error, Result};

use super::params::ParameterVector;

pub const DEFAULT_H: f64 = 1e-3;

/// Finite-difference gradient of `cost` at `at`.
///
/// Central differences where `at ± h` stays in the box; at a box edge the
/// one-sided difference into the box is used instead.
pub fn numeric_gradient<F>(cost: F, at: &ParameterVector, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("finite-difference step {h} must be positive")));
    }
    let mut grad = Vec::with_capacity(at.len());
    let mut centre: Option<f64> = None;
    for k in 0..at.len() {
        let x = at.values[k];
        let up = x + h <= at.hi[k];
        let down = x - h >= at.lo[k];
        let shifted = |d: f64| {
            let mut v = at.values.clone();
            v[k] = x + d;
            cost(&v)
        };
        let g = match (up, down) {
            (true, true) => (shifted(h)? - shifted(-h)?) / (2.0 * h),
            (true, false) => {
                let c = match centre {
                    Some(c) => c,
                    None => *centre.insert(cost(&at.values)?),
                };
                (shifted(h)? - c) / h
            }
            (false, true) => {
                let c = match centre {
                    Some(c) => c,
                    None => *centre.insert(cost(&at.values)?),
                };
                (c - shifted(-h)?) / h
            }
            (false, false) => {
                return Err(Error::Domain(format!(
                    "box for coordinate {k} is narrower than the step {h}"
                )))
            }
        };
        grad.push(g);
    }
    Ok(grad)
}
