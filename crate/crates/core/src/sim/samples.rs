use crate::error::{Error, Result};
use crate::network::LeafJointDist;

use super::engine::{DispersionSamples, SampleRecord};

fn histogram(records: &[SampleRecord], leaves: &[usize], n3: usize) -> Result<LeafJointDist> {
    if records.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut out = LeafJointDist::zeros(leaves.to_vec(), n3);
    let w = 1.0 / records.len() as f64;
    let mut overflow = 0.0;
    for r in records {
        if r.separations.iter().any(|&d| d > n3 || d < 1) {
            overflow += w;
            continue;
        }
        let code = out.encode(&r.separations)?;
        out.add(code, w);
    }
    out.set_overflow(overflow);
    Ok(out)
}

/// Relative frequencies of the observed separation vectors; samples with a
/// coordinate past `n3` are counted in the overflow only.
pub fn empirical_dist(samples: &DispersionSamples, n3: usize) -> Result<LeafJointDist> {
    histogram(&samples.records, &samples.leaves, n3)
}

/// Exponentially blended per-block frequencies:
/// `Ψ̂_1 = inst_1`, `Ψ̂_n = (1 - a) Ψ̂_{n-1} + a inst_n`.
///
/// Only complete blocks of `block` consecutive pairs are used.
pub fn blocked_empirical_stream(
    samples: &DispersionSamples,
    block: usize,
    a: f64,
    n3: usize,
) -> Result<Vec<LeafJointDist>> {
    if block < 1 {
        return Err(Error::Usage("block size must be at least 1".into()));
    }
    let mut blender = Blender::new(a)?;
    samples
        .records
        .chunks_exact(block)
        .map(|chunk| {
            let inst = histogram(chunk, &samples.leaves, n3)?;
            blender.push(&inst)
        })
        .collect()
}

/// The exponential update rule applied one block at a time.
#[derive(Clone, Debug)]
pub struct Blender {
    a: f64,
    current: Option<LeafJointDist>,
}

impl Blender {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Usage(format!("blending weight {a} outside (0, 1]")));
        }
        Ok(Self { a, current: None })
    }

    pub fn push(&mut self, inst: &LeafJointDist) -> Result<LeafJointDist> {
        let next = match self.current.take() {
            None => inst.clone(),
            Some(mut prev) => {
                prev.scale(1.0 - self.a);
                prev.add_scaled(self.a, inst)?;
                prev
            }
        };
        self.current = Some(next.clone());
        Ok(next)
    }

    pub fn current(&self) -> Option<&LeafJointDist> {
        self.current.as_ref()
    }
}
