use std::sync::Arc;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::network::{KernelCache, LeafJointDist, Propagator, Topology};
use crate::separation::SeparationDist;

use super::distance::Distance;

/// Maps a rate vector to the model leaf law and its distance to an
/// empirical table.
///
/// Model laws are evaluated leniently: truncation leakage is renormalized
/// away rather than raised, because a search necessarily visits rates the
/// limits were not sized for.
#[derive(Clone, Debug)]
pub struct Objective {
    topology: Topology,
    d0: SeparationDist,
    limits: Limits,
    distance: Distance,
    cache: Arc<KernelCache>,
}

impl Objective {
    pub fn new(topology: Topology, d0: SeparationDist, limits: Limits, distance: Distance) -> Result<Self> {
        limits.validate()?;
        if topology.rates().is_none() {
            return Err(Error::Usage(
                "estimation needs a one-parameter arrival family at every queue".into(),
            ));
        }
        Ok(Self {
            topology,
            d0,
            limits,
            distance,
            cache: Arc::new(KernelCache::new()),
        })
    }

    /// Shares an existing kernel cache.
    pub fn with_cache(mut self, cache: Arc<KernelCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn d0(&self) -> &SeparationDist {
        &self.d0
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    pub fn cache(&self) -> &Arc<KernelCache> {
        &self.cache
    }

    /// Number of estimated rates (one per queue).
    pub fn dim(&self) -> usize {
        self.topology.len()
    }

    /// Renormalized leaf law at `rates`, axes in the topology's leaf order.
    pub fn model(&self, rates: &[f64]) -> Result<LeafJointDist> {
        let topo = self.topology.with_rates(rates)?;
        let run = Propagator::new(&topo, self.limits, &self.cache).run(&self.d0)?;
        if let Err(e) = run.check(self.limits.tail_tolerance) {
            log::debug!("model at {rates:?}: {e}");
        }
        Ok(run.joint.renormalize())
    }

    pub fn cost(&self, empirical: &LeafJointDist, rates: &[f64]) -> Result<f64> {
        self.distance.eval(empirical, &self.model(rates)?)
    }

    /// Drops cached kernels once the cache holds more than `keep` entries.
    pub(crate) fn trim_cache(&self, keep: usize) {
        if self.cache.len() > keep {
            self.cache.clear();
        }
    }
}
