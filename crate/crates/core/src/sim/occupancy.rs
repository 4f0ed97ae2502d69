use rand_distr::Distribution;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::stationary::Observation;

use super::engine::stream;

/// Long-run frequencies of the queue length of a lone queue, sampled every
/// slot before or after that slot's batch. Entry `n_max` collects every
/// longer queue.
pub fn occupancy_histogram(
    model: &ArrivalModel,
    slots: u64,
    warmup: u64,
    seed: u64,
    observation: Observation,
    n_max: usize,
) -> Result<Vec<f64>> {
    model.validate()?;
    if slots == 0 {
        return Err(Error::EmptySamples);
    }
    let mut rng = stream(seed, 7);
    let sampler: Box<dyn Fn(&mut rand_chacha::ChaCha8Rng) -> u64> = match model {
        ArrivalModel::Poisson { rate } if *rate > 0.0 => {
            let d = rand_distr::Poisson::new(*rate).map_err(|_| Error::Stability { rate: *rate })?;
            Box::new(move |r| d.sample(r) as u64)
        }
        ArrivalModel::Poisson { .. } => Box::new(|_| 0),
        ArrivalModel::Explicit(mass) => {
            let d = rand::distr::weighted::WeightedIndex::new(mass)
                .map_err(|e| Error::InvalidPmf(e.to_string()))?;
            Box::new(move |r| d.sample(r) as u64)
        }
    };
    let mut counts = vec![0u64; n_max + 1];
    let mut q = 0u64;
    for slot in 0..warmup + slots {
        let a = sampler(&mut rng);
        let record = slot >= warmup;
        if record && observation == Observation::Early {
            counts[(q as usize).min(n_max)] += 1;
        }
        q += a;
        if record && observation == Observation::Late {
            counts[(q as usize).min(n_max)] += 1;
        }
        q = q.saturating_sub(1);
    }
    Ok(counts.iter().map(|&c| c as f64 / slots as f64).collect())
}
