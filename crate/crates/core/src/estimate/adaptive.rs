use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LeafJointDist;
use crate::sim::{blocked_empirical_stream, Blender, DispersionSamples};

use super::gradient::{numeric_gradient, DEFAULT_H};
use super::objective::Objective;
use super::params::ParameterVector;

/// Kernels kept between steps before the cache is flushed. Every step asks
/// for new rates, so an unbounded cache would only grow.
const CACHE_KEEP: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSettings {
    /// Blending weight of each new block.
    pub a: f64,
    /// Pairs per block.
    pub block: usize,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Step-size factor after a step that increased the distance.
    pub decrease: f64,
    /// Step-size factor when the gradient norm exceeds `grad_threshold`.
    pub increase: f64,
    pub grad_threshold: f64,
    /// Finite-difference step.
    pub h: f64,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            a: 0.05,
            block: 500,
            alpha0: 0.02,
            alpha_min: 1e-4,
            alpha_max: 0.1,
            decrease: 0.5,
            increase: 1.2,
            grad_threshold: 0.05,
            h: DEFAULT_H,
        }
    }
}

impl AdaptiveSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("adaptive settings: {what}")));
        if !(self.a > 0.0 && self.a <= 1.0) {
            return bad("a must lie in (0, 1]");
        }
        if self.block < 1 {
            return bad("block must be at least 1");
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0 && self.alpha0 <= self.alpha_max) {
            return bad("need 0 < alpha_min <= alpha0 <= alpha_max");
        }
        if !(self.decrease > 0.0 && self.decrease < 1.0) || !(self.increase >= 1.0) {
            return bad("decrease must lie in (0, 1) and increase be at least 1");
        }
        if !(self.h > 0.0) || !(self.grad_threshold >= 0.0) {
            return bad("h must be positive and grad_threshold non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorState {
    pub estimate: ParameterVector,
    blender: Blender,
    pub alpha: f64,
    /// Blocks consumed so far.
    pub n: usize,
    pub settings: AdaptiveSettings,
    pub last_distance: Option<f64>,
}

impl EstimatorState {
    pub fn new(initial: ParameterVector, settings: AdaptiveSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            estimate: initial,
            blender: Blender::new(settings.a)?,
            alpha: settings.alpha0,
            n: 0,
            settings,
            last_distance: None,
        })
    }

    /// The blended empirical table, once a block has been seen.
    pub fn blended(&self) -> Option<&LeafJointDist> {
        self.blender.current()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    /// Launch slot of the block's last pair, when known.
    pub slot: Option<u64>,
    pub estimate: Vec<f64>,
    /// Distance at the new estimate against the current blend.
    pub distance: f64,
    /// Step size used for this step.
    pub alpha: f64,
    pub gradient_norm: f64,
    pub skipped: bool,
}

/// Blends in one block and takes one normalized steepest-descent step.
///
/// A step that raised the distance halves (by `decrease`) the next step
/// size; otherwise a gradient norm above `grad_threshold` grows it (by
/// `increase`). The step size stays in `[alpha_min, alpha_max]`. A zero
/// gradient, or a blend the model already fits exactly, skips the step.
pub fn adaptive_step(
    mut state: EstimatorState,
    new_block: &LeafJointDist,
    objective: &Objective,
) -> Result<(EstimatorState, TraceRecord)> {
    if state.estimate.len() != objective.dim() {
        return Err(Error::Usage(format!(
            "estimate has {} rates for {} queues",
            state.estimate.len(),
            objective.dim()
        )));
    }
    objective.trim_cache(CACHE_KEEP);
    let blended = state.blender.push(new_block)?;
    state.n += 1;
    let s = state.settings;
    let alpha = state.alpha;

    let cost = |v: &[f64]| objective.cost(&blended, v);
    let d_cur = cost(&state.estimate.values)?;
    let grad = numeric_gradient(cost, &state.estimate, s.h)?;
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

    if d_cur <= 0.0 || !(norm > 0.0) || !norm.is_finite() {
        state.last_distance = Some(d_cur);
        let rec = TraceRecord {
            n: state.n,
            slot: None,
            estimate: state.estimate.values.clone(),
            distance: d_cur,
            alpha,
            gradient_norm: norm,
            skipped: true,
        };
        return Ok((state, rec));
    }

    let next: Vec<f64> = state
        .estimate
        .values
        .iter()
        .zip(&grad)
        .map(|(v, g)| v - alpha * g / norm)
        .collect();
    state.estimate = state.estimate.moved_to(next);
    let d_new = cost(&state.estimate.values)?;

    state.alpha = if d_new > d_cur {
        alpha * s.decrease
    } else if norm > s.grad_threshold {
        alpha * s.increase
    } else {
        alpha
    }
    .clamp(s.alpha_min, s.alpha_max);
    state.last_distance = Some(d_new);

    let rec = TraceRecord {
        n: state.n,
        slot: None,
        estimate: state.estimate.values.clone(),
        distance: d_new,
        alpha,
        gradient_norm: norm,
        skipped: false,
    };
    Ok((state, rec))
}

/// Feeds every complete block of `samples` through [`adaptive_step`].
pub fn run_adaptive(
    samples: &DispersionSamples,
    objective: &Objective,
    initial: ParameterVector,
    settings: AdaptiveSettings,
) -> Result<(EstimatorState, Vec<TraceRecord>)> {
    let mut state = EstimatorState::new(initial, settings)?;
    let n3 = objective.limits().n3;
    let blocks = blocked_empirical_stream(samples, settings.block, 1.0, n3)?;
    let mut trace = Vec::with_capacity(blocks.len());
    for (i, block) in blocks.iter().enumerate() {
        let (next, mut rec) = adaptive_step(state, block, objective)?;
        rec.slot = Some(samples.records[(i + 1) * settings.block - 1].launch_slot);
        trace.push(rec);
        state = next;
    }
    Ok((state, trace))
}

/// `n,slot,lambda_1..lambda_K,distance,step_size,skipped`.
pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let k = trace.first().map_or(0, |r| r.estimate.len());
    let mut out = String::from("n,slot,");
    for i in 1..=k {
        out.push_str(&format!("lambda_{i},"));
    }
    out.push_str("distance,step_size,skipped\n");
    for r in trace {
        out.push_str(&format!("{},", r.n));
        if let Some(s) = r.slot {
            out.push_str(&s.to_string());
        }
        out.push(',');
        for v in &r.estimate {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{},{},{}\n", r.distance, r.alpha, r.skipped));
    }
    out
}
