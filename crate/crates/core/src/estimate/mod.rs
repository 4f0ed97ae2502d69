//! Rate estimation by matching model separation laws to empirical ones.

mod adaptive;
mod distance;
mod gradient;
mod grid;
mod objective;
mod params;

pub use adaptive::{adaptive_step, run_adaptive, trace_to_csv, AdaptiveSettings, EstimatorState, TraceRecord};
pub use distance::{euclidean_distance, kl_distance, kl_distance_unsmoothed, Distance, KL_FLOOR};
pub use gradient::{numeric_gradient, DEFAULT_H};
pub use grid::{
    grid_search, grid_search_with, Axis, CostSurface, GridOutcome, GridSpec, SearchOptions, ValleyWitness,
};
pub use objective::Objective;
pub use params::{ParameterVector, DEFAULT_HI, DEFAULT_LO};
