use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::LeafJointDist;

use super::objective::Objective;
use super::params::{ParameterVector, DEFAULT_HI, DEFAULT_LO};

/// Values `lo, lo + step, ...` up to `hi` on one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let axis = Self { lo, hi, step };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Domain(format!("bad grid axis {self:?}")));
        }
        if !(self.lo >= 0.0 && self.hi < 1.0) {
            return Err(Error::Domain(format!("grid axis {self:?} leaves [0, 1)")));
        }
        Ok(())
    }

    /// Grid values. Computed as `lo + i * step` and rounded to 12 decimals so
    /// that, for example, 0.01-step grids hit two-decimal rates exactly.
    pub fn points(&self) -> Vec<f64> {
        if self.hi < self.lo {
            return Vec::new();
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| round12(self.lo + i as f64 * self.step)).collect()
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Cartesian search grid with optional coarse-to-fine refinement.
///
/// The first level searches `axes` as given. Every later level `step`
/// searches, per coordinate, the window `best ± previous step` (clipped to
/// the axis range) on the lattice `lo + i * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub refine: Vec<f64>,
}

impl GridSpec {
    pub fn uniform(k: usize, lo: f64, hi: f64, step: f64) -> Result<Self> {
        Ok(Self {
            axes: vec![Axis::new(lo, hi, step)?; k],
            refine: Vec::new(),
        })
    }

    /// Step 0.01 over `[0.01, 0.99]` for one or two queues; for more, a
    /// 0.07 grid refined to 0.01.
    pub fn default_for(k: usize) -> Self {
        if k <= 2 {
            Self::uniform(k, DEFAULT_LO, DEFAULT_HI, 0.01).expect("valid default")
        } else {
            Self {
                axes: vec![Axis::new(DEFAULT_LO, DEFAULT_HI, 0.07).expect("valid default"); k],
                refine: vec![0.01],
            }
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.axes.len() != k {
            return Err(Error::Config(format!("grid has {} axes for {k} queues", self.axes.len())));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.refine.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("refinement steps must be positive".into()));
        }
        Ok(())
    }

    /// Number of points on the first level.
    pub fn first_level_size(&self) -> usize {
        self.axes.iter().map(|a| a.points().len()).product()
    }
}

/// Every evaluated point with its cost, in evaluation order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostSurface {
    pub points: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
}

impl CostSurface {
    /// `lambda_1,...,lambda_K,cost,log_cost`; `log_cost` is the natural log
    /// of the cost (`-inf` at exact zeros).
    pub fn to_csv(&self) -> String {
        let k = self.points.first().map_or(0, Vec::len);
        let mut out = String::new();
        for i in 1..=k {
            out.push_str(&format!("lambda_{i},"));
        }
        out.push_str("cost,log_cost\n");
        for (p, c) in self.points.iter().zip(&self.costs) {
            for v in p {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{c},{}\n", c.ln()));
        }
        out
    }

    /// Index of the smallest cost; ties and NaNs resolve to the lowest index
    /// (NaN never wins).
    pub fn argmin(&self) -> Option<usize> {
        argmin(&self.costs)
    }

    /// Straight-line fit to the valley of a two-parameter surface.
    ///
    /// Takes the columns (fixed first coordinate) within `half_width` of the
    /// minimizing column, fits `λ₂ = intercept + slope·λ₁` through each
    /// column's minimizer by least squares, then compares the cost range
    /// along that line with the cost range over the same columns.
    pub fn valley_witness(&self, half_width: f64) -> Result<ValleyWitness> {
        if self.points.first().is_none_or(|p| p.len() != 2) {
            return Err(Error::Usage("valley witness needs a two-parameter surface".into()));
        }
        let best = self.argmin().ok_or(Error::EmptyGrid)?;
        let centre = self.points[best][0];
        let mut columns: std::collections::BTreeMap<u64, Vec<usize>> = std::collections::BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            if (p[0] - centre).abs() <= half_width + 1e-12 {
                columns.entry(p[0].to_bits()).or_default().push(i);
            }
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for idx in columns.values() {
            let costs: Vec<f64> = idx.iter().map(|&i| self.costs[i]).collect();
            let j = idx[argmin(&costs).expect("non-empty column")];
            xs.push(self.points[j][0]);
            ys.push(self.points[j][1]);
            for c in costs.into_iter().filter(|c| c.is_finite()) {
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        if xs.len() < 2 {
            return Err(Error::Usage("valley witness needs at least two columns".into()));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;

        let mut along_lo = f64::INFINITY;
        let mut along_hi = f64::NEG_INFINITY;
        for idx in columns.values() {
            let x = self.points[idx[0]][0];
            let y = intercept + slope * x;
            let nearest = idx
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (self.points[a][1] - y).abs();
                    let db = (self.points[b][1] - y).abs();
                    da.total_cmp(&db)
                })
                .expect("non-empty column");
            let c = self.costs[nearest];
            along_lo = along_lo.min(c);
            along_hi = along_hi.max(c);
        }
        let along_range = along_hi - along_lo;
        let dynamic_range = hi - lo;
        Ok(ValleyWitness {
            slope,
            intercept,
            columns: xs.len(),
            along_range,
            dynamic_range,
            ratio: along_range / dynamic_range,
        })
    }
}

/// Summary of [`CostSurface::valley_witness`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValleyWitness {
    pub slope: f64,
    pub intercept: f64,
    pub columns: usize,
    /// Cost range along the fitted line.
    pub along_range: f64,
    /// Cost range over the same columns.
    pub dynamic_range: f64,
    pub ratio: f64,
}

pub(crate) fn argmin(costs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &c) in costs.iter().enumerate() {
        let c = if c.is_nan() { f64::INFINITY } else { c };
        match best {
            Some((_, b)) if c >= b => {}
            _ => best = Some((i, c)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub estimate: ParameterVector,
    pub cost: f64,
    /// Every level's points, concatenated; present when requested.
    pub surface: Option<CostSurface>,
}

/// Search options beyond the grid itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SearchOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    pub keep_surface: bool,
}

/// Exhaustive minimization of the objective over the grid.
pub fn grid_search(empirical: &LeafJointDist, objective: &Objective, grid: &GridSpec) -> Result<GridOutcome> {
    grid_search_with(empirical, objective, grid, SearchOptions::default())
}

pub fn grid_search_with(
    empirical: &LeafJointDist,
    objective: &Objective,
    grid: &GridSpec,
    options: SearchOptions,
) -> Result<GridOutcome> {
    let k = objective.dim();
    grid.validate(k)?;
    let run = || search_levels(empirical, objective, grid, options.keep_surface);
    match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Usage(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn search_levels(
    empirical: &LeafJointDist,
    objective: &Objective,
    grid: &GridSpec,
    keep: bool,
) -> Result<GridOutcome> {
    let mut surface = CostSurface {
        points: Vec::new(),
        costs: Vec::new(),
    };
    let mut axes: Vec<Vec<f64>> = grid.axes.iter().map(Axis::points).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut prev_steps: Vec<f64> = grid.axes.iter().map(|a| a.step).collect();

    for level in 0..=grid.refine.len() {
        if level > 0 {
            let step = grid.refine[level - 1];
            let centre = &best.as_ref().expect("previous level had points").0;
            axes = grid
                .axes
                .iter()
                .zip(centre)
                .zip(&prev_steps)
                .map(|((a, &c), &w)| window(a, c, w, step))
                .collect();
            prev_steps = vec![step; axes.len()];
        }
        let points = cartesian(&axes);
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        prewarm(objective, &axes)?;
        let costs: Vec<f64> = points
            .par_iter()
            .map(|p| objective.cost(empirical, p))
            .collect::<Result<_>>()?;
        let i = argmin(&costs).expect("non-empty");
        if best.as_ref().is_none_or(|(_, b)| costs[i] < *b) {
            best = Some((points[i].clone(), costs[i]));
        }
        if keep {
            surface.points.extend(points);
            surface.costs.extend(costs);
        }
    }

    let (values, cost) = best.expect("at least one level");
    let estimate = ParameterVector::with_box(
        values,
        grid.axes.iter().map(|a| a.lo).collect(),
        grid.axes.iter().map(|a| a.hi).collect(),
    )?;
    Ok(GridOutcome {
        estimate,
        cost,
        surface: keep.then_some(surface),
    })
}

/// Lattice points of `axis`'s range with spacing `step`, within `width` of
/// `centre`.
fn window(axis: &Axis, centre: f64, width: f64, step: f64) -> Vec<f64> {
    let lo = (centre - width).max(axis.lo);
    let hi = (centre + width).min(axis.hi);
    let first = ((lo - axis.lo) / step - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::new();
    let mut i = first;
    loop {
        let v = round12(axis.lo + i as f64 * step);
        if v > hi + 1e-12 {
            break;
        }
        out.push(v);
        i += 1;
    }
    out
}

/// Row-major product: the last coordinate varies fastest.
fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Builds each distinct per-queue kernel once, in parallel, before the
/// grid sweep asks for them.
fn prewarm(objective: &Objective, axes: &[Vec<f64>]) -> Result<()> {
    let topo = objective.topology();
    let mut seen = std::collections::HashSet::new();
    let mut jobs = Vec::new();
    for (k, values) in axes.iter().enumerate() {
        let node = topo.node(k);
        for &v in values {
            let model = node.arrival.with_rate(v)?;
            if seen.insert((model.cache_key(), node.priority)) {
                jobs.push((model, node.priority));
            }
        }
    }
    let limits = *objective.limits();
    jobs.par_iter()
        .try_for_each(|(model, priority)| objective.cache().get(model, *priority, &limits).map(|_| ()))
}
