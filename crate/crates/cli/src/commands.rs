use std::fs;
use std::path::{Path, PathBuf};

use disperse_core::estimate::{grid_search_with, trace_to_csv, SearchOptions};
use disperse_core::network::Propagator;
use disperse_core::sim::SampleRecord;
use disperse_core::{
    empirical_dist, op_count, run_adaptive, simulate, DispersionSamples, Error, GridSpec, KernelCache, LeafJointDist,
    Limits, Objective, ParameterVector, SeparationDist, Topology,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Input, Loaded, Mode};
use crate::failure::{io_err, Failure, Outcome};

/// Pairs needed before the analytic and simulated laws are compared.
pub const VERIFY_PAIRS: usize = 50_000;
/// Largest total-variation distance `--verify` accepts.
pub const VERIFY_TV: f64 = 0.01;

pub struct Options {
    pub verify: bool,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    base: &'a Path,
    topo: Topology,
    limits: Limits,
    out: PathBuf,
}

impl<'a> Run<'a> {
    fn new(loaded: &'a Loaded, opts: &'a Options) -> Outcome<Self> {
        let cfg = &loaded.config;
        let topo = cfg.build_topology()?;
        let limits = cfg.limits()?;
        let out = opts.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
        fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
        Ok(Self { cfg, base: &loaded.base, topo, limits, out })
    }

    fn d0(&self) -> Outcome<SeparationDist> {
        Ok(SeparationDist::point(self.cfg.probe.d0)?)
    }

    fn write(&self, name: &str, contents: &str) -> Outcome<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))
    }

    fn write_json(&self, name: &str, value: &Value) -> Outcome<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// Exact leaf law at the configured rates, failing on excess leakage.
    fn analytic(&self) -> Outcome<(LeafJointDist, Vec<f64>)> {
        let cache = KernelCache::new();
        let run = Propagator::new(&self.topo, self.limits, &cache).run(&self.d0()?)?;
        run.check(self.limits.tail_tolerance)?;
        let leak = run.total_leakage();
        Ok((run.joint.renormalize(), std::iter::once(leak).chain(run.stage_leakage).collect()))
    }

    fn simulate(&self) -> Outcome<DispersionSamples> {
        Ok(simulate(&self.cfg.sim_config(&self.topo)?)?)
    }

    /// Cross-checks the exact law against a simulation of the same config.
    fn verify(&self, model: &LeafJointDist, samples: Option<&DispersionSamples>) -> Outcome<Value> {
        let owned;
        let samples = match samples {
            Some(s) => s,
            None => {
                owned = self.simulate()?;
                &owned
            }
        };
        if samples.len() < VERIFY_PAIRS {
            return Err(Failure::Verify(format!(
                "only {} pairs; raise probe.horizon or probe.rate to reach {VERIFY_PAIRS}",
                samples.len()
            )));
        }
        let emp = empirical_dist(samples, self.limits.n3)?;
        let tv = emp.tv_distance(model)?;
        println!("verify: total variation {tv:.5} over {} pairs (limit {VERIFY_TV})", samples.len());
        if tv >= VERIFY_TV {
            return Err(Failure::Verify(format!("total variation {tv:.5} is not below {VERIFY_TV}")));
        }
        Ok(json!({ "pairs": samples.len(), "tv": tv, "limit": VERIFY_TV }))
    }
}

fn joint_json(joint: &LeafJointDist, names: &[String]) -> Value {
    let cells: Vec<Value> = joint
        .cells()
        .into_iter()
        .map(|(c, p)| json!({ "separations": joint.decode(c), "probability": p }))
        .collect();
    json!({ "leaves": names, "cells": cells })
}

pub fn dist(loaded: &Loaded, opts: &Options) -> Outcome<()> {
    let run = Run::new(loaded, opts)?;
    let (joint, leak) = run.analytic()?;
    let names = run.cfg.leaf_names(&run.topo);
    let mut summary = json!({
        "d0": run.cfg.probe.d0,
        "leaves": names,
        "total_leakage": leak[0],
        "stage_leakage": &leak[1..],
    });
    if joint.kappa() == 1 {
        let sep = joint.to_separation()?;
        run.write("dist.csv", &sep.to_csv())?;
        summary["mean"] = json!(sep.mean());
        summary["distribution"] = sep.to_json();
    } else {
        run.write("dist.csv", &joint.to_csv(&names))?;
        summary["distribution"] = joint_json(&joint, &names);
    }
    println!("total truncation leakage: {:.3e}", leak[0]);
    if opts.verify {
        summary["verify"] = run.verify(&joint, None)?;
    }
    run.write_json("dist.json", &summary)
}

pub fn simulate_cmd(loaded: &Loaded, opts: &Options) -> Outcome<()> {
    let run = Run::new(loaded, opts)?;
    let s = run.simulate()?;
    let names = run.cfg.leaf_names(&run.topo);
    if run.cfg.outputs.samples {
        run.write("samples.csv", &s.to_csv())?;
    }
    let emp = empirical_dist(&s, run.limits.n3)?;
    run.write("empirical.csv", &emp.to_csv(&names))?;
    let mut summary = json!({
        "pairs": s.len(),
        "overlapping_pairs": s.overlapping_pairs,
        "end_slot": s.end_slot,
        "overflow": emp.overflow(),
        "empirical": joint_json(&emp, &names),
    });
    println!("{} pairs ({} overlapping)", s.len(), s.overlapping_pairs);
    if opts.verify {
        let (model, _) = run.analytic()?;
        summary["verify"] = run.verify(&model, Some(&s))?;
    }
    run.write_json("summary.json", &summary)
}

/// Rough operation count for a grid: kernel builds for every distinct rate
/// on every axis plus one propagation per point.
pub fn grid_work(grid: &GridSpec, topo: &Topology, limits: &Limits) -> f64 {
    let k = grid.axes.len();
    let mut points = grid.first_level_size() as f64;
    let mut kernels: f64 = grid.axes.iter().map(|a| a.points().len() as f64).sum();
    let mut prev = grid.axes.iter().map(|a| a.step).fold(0.0, f64::max);
    for &step in &grid.refine {
        let per_axis = (2.0 * prev / step).floor() + 1.0;
        points += per_axis.powi(k as i32);
        kernels += per_axis * k as f64;
        prev = step;
    }
    let build = op_count(limits.n2 as u64, limits.n3 as u64).max(0) as f64;
    let per_point = topo.len() as f64 * (limits.n3 as f64).powi(topo.leaves().len() as i32 + 1);
    kernels * build + points * per_point
}

fn check_budget(grid: &GridSpec, run: &Run) -> Outcome<()> {
    let estimated = grid_work(grid, &run.topo, &run.limits);
    let budget = run.cfg.estimator.budget;
    if estimated > budget {
        return Err(Error::Budget { estimated, budget }.into());
    }
    Ok(())
}

fn objective(run: &Run) -> Outcome<Objective> {
    Ok(Objective::new(run.topo.clone(), run.d0()?, run.limits, run.cfg.estimator.distance)?)
}

/// Reads a samples CSV as written by `simulate`.
pub fn read_samples(path: &Path, leaves: &[usize], d0: usize) -> Outcome<DispersionSamples> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, what: &str| Failure::Config(format!("{}:{line}: {what}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty samples file"))?;
    let cols = header.split(',').count();
    if cols != leaves.len() + 1 {
        return Err(bad(1, &format!("{} separation columns for {} leaves", cols - 1, leaves.len())));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let nums: Vec<u64> = line
            .split(',')
            .map(|f| f.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(i + 2, &e.to_string()))?;
        if nums.len() != cols {
            return Err(bad(i + 2, &format!("expected {cols} fields")));
        }
        records.push(SampleRecord {
            probe_id: i as u64,
            launch_slot: nums[0],
            separations: nums[1..].iter().map(|&d| d as usize).collect(),
        });
    }
    let end_slot = records.last().map_or(0, |r| r.launch_slot);
    Ok(DispersionSamples {
        leaves: leaves.to_vec(),
        d0,
        records,
        root_windows: Vec::new(),
        overlapping_pairs: 0,
        audit: Vec::new(),
        end_slot,
    })
}

enum Empirical {
    Table(LeafJointDist),
    Samples(DispersionSamples),
}

fn empirical_input(run: &Run, obj: &Objective) -> Outcome<Empirical> {
    let est = &run.cfg.estimator;
    Ok(match est.input {
        Input::Analytic => {
            let rates = run.topo.rates().expect("objective requires rates");
            Empirical::Table(obj.model(&rates)?)
        }
        Input::Simulate => Empirical::Samples(run.simulate()?),
        Input::Samples => {
            let rel = est
                .samples
                .as_ref()
                .ok_or_else(|| Failure::Config("estimator.input = \"samples\" needs estimator.samples".into()))?;
            Empirical::Samples(read_samples(&run.base.join(rel), run.topo.leaves(), run.cfg.probe.d0)?)
        }
    })
}

fn table_of(run: &Run, e: &Empirical) -> Outcome<LeafJointDist> {
    Ok(match e {
        Empirical::Table(t) => t.clone(),
        Empirical::Samples(s) => empirical_dist(s, run.limits.n3)?,
    })
}

pub fn estimate(loaded: &Loaded, opts: &Options) -> Outcome<()> {
    let run = Run::new(loaded, opts)?;
    let obj = objective(&run)?;
    let k = obj.dim();
    let input = empirical_input(&run, &obj)?;
    let mut summary = json!({ "distance": obj.distance(), "queues": k });
    match run.cfg.estimator.mode {
        Mode::Grid => {
            let grid = run.cfg.grid(k)?;
            check_budget(&grid, &run)?;
            let emp = table_of(&run, &input)?;
            let keep = run.cfg.outputs.surface;
            let out = grid_search_with(&emp, &obj, &grid, SearchOptions { workers: opts.workers, keep_surface: keep })?;
            if let Some(surface) = &out.surface {
                run.write("surface.csv", &surface.to_csv())?;
            }
            println!("estimate {:?} (cost {:.6e})", out.estimate.values, out.cost);
            summary["mode"] = json!("grid");
            summary["estimate"] = json!(out.estimate.values);
            summary["cost"] = json!(out.cost);
        }
        Mode::Adaptive => {
            let Empirical::Samples(samples) = &input else {
                return Err(Failure::Config("adaptive mode needs simulated or recorded samples".into()));
            };
            let settings = run.cfg.adaptive_settings()?;
            let initial = run.cfg.estimator.initial.clone().unwrap_or_else(|| vec![0.5; k]);
            let initial = ParameterVector::new(initial)?;
            let (state, trace) = run_adaptive(samples, &obj, initial, settings)?;
            run.write("trace.csv", &trace_to_csv(&trace))?;
            println!("estimate {:?} after {} blocks", state.estimate.values, state.n);
            summary["mode"] = json!("adaptive");
            summary["estimate"] = json!(state.estimate.values);
            summary["blocks"] = json!(state.n);
            summary["distance_value"] = json!(state.last_distance);
            summary["step_size"] = json!(state.alpha);
        }
    }
    if let Empirical::Samples(s) = &input {
        summary["pairs"] = json!(s.len());
    }
    if opts.verify {
        let (model, _) = run.analytic()?;
        let samples = match &input {
            Empirical::Samples(s) => Some(s),
            Empirical::Table(_) => None,
        };
        summary["verify"] = run.verify(&model, samples)?;
    }
    run.write_json("estimate.json", &summary)
}

pub fn surface(loaded: &Loaded, opts: &Options) -> Outcome<()> {
    let run = Run::new(loaded, opts)?;
    let obj = objective(&run)?;
    let k = obj.dim();
    // A dense surface: the first level only.
    let grid = GridSpec { axes: run.cfg.grid(k)?.axes, refine: Vec::new() };
    check_budget(&grid, &run)?;
    let input = empirical_input(&run, &obj)?;
    let emp = table_of(&run, &input)?;
    let out = grid_search_with(&emp, &obj, &grid, SearchOptions { workers: opts.workers, keep_surface: true })?;
    let surface = out.surface.expect("surface was requested");
    run.write("surface.csv", &surface.to_csv())?;
    println!("minimum {:?} (cost {:.6e}) over {} points", out.estimate.values, out.cost, surface.points.len());
    let mut summary = json!({
        "distance": obj.distance(),
        "points": surface.points.len(),
        "minimum": out.estimate.values,
        "cost": out.cost,
    });
    if k == 2 {
        match surface.valley_witness(run.cfg.estimator.valley_half_width) {
            Ok(w) => {
                println!(
                    "valley slope {:.3}, along-valley cost range {:.3e} vs {:.3e} across, ratio {:.4}",
                    w.slope, w.along_range, w.dynamic_range, w.ratio
                );
                summary["valley"] = serde_json::to_value(w).expect("witness serializes");
            }
            Err(e) => log::warn!("no valley fit: {e}"),
        }
    }
    if let Empirical::Samples(s) = &input {
        summary["pairs"] = json!(s.len());
    }
    if opts.verify {
        let (model, _) = run.analytic()?;
        let samples = match &input {
            Empirical::Samples(s) => Some(s),
            Empirical::Table(_) => None,
        };
        summary["verify"] = run.verify(&model, samples)?;
    }
    run.write_json("surface.json", &summary)
}
