//! Invariant checks shared by the property tests and the acceptance run.
//! Each returns `Err` with a description of the first counterexample.
#![allow(dead_code)]

use disperse_core::estimate::{
    adaptive_step, euclidean_distance, kl_distance, AdaptiveSettings, CostSurface, Distance, EstimatorState,
    GridSpec, Objective, ParameterVector,
};
use disperse_core::network::LeafJointDist;
use disperse_core::{
    conditional_output_dist, empirical_dist, joint_zero, materialize_arrival_pmf, position_split_pmf,
    propagate_path, propagate_tree, simulate, stationary_dist, ArrivalModel,
    ConditionalKernel, Limits, Observation, Pmf, Priority, SeparationDist, SimConfig, Topology,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

pub type Check = fn(u32) -> Result<(), String>;

/// Runs a listed check with its usual number of cases.
pub fn run(check: Check) -> Result<(), String> {
    let (_, f, cases) = ALL
        .iter()
        .find(|(_, f, _)| *f as usize == check as usize)
        .ok_or_else(|| "check is not listed in ALL".to_string())?;
    f(*cases)
}

/// Every invariant with a readable name and its number of random cases.
pub const ALL: &[(&str, Check, u32)] = &[
    ("pmf normalization", pmf_normalization, 64),
    ("idle probability", idle_probability, 64),
    ("position split mass and mean", position_split, 64),
    ("joint marginal and support", joint_marginal_and_support, 64),
    ("conditional support", conditional_support, 32),
    ("analytic determinism", analytic_determinism, 8),
    ("transparent insertion", transparent_insertion, 16),
    ("degeneracy swap", degeneracy_swap, 16),
    ("tree marginals match paths", tree_marginals, 8),
    ("stage leakage accounting", leakage_accounting, 8),
    ("simulation reproducibility", sim_reproducibility, 8),
    ("work conservation", work_conservation, 8),
    ("probe transparency", probe_transparency, 8),
    ("distance non-negativity", distance_nonnegative, 64),
    ("argmin under monotone transforms", argmin_monotone, 128),
    ("box projection", box_projection, 12),
    ("idealized global minimum", idealized_minimum, 4),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ok(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn lift<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Batch laws with `p_0 >= 0.4` and mean at most 0.6.
fn stable_law() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..7).prop_map(|w| {
        let mut p = vec![0.0; w.len() + 1];
        let total: f64 = w.iter().sum::<f64>().max(1e-9);
        // At most 0.6 of the mass above zero, scaled so the mean stays <= 0.6.
        let spread = 0.6 / w.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x / total).sum::<f64>().max(1.0);
        for (i, x) in w.iter().enumerate() {
            p[i + 1] = spread * x / total;
        }
        p[0] = 1.0 - p[1..].iter().sum::<f64>();
        p
    })
}

fn poisson(r: f64) -> ArrivalModel {
    ArrivalModel::poisson(r).unwrap()
}

pub fn pmf_normalization(cases: u32) -> Result<(), String> {
    check(cases, (0.0f64..0.99, 0usize..80), |(rate, n)| {
        let p = lift(materialize_arrival_pmf(&poisson(rate), n))?;
        let sum = p.total() + p.tail_mass();
        ok((sum - 1.0).abs() < 1e-9, || format!("rate {rate} n {n}: {sum}"))?;
        let pi = lift(stationary_dist(&poisson(rate), n, Observation::Late))?;
        let sum = pi.pmf().total() + pi.pmf().tail_mass();
        ok((sum - 1.0).abs() < 1e-9, || format!("occupancy rate {rate} n {n}: {sum}"))
    })?;
    check(cases, stable_law(), |law| {
        let p = lift(materialize_arrival_pmf(&lift(ArrivalModel::explicit(law.clone()))?, 3))?;
        let sum = p.total() + p.tail_mass();
        ok((sum - 1.0).abs() < 1e-9, || format!("{law:?}: {sum}"))
    })
}

pub fn idle_probability(cases: u32) -> Result<(), String> {
    check(cases, stable_law(), |law| {
        let model = lift(ArrivalModel::explicit(law.clone()))?;
        let pi = lift(stationary_dist(&model, 40, Observation::Late))?;
        let want = 1.0 - model.mean();
        ok((pi.get(0) - want).abs() < 1e-12, || format!("{law:?}: π0 {} vs {want}", pi.get(0)))
    })
}

pub fn position_split(cases: u32) -> Result<(), String> {
    check(cases, stable_law(), |law| {
        let p = lift(Pmf::new(0, law.clone()))?;
        let split = position_split_pmf(&p);
        ok((split.total() - p.total()).abs() < 1e-12, || format!("{law:?}: mass"))?;
        ok((split.mean() - p.mean() / 2.0).abs() < 1e-9, || format!("{law:?}: mean"))
    })
}

fn convolution_power(p: &[f64], m: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out[0] = 1.0;
    for _ in 0..m {
        let mut next = vec![0.0; len];
        for (i, &a) in out.iter().enumerate() {
            for (k, &b) in p.iter().enumerate() {
                if i + k < len {
                    next[i + k] += a * b;
                }
            }
        }
        out = next;
    }
    out
}

pub fn joint_marginal_and_support(cases: u32) -> Result<(), String> {
    check(cases, (stable_law(), 1usize..8), |(law, m)| {
        let j_max = 30;
        let p = lift(Pmf::new(0, law.clone()))?;
        let t = lift(joint_zero(&p, m, j_max))?;
        let want = convolution_power(&law, m, j_max + 1);
        for (j, (got, w)) in t.arrival_marginal().iter().zip(&want).enumerate() {
            ok((got - w).abs() < 1e-12, || format!("{law:?} m {m} j {j}: {got} vs {w}"))?;
        }
        for l in 0..=t.slots() + 2 {
            for j in 0..=j_max {
                let zero_expected = l > m || j + 1 < l;
                if zero_expected {
                    ok(t.get(l, j) == 0.0, || format!("{law:?} m {m}: cell ({l},{j}) = {}", t.get(l, j)))?;
                }
            }
        }
        Ok(())
    })
}

pub fn conditional_support(cases: u32) -> Result<(), String> {
    check(cases, (0.0f64..0.9, 1usize..20), |(rate, m)| {
        let model = poisson(rate);
        let p = lift(materialize_arrival_pmf(&model, 62))?;
        let pi = lift(stationary_dist(&model, 60, Observation::Late))?;
        let d = lift(conditional_output_dist(&p, &pi, m, 60))?;
        ok(d.get(0) == 0.0, || "mass at separation 0".into())?;
        let p0 = lift(materialize_arrival_pmf(&poisson(0.0), 62))?;
        let pi0 = lift(stationary_dist(&poisson(0.0), 60, Observation::Late))?;
        let d0 = lift(conditional_output_dist(&p0, &pi0, m, 60))?;
        ok(d0.get(m) == 1.0, || format!("idle queue moved separation {m}"))
    })
}

pub fn analytic_determinism(cases: u32) -> Result<(), String> {
    check(cases.min(8), (0.05f64..0.9, any::<bool>()), |(rate, equal)| {
        let priority = if equal { Priority::Equal } else { Priority::Lowest };
        let limits = Limits::new(30, 30, 30, 1e-6).unwrap();
        let a = lift(ConditionalKernel::build(&poisson(rate), priority, &limits))?;
        let b = lift(ConditionalKernel::build(&poisson(rate), priority, &limits))?;
        ok(a == b, || format!("kernel at {rate} differs between builds"))
    })
}

fn max_entry_diff(a: &SeparationDist, b: &SeparationDist) -> f64 {
    let n = a.max_separation().max(b.max_separation());
    (0..=n).map(|s| (a.get(s) - b.get(s)).abs()).fold(0.0, f64::max)
}

pub fn transparent_insertion(cases: u32) -> Result<(), String> {
    let limits = Limits::default();
    check(cases.min(16), (prop::collection::vec(0.0f64..0.85, 1..4), 0usize..4, 1usize..4), |(rates, at, d0)| {
        let at = at.min(rates.len());
        let d0 = lift(SeparationDist::point(d0))?;
        let base: Vec<ArrivalModel> = rates.iter().map(|&r| poisson(r)).collect();
        let mut with = base.clone();
        with.insert(at, poisson(0.0));
        let a = lift(propagate_path(&base, &d0, &limits))?;
        let b = lift(propagate_path(&with, &d0, &limits))?;
        let diff = max_entry_diff(&a, &b);
        ok(diff <= 1e-9, || format!("{rates:?} insert at {at}: {diff}"))
    })
}

pub fn degeneracy_swap(cases: u32) -> Result<(), String> {
    let limits = Limits::default();
    let d0 = SeparationDist::point(1).unwrap();
    check(cases.min(16), 0.0f64..0.9, |rate| {
        let a = lift(propagate_path(&[poisson(0.0), poisson(rate)], &d0, &limits))?;
        let b = lift(propagate_path(&[poisson(rate), poisson(0.0)], &d0, &limits))?;
        let diff = max_entry_diff(&a, &b);
        ok(diff <= 1e-9, || format!("rate {rate}: {diff}"))
    })
}

pub fn tree_marginals(cases: u32) -> Result<(), String> {
    let limits = Limits::default();
    let d0 = SeparationDist::point(1).unwrap();
    check(cases.min(8), (0.0f64..0.8, 0.0f64..0.8, 0.0f64..0.8), |(r0, r1, r2)| {
        let topo = lift(Topology::multicast(poisson(r0), poisson(r1), poisson(r2)))?;
        let joint = lift(propagate_tree(&topo, &d0, &limits))?;
        for (axis, &leaf) in topo.leaves().iter().enumerate() {
            let path: Vec<ArrivalModel> = topo.path_to(leaf).iter().map(|&k| topo.node(k).arrival.clone()).collect();
            let direct = lift(propagate_path(&path, &d0, &limits))?;
            let diff = max_entry_diff(&joint.marginal(axis), &direct);
            ok(diff <= 1e-9, || format!("({r0},{r1},{r2}) leaf {leaf}: {diff}"))?;
        }
        Ok(())
    })
}

pub fn leakage_accounting(cases: u32) -> Result<(), String> {
    use disperse_core::network::{KernelCache, Propagator};
    let d0 = SeparationDist::point(1).unwrap();
    check(cases.min(8), (0.0f64..0.95, 0.0f64..0.95, 0.0f64..0.95, 12usize..40), |(r0, r1, r2, n)| {
        let limits = Limits::new(n, n, n, 1e-6).unwrap();
        let topo = lift(Topology::multicast(poisson(r0), poisson(r1), poisson(r2)))?;
        let cache = KernelCache::new();
        let run = lift(Propagator::new(&topo, limits, &cache).run(&d0))?;
        let staged: f64 = run.stage_leakage.iter().sum();
        let total = run.total_leakage();
        ok((staged - total).abs() < 1e-12, || format!("stages {staged} vs total {total}"))
    })
}

fn small_sim(seed: u64, rates: (f64, f64, f64), priority: Priority) -> SimConfig {
    let topo = Topology::multicast(poisson(rates.0), poisson(rates.1), poisson(rates.2)).unwrap();
    let mut cfg = SimConfig::new(topo, 0.01, 2, 60_000, seed).with_priority(priority);
    cfg.audit = true;
    cfg
}

pub fn sim_reproducibility(cases: u32) -> Result<(), String> {
    check(cases.min(8), (any::<u64>(), 0.0f64..0.9, any::<bool>()), |(seed, r, equal)| {
        let priority = if equal { Priority::Equal } else { Priority::Lowest };
        let cfg = small_sim(seed, (r, 0.5, 0.3), priority);
        let a = lift(simulate(&cfg))?;
        let b = lift(simulate(&cfg))?;
        ok(a == b, || format!("seed {seed} rate {r}: runs differ"))
    })
}

pub fn work_conservation(cases: u32) -> Result<(), String> {
    check(cases.min(8), (any::<u64>(), 0.0f64..0.95, 0.0f64..0.95, 1000u64..50_000), |(seed, r0, r1, h)| {
        let topo = lift(Topology::path(&[poisson(r0), poisson(r1)]))?;
        let mut cfg = SimConfig::new(topo, 0.02, 1, h, seed);
        cfg.audit = true;
        let s = lift(simulate(&cfg))?;
        for (k, q) in s.audit.iter().enumerate() {
            ok(q.arrivals == q.departures + q.backlog, || format!("queue {k}: {q:?}"))?;
        }
        Ok(())
    })
}

pub fn probe_transparency(cases: u32) -> Result<(), String> {
    check(cases.min(8), (any::<u64>(), 1usize..6), |(seed, d0)| {
        let topo = lift(Topology::path(&[poisson(0.0), poisson(0.0)]))?;
        let mut cfg = SimConfig::new(topo, 0.01, d0, 50_000, seed);
        cfg.audit = true;
        let s = lift(simulate(&cfg))?;
        // With no cross traffic only a pair queued behind an earlier pair can
        // see its separation change, and such pairs are the flagged ones.
        let moved = s.records.iter().filter(|r| r.separations != vec![d0]).count() as u64;
        ok(moved <= s.overlapping_pairs, || {
            format!("{moved} separations changed with {} overlapping pairs", s.overlapping_pairs)
        })?;
        // Only probes arrive, and each takes one service slot.
        let pairs = s.len() as u64;
        for q in &s.audit {
            ok(q.arrivals == 2 * pairs && q.departures == 2 * pairs, || format!("{q:?} for {pairs} pairs"))?;
        }
        Ok(())
    })
}

fn random_table(leaves: Vec<usize>, n3: usize) -> impl Strategy<Value = LeafJointDist> {
    let cells = n3.pow(leaves.len() as u32);
    prop::collection::vec(0.0f64..1.0, cells).prop_map(move |w| {
        let total: f64 = w.iter().sum::<f64>().max(1e-12);
        let mut out = LeafJointDist::zeros(leaves.clone(), n3);
        for (i, x) in w.iter().enumerate() {
            let s = out.decode(i as u64);
            let mut cell = LeafJointDist::point(leaves.clone(), n3, &s).unwrap();
            cell.scale(x / total);
            out.add_scaled(1.0, &cell).unwrap();
        }
        out
    })
}

pub fn distance_nonnegative(cases: u32) -> Result<(), String> {
    check(cases, (random_table(vec![1, 2], 5), random_table(vec![1, 2], 5)), |(a, b)| {
        let kl = lift(kl_distance(&a, &b))?;
        let eu = lift(euclidean_distance(&a, &b))?;
        ok(kl >= 0.0 && eu >= 0.0, || format!("kl {kl} eu {eu}"))?;
        ok(lift(kl_distance(&a, &a))? == 0.0, || "kl(a, a) != 0".into())?;
        ok(lift(euclidean_distance(&a, &a))? == 0.0, || "eu(a, a) != 0".into())?;
        let back = lift(euclidean_distance(&b, &a))?;
        ok(eu == back, || "euclidean distance is not symmetric".into())?;
        if a != b {
            ok(eu > 0.0, || "distinct tables at euclidean distance 0".into())?;
        }
        Ok(())
    })
}

pub fn argmin_monotone(cases: u32) -> Result<(), String> {
    check(cases, prop::collection::vec(0.0f64..10.0, 1..200), |costs| {
        let points: Vec<Vec<f64>> = (0..costs.len()).map(|i| vec![i as f64]).collect();
        let plain = CostSurface {
            points: points.clone(),
            costs: costs.clone(),
        };
        let transforms: [fn(f64) -> f64; 3] = [|x| x.exp(), |x| x * x * x + x, |x| (1.0 + x).ln()];
        for f in transforms {
            let moved = CostSurface {
                points: points.clone(),
                costs: costs.iter().map(|&c| f(c)).collect(),
            };
            ok(moved.argmin() == plain.argmin(), || format!("{costs:?}"))?;
        }
        Ok(())
    })
}

pub fn box_projection(cases: u32) -> Result<(), String> {
    let limits = Limits::new(20, 20, 20, 1e-3).unwrap();
    let topo = Topology::path(&[poisson(0.5), poisson(0.5)]).unwrap();
    let objective = Objective::new(topo, SeparationDist::point(1).unwrap(), limits, Distance::Euclidean).unwrap();
    let strategy = (
        prop::collection::vec(random_table(vec![1], 20), 1..4),
        (0.0f64..1.0, 0.0f64..1.0),
        (0.01f64..0.4, 0.6f64..0.99),
        0.001f64..0.5,
    );
    check(cases.min(12), strategy, |(blocks, start, (lo, hi), alpha0)| {
        let init = lift(ParameterVector::with_box(vec![start.0, start.1], vec![lo; 2], vec![hi; 2]))?;
        let settings = AdaptiveSettings {
            alpha0,
            alpha_max: alpha0.max(0.1),
            alpha_min: 1e-4f64.min(alpha0),
            ..AdaptiveSettings::default()
        };
        let mut state = lift(EstimatorState::new(init, settings))?;
        for b in blocks {
            let (next, rec) = lift(adaptive_step(state, &b, &objective))?;
            ok(next.estimate.in_box(), || format!("left the box: {:?}", next.estimate))?;
            ok(
                next.alpha >= settings.alpha_min && next.alpha <= settings.alpha_max,
                || format!("step size {} escaped its bounds", next.alpha),
            )?;
            ok(rec.estimate == next.estimate.values, || "trace disagrees with state".into())?;
            state = next;
        }
        Ok(())
    })
}

pub fn idealized_minimum(cases: u32) -> Result<(), String> {
    let limits = Limits::new(40, 40, 40, 1e-3).unwrap();
    let d0 = SeparationDist::point(1).unwrap();
    let step = 0.1;
    let strategy = (1usize..9, 1usize..9, 1usize..9);
    check(cases.min(4), strategy, |(i, j, k)| {
        let truth = [i as f64 * step, j as f64 * step, k as f64 * step];
        for tree in [false, true] {
            let (topo, rates) = if tree {
                (lift(Topology::multicast(poisson(truth[0]), poisson(truth[1]), poisson(truth[2])))?, truth.to_vec())
            } else {
                (lift(Topology::path(&[poisson(truth[0]), poisson(truth[1])]))?, truth[..2].to_vec())
            };
            let objective = lift(Objective::new(topo, d0.clone(), limits, Distance::Euclidean))?;
            let analytic = lift(objective.model(&rates))?;
            let at_truth = lift(objective.cost(&analytic, &rates))?;
            let grid = lift(GridSpec::uniform(rates.len(), 0.1, 0.8, step))?;
            let out = lift(disperse_core::estimate::grid_search(&analytic, &objective, &grid))?;
            ok(at_truth <= out.cost + 1e-9, || format!("truth {rates:?}: {at_truth} vs grid min {}", out.cost))?;
            if tree {
                let err = out.estimate.values.iter().zip(&rates).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ok(err < 1e-9, || format!("tree argmin {:?} for truth {rates:?}", out.estimate.values))?;
            }
        }
        Ok(())
    })
}

/// Least-squares slope of log TV against log N, averaged over `reps` seeds.
pub fn convergence_slope(reps: u64) -> Result<f64, String> {
    let topo = Topology::path(&[poisson(0.5)]).unwrap();
    let analytic = propagate_tree(&topo, &SeparationDist::point(1).unwrap(), &Limits::default())
        .map_err(|e| e.to_string())?;
    let sizes = [1_000usize, 10_000, 100_000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in &sizes {
        let mut tv = 0.0;
        for seed in 0..reps {
            let horizon = (n as f64 / 0.02 * 1.2) as u64 + 2000;
            let cfg = SimConfig::new(topo.clone(), 0.02, 1, horizon, 1000 + seed);
            let mut s = simulate(&cfg).map_err(|e| e.to_string())?;
            if s.records.len() < n {
                return Err(format!("only {} pairs for N = {n}", s.records.len()));
            }
            s.records.truncate(n);
            let emp = empirical_dist(&s, 60).map_err(|e| e.to_string())?;
            tv += emp.tv_distance(&analytic).map_err(|e| e.to_string())?;
        }
        xs.push((n as f64).ln());
        ys.push((tv / reps as f64).ln());
    }
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
