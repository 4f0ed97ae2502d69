use disperse_core::sim::{occupancy_histogram, Segment};
use disperse_core::{
    blocked_empirical_stream, empirical_dist, joint_unconditioned, materialize_arrival_pmf, propagate_path,
    propagate_tree, simulate, stationary_dist, ArrivalModel, Limits, LeafJointDist, Observation, Priority,
    Schedule, SeparationDist, SimConfig, Topology,
};

fn poisson(r: f64) -> ArrivalModel {
    ArrivalModel::poisson(r).unwrap()
}

fn model_table(topo: &Topology, d0: usize, limits: &Limits) -> LeafJointDist {
    propagate_tree(topo, &SeparationDist::point(d0).unwrap(), limits).unwrap()
}

#[test]
fn idle_queues_return_the_input_separation() {
    let topo = Topology::path(&[poisson(0.0)]).unwrap();
    let s = simulate(&SimConfig::new(topo.clone(), 0.01, 1, 200_000, 5)).unwrap();
    assert!(s.len() > 1000);
    assert!(s.records.iter().all(|r| r.separations == vec![1]));

    // Wider pairs can interleave with a pair launched just before them.
    let s = simulate(&SimConfig::new(topo, 0.01, 3, 200_000, 5)).unwrap();
    let moved = s.records.iter().filter(|r| r.separations != vec![3]).count() as u64;
    assert!(s.overlapping_pairs > 0);
    assert!(moved <= s.overlapping_pairs);
}

#[test]
fn same_seed_same_records() {
    let topo = Topology::multicast(poisson(0.4), poisson(0.5), poisson(0.6)).unwrap();
    let cfg = SimConfig::new(topo, 0.01, 2, 100_000, 42);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let mut other = cfg.clone();
    other.seed = 43;
    assert_ne!(simulate(&other).unwrap().records, a.records);
}

#[test]
fn audit_balances_every_queue() {
    let topo = Topology::multicast(poisson(0.7), poisson(0.3), poisson(0.8)).unwrap();
    let mut cfg = SimConfig::new(topo, 0.005, 1, 200_000, 9);
    cfg.audit = true;
    let s = simulate(&cfg).unwrap();
    for q in &s.audit {
        assert_eq!(q.arrivals, q.departures + q.backlog);
        assert!(q.arrivals > 0);
    }
}

#[test]
fn lone_queue_occupancy_matches_the_stationary_law() {
    let model = poisson(0.6);
    for obs in [Observation::Late, Observation::Early] {
        let mc = occupancy_histogram(&model, 2_000_000, 10_000, 3, obs, 40).unwrap();
        let pi = stationary_dist(&model, 40, obs).unwrap();
        let tv: f64 = 0.5 * (0..40).map(|q| (mc[q] - pi.get(q)).abs()).sum::<f64>();
        assert!(tv < 0.01, "{obs:?}: tv {tv}");
    }
}

#[test]
fn root_window_matches_the_unconditioned_joint() {
    let lam = 0.5;
    let m = 3;
    let topo = Topology::path(&[poisson(lam)]).unwrap();
    // Probes add load the stationary law does not see; keep them sparse.
    let mut cfg = SimConfig::new(topo, 0.001, m, 100_000_000, 11);
    cfg.record_root_window = true;
    let s = simulate(&cfg).unwrap();
    let p = materialize_arrival_pmf(&poisson(lam), 40).unwrap();
    let pi = stationary_dist(&poisson(lam), 200, Observation::Late).unwrap();
    let table = joint_unconditioned(&p, &pi, m, 30).unwrap();

    let w = 1.0 / s.root_windows.len() as f64;
    let mut mc = vec![vec![0.0; 31]; m + 1];
    for rw in &s.root_windows {
        let (l, j) = (rw.departures as usize, rw.arrivals as usize);
        if l <= m && j <= 30 {
            mc[l][j] += w;
        }
    }
    let mut tv = 0.0;
    for (l, row) in mc.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            tv += (v - table.get(l, j)).abs();
        }
    }
    assert!(tv / 2.0 < 0.01, "tv {}", tv / 2.0);
}

fn assert_mc_close(topo: Topology, d0: usize, horizon: u64, seed: u64, tol: f64) {
    let limits = Limits::default();
    let model = model_table(&topo, d0, &limits);
    let s = simulate(&SimConfig::new(topo, 0.01, d0, horizon, seed)).unwrap();
    let emp = empirical_dist(&s, limits.n3).unwrap();
    let tv = emp.tv_distance(&model).unwrap();
    assert!(tv < tol, "tv {tv} over {} pairs", s.len());
}

#[test]
fn single_queue_frequencies_match_the_exact_law() {
    for lam in [0.3, 0.8] {
        assert_mc_close(Topology::path(&[poisson(lam)]).unwrap(), 1, 10_000_000, 21, 0.01);
    }
}

#[test]
fn two_queue_path_frequencies_match_the_exact_law() {
    assert_mc_close(Topology::path(&[poisson(0.3), poisson(0.8)]).unwrap(), 1, 20_000_000, 22, 0.02);
}

#[test]
fn tree_frequencies_match_the_exact_law() {
    let topo = Topology::multicast(poisson(0.4), poisson(0.5), poisson(0.7)).unwrap();
    assert_mc_close(topo, 1, 20_000_000, 23, 0.02);
}

#[test]
fn equal_priority_frequencies_match_the_exact_law() {
    for lam in [0.3, 0.7] {
        let topo = Topology::path(&[poisson(lam)]).unwrap();
        let limits = Limits::default();
        let cfg = SimConfig::new(topo, 0.01, 1, 10_000_000, 24).with_priority(Priority::Equal);
        let model = model_table(&cfg.topology, 1, &limits);
        let emp = empirical_dist(&simulate(&cfg).unwrap(), limits.n3).unwrap();
        let tv = emp.tv_distance(&model).unwrap();
        assert!(tv < 0.02, "lambda {lam}: tv {tv}");
    }
}

#[test]
fn light_traffic_keeps_most_pairs_intact() {
    let topo = Topology::path(&[poisson(0.05), poisson(0.05)]).unwrap();
    let s = simulate(&SimConfig::new(topo, 0.01, 2, 1_000_000, 4)).unwrap();
    let intact = s.records.iter().filter(|r| r.separations == vec![2]).count() as f64 / s.len() as f64;
    let exact = propagate_path(&[poisson(0.05), poisson(0.05)], &SeparationDist::point(2).unwrap(), &Limits::default())
        .unwrap()
        .get(2);
    assert!((intact - exact).abs() < 0.02, "{intact} vs {exact}");
}

#[test]
fn raw_blocks_are_block_frequencies() {
    let topo = Topology::path(&[poisson(0.5)]).unwrap();
    let s = simulate(&SimConfig::new(topo, 0.02, 1, 200_000, 6)).unwrap();
    let blocks = blocked_empirical_stream(&s, 100, 1.0, 60).unwrap();
    assert_eq!(blocks.len(), s.len() / 100);
    for (i, b) in blocks.iter().enumerate().take(5) {
        let mut part = s.clone();
        part.records = s.records[i * 100..(i + 1) * 100].to_vec();
        assert_eq!(b, &empirical_dist(&part, 60).unwrap());
    }
}

#[test]
fn second_blend_mixes_two_blocks() {
    let topo = Topology::path(&[poisson(0.5)]).unwrap();
    let s = simulate(&SimConfig::new(topo, 0.02, 1, 100_000, 7)).unwrap();
    let raw = blocked_empirical_stream(&s, 200, 1.0, 60).unwrap();
    let mixed = blocked_empirical_stream(&s, 200, 0.25, 60).unwrap();
    for code in 0..60u64 {
        let at = [code as usize + 1];
        let want = 0.75 * raw[0].get(&at) + 0.25 * raw[1].get(&at);
        assert!((mixed[1].get(&at) - want).abs() < 1e-15);
    }
    assert_eq!(mixed[0], raw[0]);
}

#[test]
fn blended_stream_settles_near_the_exact_law() {
    let topo = Topology::path(&[poisson(0.5)]).unwrap();
    let limits = Limits::default();
    let model = model_table(&topo, 1, &limits);
    let s = simulate(&SimConfig::new(topo, 0.02, 1, 2_000_000, 8)).unwrap();
    let stream = blocked_empirical_stream(&s, 500, 0.05, limits.n3).unwrap();
    assert!(stream.len() > 50);
    let late = stream.last().unwrap().tv_distance(&model).unwrap();
    let first = stream[0].tv_distance(&model).unwrap();
    assert!(late < 0.05, "tv {late}");
    assert!(late < first);
}

#[test]
fn schedule_changes_the_served_load() {
    let h = 1_000_000;
    let sched = Schedule::new(vec![
        Segment { start_slot: 0, rate_start: 0.1, rate_end: 0.1 },
        Segment { start_slot: h / 2, rate_start: 0.8, rate_end: 0.8 },
    ])
    .unwrap();
    let topo = Topology::path(&[poisson(0.1)]).unwrap();
    let s = simulate(&SimConfig::new(topo, 0.01, 1, h, 2).with_schedule(0, sched)).unwrap();
    let mean = |early: bool| {
        let sel: Vec<f64> = s
            .records
            .iter()
            .filter(|r| (r.launch_slot < h / 2) == early)
            .map(|r| r.separations[0] as f64)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    // A single lowest-priority queue adds the batch behind the first probe.
    assert!((mean(true) - 1.1).abs() < 0.05);
    assert!((mean(false) - 1.8).abs() < 0.1);
}
