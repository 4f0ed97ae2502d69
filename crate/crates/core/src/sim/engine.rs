//! Slot-synchronous simulation of probe pairs through a queue tree.
//!
//! Each queue is a FIFO served one packet per slot. Only the slot of the
//! last queued departure is tracked: a packet joining in slot `n` behind
//! `busy_until` leaves at `max(n, busy_until + 1)`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Poisson};
use serde::Serialize;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::kernel::Priority;
use crate::network::{DelayKernel, JointDelayKernel, Topology};

use super::config::{Schedule, SimConfig};

const STREAM_LAUNCH: u64 = 0;
const STREAM_POSITION: u64 = 1;
const STREAM_DELAY: u64 = 2;
const STREAM_QUEUE_BASE: u64 = 16;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    pub probe_id: u64,
    pub launch_slot: u64,
    /// Output separation at each leaf, in the topology's leaf order.
    pub separations: Vec<usize>,
}

/// Departures and cross-traffic arrivals at the root over one pair's window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootWindow {
    pub departures: u32,
    pub arrivals: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QueueAudit {
    pub arrivals: u64,
    pub departures: u64,
    pub backlog: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionSamples {
    pub leaves: Vec<usize>,
    pub d0: usize,
    /// Completed pairs in launch order.
    pub records: Vec<SampleRecord>,
    /// Parallel to `records` when root windows were requested.
    pub root_windows: Vec<RootWindow>,
    /// Pairs whose first probe reached a queue still holding an earlier pair.
    pub overlapping_pairs: u64,
    pub audit: Vec<QueueAudit>,
    /// Last simulated slot (the run drains in-flight pairs past the horizon).
    pub end_slot: u64,
}

impl DispersionSamples {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `launch_slot,d_<leaf>...` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("launch_slot");
        for l in &self.leaves {
            out.push_str(&format!(",d_{l}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.launch_slot.to_string());
            for d in &r.separations {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }
}

enum Batch {
    Zero,
    Poisson(Poisson<f64>),
    Table(WeightedIndex<f64>),
}

impl Batch {
    fn for_model(model: &ArrivalModel) -> Result<Self> {
        match model {
            ArrivalModel::Poisson { rate } => Self::poisson(*rate),
            ArrivalModel::Explicit(mass) => {
                if mass.len() == 1 || mass[1..].iter().all(|&p| p == 0.0) {
                    return Ok(Batch::Zero);
                }
                WeightedIndex::new(mass)
                    .map(Batch::Table)
                    .map_err(|e| Error::InvalidPmf(e.to_string()))
            }
        }
    }

    fn poisson(rate: f64) -> Result<Self> {
        if rate <= 0.0 {
            return Ok(Batch::Zero);
        }
        Poisson::new(rate)
            .map(Batch::Poisson)
            .map_err(|_| Error::Stability { rate })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            Batch::Zero => 0,
            Batch::Poisson(d) => d.sample(rng) as u64,
            Batch::Table(d) => d.sample(rng) as u64,
        }
    }
}

struct Queue {
    rng: ChaCha8Rng,
    batch: Batch,
    schedule: Option<Schedule>,
    current_rate: f64,
    busy_until: i64,
    arrivals: u64,
    departures: u64,
    pending: BinaryHeap<Reverse<(u64, u64, u8)>>,
    open_windows: u32,
    last_pair_end: i64,
    priority: Priority,
}

impl Queue {
    fn rate_batch(&mut self, slot: u64, horizon: u64) -> Result<()> {
        if let Some(s) = &self.schedule {
            let r = s.rate_at(slot, horizon).unwrap_or(0.0);
            if r != self.current_rate {
                self.batch = Batch::poisson(r)?;
                self.current_rate = r;
            }
        }
        Ok(())
    }
}

struct Pair {
    launch: u64,
    first_departure: Vec<Option<u64>>,
    first_arrival: Vec<u64>,
    separations: Vec<usize>,
    remaining: usize,
    overlapped: bool,
}

/// Slots by which the first probe is held back on a random-delay link so
/// that the second probe can be brought closer.
fn edge_offset(kernel: &DelayKernel) -> u64 {
    match kernel {
        DelayKernel::Identity => 0,
        DelayKernel::LightLoad { .. } => 1,
        DelayKernel::Explicit { rows } => rows
            .iter()
            .flat_map(|(&i, row)| row.iter().map(move |&(j, _)| i.saturating_sub(j)))
            .max()
            .unwrap_or(0) as u64,
    }
}

fn joint_offset(kernel: &JointDelayKernel) -> u64 {
    kernel
        .rows
        .iter()
        .flat_map(|(&i, row)| row.iter().flat_map(move |(xs, _)| xs.iter().map(move |&x| i.saturating_sub(x))))
        .max()
        .unwrap_or(0) as u64
}

fn draw<T: Clone>(row: &[(T, f64)], rng: &mut ChaCha8Rng) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (x, p) in row {
        acc += p;
        if u < acc {
            return x.clone();
        }
    }
    row.last().expect("non-empty kernel row").0.clone()
}

struct Engine<'a> {
    topo: &'a Topology,
    offsets: Vec<u64>,
    leaf_pos: Vec<Option<usize>>,
    delay_rng: ChaCha8Rng,
    pairs: HashMap<u64, Pair>,
    done: Vec<(u64, SampleRecord, bool)>,
}

impl Engine<'_> {
    fn departed(&mut self, queues: &mut [Queue], k: usize, id: u64, which: u8, dep: u64) -> Result<()> {
        let topo = self.topo;
        let pair = self.pairs.get_mut(&id).expect("pair in flight");
        let children = topo.children(k);
        let group = topo.joint_delay(k);
        if which == 0 {
            pair.first_departure[k] = Some(dep);
            for &c in children {
                let at = dep + 1 + self.offsets[c];
                pair.first_arrival[c] = at;
                queues[c].pending.push(Reverse((at, id, 0)));
            }
            return Ok(());
        }
        queues[k].open_windows -= 1;
        queues[k].last_pair_end = queues[k].last_pair_end.max(dep as i64);
        let d = (dep - pair.first_departure[k].expect("first probe departed")) as usize;
        if let Some(pos) = self.leaf_pos[k] {
            pair.separations[pos] = d;
            pair.remaining -= 1;
        }
        let grouped: Vec<(usize, usize)> = match group {
            Some(jk) => {
                let row = jk.rows.get(&d).ok_or(Error::KernelDomain { separation: d })?;
                let xs = draw(row, &mut self.delay_rng);
                jk.children.iter().copied().zip(xs).collect()
            }
            None => Vec::new(),
        };
        for &c in children {
            let at = if let Some(&(_, x)) = grouped.iter().find(|(g, _)| *g == c) {
                pair.first_arrival[c] + x as u64
            } else {
                let kernel = topo.delay(c);
                if matches!(kernel, DelayKernel::Identity) {
                    dep + 1
                } else {
                    let row = kernel.row(d).ok_or(Error::KernelDomain { separation: d })?;
                    pair.first_arrival[c] + draw(&row, &mut self.delay_rng) as u64
                }
            };
            queues[c].pending.push(Reverse((at, id, 1)));
        }
        if pair.remaining == 0 {
            let pair = self.pairs.remove(&id).expect("pair in flight");
            self.done.push((
                id,
                SampleRecord {
                    probe_id: id,
                    launch_slot: pair.launch,
                    separations: pair.separations,
                },
                pair.overlapped,
            ));
        }
        Ok(())
    }
}

/// Runs the configured experiment. Deterministic for a fixed configuration.
pub fn simulate(config: &SimConfig) -> Result<DispersionSamples> {
    config.validate()?;
    let topo = &config.topology;
    let n = topo.len();
    let horizon = config.horizon;
    let warmup = config.warmup_slots();

    let mut queues = Vec::with_capacity(n);
    for k in 0..n {
        let node = topo.node(k);
        let schedule = config.schedules[k].clone();
        let (batch, rate) = match &schedule {
            Some(s) => {
                let r = s.rate_at(0, horizon).unwrap_or(0.0);
                (Batch::poisson(r)?, r)
            }
            None => (Batch::for_model(&node.arrival)?, node.arrival.mean()),
        };
        queues.push(Queue {
            rng: stream(config.seed, STREAM_QUEUE_BASE + k as u64),
            batch,
            schedule,
            current_rate: rate,
            busy_until: -1,
            arrivals: 0,
            departures: 0,
            pending: BinaryHeap::new(),
            open_windows: 0,
            last_pair_end: -1,
            priority: node.priority,
        });
    }

    let mut offsets = vec![0u64; n];
    for k in 0..n {
        if let Some(jk) = topo.joint_delay(k) {
            let off = joint_offset(jk);
            for &c in &jk.children {
                offsets[c] = off;
            }
        }
        for &c in topo.children(k) {
            let grouped = topo.joint_delay(k).is_some_and(|j| j.children.contains(&c));
            if !grouped {
                offsets[c] = edge_offset(topo.delay(c));
            }
        }
    }
    let mut leaf_pos = vec![None; n];
    for (i, &l) in topo.leaves().iter().enumerate() {
        leaf_pos[l] = Some(i);
    }
    let mut engine = Engine {
        topo,
        offsets,
        leaf_pos,
        delay_rng: stream(config.seed, STREAM_DELAY),
        pairs: HashMap::new(),
        done: Vec::new(),
    };

    let mut launch_rng = stream(config.seed, STREAM_LAUNCH);
    let mut position_rng = stream(config.seed, STREAM_POSITION);
    let gap = Geometric::new(config.probe_rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut next_launch = warmup + gap.sample(&mut launch_rng);
    let mut next_id = 0u64;

    let record = config.record_root_window;
    let mut cum_dep: Vec<u32> = Vec::new();
    let mut cum_arr: Vec<u32> = Vec::new();
    let mut arrivals_here: Vec<(u64, u64, u8)> = Vec::new();

    let mut slot = 0u64;
    loop {
        if slot >= horizon && engine.pairs.is_empty() {
            break;
        }
        if slot == next_launch && slot < horizon {
            let leaves = topo.leaves().len();
            engine.pairs.insert(
                next_id,
                Pair {
                    launch: slot,
                    first_departure: vec![None; n],
                    first_arrival: vec![0; n],
                    separations: vec![0; leaves],
                    remaining: leaves,
                    overlapped: false,
                },
            );
            queues[0].pending.push(Reverse((slot, next_id, 0)));
            queues[0].pending.push(Reverse((slot + config.d0 as u64, next_id, 1)));
            next_id += 1;
            next_launch = slot + 1 + gap.sample(&mut launch_rng);
        }

        for k in 0..n {
            queues[k].rate_batch(slot, horizon)?;
            let q = &mut queues[k];
            let b = q.batch.sample(&mut q.rng);
            arrivals_here.clear();
            while let Some(&Reverse(item)) = q.pending.peek() {
                if item.0 != slot {
                    debug_assert!(item.0 > slot);
                    break;
                }
                q.pending.pop();
                arrivals_here.push(item);
            }
            let start = (slot as i64).max(q.busy_until + 1);
            let probes = arrivals_here.len() as i64;
            q.busy_until = if b as i64 + probes > 0 {
                start + b as i64 + probes - 1
            } else {
                q.busy_until
            };
            q.arrivals += b + probes as u64;
            if q.busy_until >= slot as i64 {
                q.departures += 1;
            }
            if k == 0 && record {
                let prev_d = cum_dep.last().copied().unwrap_or(0);
                let prev_a = cum_arr.last().copied().unwrap_or(0);
                cum_dep.push(prev_d + u32::from(q.busy_until >= slot as i64));
                cum_arr.push(prev_a + b as u32);
            }
            if arrivals_here.is_empty() {
                continue;
            }
            // Departure slot of each probe: behind the batch, or at a uniform
            // position inside it.
            let mut placed: Vec<(u64, (u64, u64, u8))> = arrivals_here
                .iter()
                .map(|&item| {
                    let ahead = match q.priority {
                        Priority::Lowest => b,
                        Priority::Equal => position_rng.random_range(0..=b),
                    };
                    (ahead, item)
                })
                .collect();
            placed.sort_unstable();
            let busy_with_pair = q.open_windows > 0 || q.last_pair_end >= slot as i64;
            let mut opened = 0;
            let mut deps = Vec::with_capacity(placed.len());
            for (i, &(ahead, (_, id, which))) in placed.iter().enumerate() {
                let dep = (start + ahead as i64 + i as i64) as u64;
                deps.push((id, which, dep));
                if which == 0 {
                    if busy_with_pair || opened > 0 {
                        if let Some(p) = engine.pairs.get_mut(&id) {
                            p.overlapped = true;
                        }
                    }
                    opened += 1;
                }
            }
            queues[k].open_windows += opened;
            for (id, which, dep) in deps {
                engine.departed(&mut queues, k, id, which, dep)?;
            }
        }
        slot += 1;
    }
    let end_slot = slot.saturating_sub(1);

    let mut audit = Vec::with_capacity(n);
    for (k, q) in queues.iter().enumerate() {
        let backlog = (q.busy_until - end_slot as i64).max(0) as u64;
        let entry = QueueAudit {
            arrivals: q.arrivals,
            departures: q.departures,
            backlog,
        };
        if config.audit && entry.arrivals != entry.departures + entry.backlog {
            return Err(Error::Domain(format!(
                "queue {k} fails work conservation: {} in, {} out, {} left",
                entry.arrivals, entry.departures, entry.backlog
            )));
        }
        audit.push(entry);
    }

    engine.done.sort_by_key(|(id, _, _)| *id);
    let overlapping_pairs = engine.done.iter().filter(|(_, _, o)| *o).count() as u64;
    if overlapping_pairs > 0 {
        log::warn!(
            "{overlapping_pairs} of {} probe pairs shared a queue with an earlier pair",
            engine.done.len()
        );
    }
    let records: Vec<SampleRecord> = engine.done.into_iter().map(|(_, r, _)| r).collect();
    let root_windows = if record {
        let m = config.d0 as u64;
        records
            .iter()
            .map(|r| {
                let n0 = r.launch_slot;
                let dep_before = if n0 == 0 { 0 } else { cum_dep[(n0 - 1) as usize] };
                RootWindow {
                    departures: cum_dep[(n0 + m - 1) as usize] - dep_before,
                    arrivals: cum_arr[(n0 + m) as usize] - cum_arr[n0 as usize],
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(DispersionSamples {
        leaves: topo.leaves().to_vec(),
        d0: config.d0,
        records,
        root_windows,
        overlapping_pairs,
        audit,
        end_slot,
    })
}
