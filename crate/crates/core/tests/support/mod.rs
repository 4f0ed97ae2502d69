//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Calls `f` with every tuple in `0..=k` for each of `len` coordinates and
/// the product of their `p` weights.
pub fn for_each_tuple(p: &[f64], len: usize, mut f: impl FnMut(&[usize], f64)) {
    let mut tuple = vec![0usize; len];
    loop {
        let w: f64 = tuple.iter().map(|&a| p[a]).product();
        if w > 0.0 {
            f(&tuple, w);
        }
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            tuple[i] += 1;
            if tuple[i] < p.len() {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

/// Departures over slots `0..m` with `backlog + 1` packets (the last one the
/// probe) present at the end of slot 0's arrivals, and arrivals in slots
/// `1..=m`. Keyed by `(departures, arrivals)`.
pub fn lowest_joint(p: &[f64], m: usize, backlog: usize) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for_each_tuple(p, m, |arr, w| {
        let mut queue = backlog + 1;
        let mut departures = 0;
        for slot in 0..m {
            if slot >= 1 {
                queue += arr[slot - 1];
            }
            if queue > 0 {
                queue -= 1;
                departures += 1;
            }
        }
        let arrivals: usize = arr.iter().sum();
        *out.entry((departures, arrivals)).or_insert(0.0) += w;
    });
    out
}

/// Equal-priority window: `preload` packets (backlog plus the whole first
/// batch) and the probe at slot 0, departures over slots `0..=m`, arrivals in
/// slots `1..=m` plus the packets ahead of the second probe in slot `m + 1`.
pub fn equal_joint(p: &[f64], m: usize, preload: usize) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for_each_tuple(p, m + 1, |arr, w| {
        let mut queue = preload + 1;
        let mut departures = 0;
        for slot in 0..=m {
            if slot >= 1 {
                queue += arr[slot - 1];
            }
            if queue > 0 {
                queue -= 1;
                departures += 1;
            }
        }
        let between: usize = arr[..m].iter().sum();
        let last = arr[m];
        for ahead in 0..=last {
            *out.entry((departures, between + ahead)).or_insert(0.0) += w / (last as f64 + 1.0);
        }
    });
    out
}

/// Stationary occupancy by power iteration on the truncated chain.
/// `late` observes after the slot's batch, otherwise before it.
pub fn occupancy_by_iteration(p: &[f64], size: usize, late: bool) -> Vec<f64> {
    let mut early = vec![0.0; size];
    early[0] = 1.0;
    for _ in 0..20_000 {
        let mut next = vec![0.0; size];
        for (q, &w) in early.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (a, &pa) in p.iter().enumerate() {
                let after = (q + a).saturating_sub(1).min(size - 1);
                next[after] += w * pa;
            }
        }
        let diff: f64 = next.iter().zip(&early).map(|(a, b)| (a - b).abs()).sum();
        early = next;
        if diff < 1e-16 {
            break;
        }
    }
    if !late {
        return early;
    }
    let mut out = vec![0.0; size];
    for (q, &w) in early.iter().enumerate() {
        for (a, &pa) in p.iter().enumerate() {
            if q + a < size {
                out[q + a] += w * pa;
            }
        }
    }
    out
}

/// `P{d_o = s | d_i = m}` for lowest-priority probes by explicit FIFO
/// bookkeeping, averaged over the late occupancy `pi`.
pub fn lowest_separation(p: &[f64], pi: &[f64], m: usize) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (q, &wq) in pi.iter().enumerate() {
        if wq < 1e-300 {
            continue;
        }
        for_each_tuple(p, m, |arr, w| {
            // Packets ahead of the first probe leave in slots 0..q, the probe in slot q.
            let first = q;
            let mut queue = q + 1;
            for slot in 0..m {
                if slot >= 1 {
                    queue += arr[slot - 1];
                }
                queue = queue.saturating_sub(1);
            }
            // Slot m: the batch, then the second probe at the back.
            queue += arr[m - 1];
            let second = m + queue;
            *out.entry(second - first).or_insert(0.0) += wq * w;
        });
    }
    out
}

/// Equal-priority analogue with input separation `d_i`, averaged over the
/// before-arrivals occupancy `r` and both probes' batch positions.
pub fn equal_separation(p: &[f64], r: &[f64], d_i: usize) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (q, &wq) in r.iter().enumerate() {
        if wq < 1e-300 {
            continue;
        }
        // Slots 0..=d_i each draw a batch; the probes sit at uniform positions
        // in the batches of slots 0 and d_i.
        for_each_tuple(p, d_i + 1, |arr, w| {
            let b0 = arr[0];
            let bl = arr[d_i];
            for ahead0 in 0..=b0 {
                for ahead1 in 0..=bl {
                    let weight = wq * w / ((b0 + 1) * (bl + 1)) as f64;
                    let first = q + ahead0;
                    let mut queue = q + b0 + 1;
                    queue -= 1;
                    for slot in 1..d_i {
                        queue += arr[slot];
                        queue = queue.saturating_sub(1);
                    }
                    let second = d_i + queue + ahead1;
                    *out.entry(second - first).or_insert(0.0) += weight;
                }
            }
        });
    }
    out
}
