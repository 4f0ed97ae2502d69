//! Separation laws through paths and trees of independent queues.
//!
//! Given the separation entering a node, the subtrees below it evolve
//! independently, so the leaf joint law is built by conditioning on each
//! branch node's output separation and taking outer products of the child
//! subtrees' laws.

use std::collections::HashMap;
use std::rc::Rc;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::separation::SeparationDist;

use super::cache::KernelCache;
use super::delay::apply_delay_kernel;
use super::leaf::LeafJointDist;
use super::topology::Topology;

/// Branch-node separations below this probability are dropped and counted
/// as leakage.
pub const BRANCH_CUTOFF: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    /// Leaf joint law, axes in the topology's leaf order, not renormalized.
    pub joint: LeafJointDist,
    /// Probability mass lost at each node (indexed by node id).
    pub stage_leakage: Vec<f64>,
}

impl Propagation {
    pub fn total_leakage(&self) -> f64 {
        (1.0 - self.joint.total()).max(0.0)
    }

    /// First node whose leakage exceeds `tolerance`.
    pub fn check(&self, tolerance: f64) -> Result<()> {
        for (stage, &leaked) in self.stage_leakage.iter().enumerate() {
            if leaked > tolerance {
                return Err(Error::Truncation {
                    stage,
                    leaked,
                    tolerance,
                });
            }
        }
        Ok(())
    }
}

struct Sub {
    joint: LeafJointDist,
    leak: Vec<f64>,
}

pub struct Propagator<'a> {
    topology: &'a Topology,
    limits: Limits,
    cache: &'a KernelCache,
}

impl<'a> Propagator<'a> {
    pub fn new(topology: &'a Topology, limits: Limits, cache: &'a KernelCache) -> Self {
        Self {
            topology,
            limits,
            cache,
        }
    }

    /// Leaf joint law for input separation law `d0` at the root. Never fails
    /// on leakage; see [`Propagation::check`].
    pub fn run(&self, d0: &SeparationDist) -> Result<Propagation> {
        self.limits.validate()?;
        let mut memo = HashMap::new();
        let sub = self.subtree(0, d0, &mut memo)?;
        let joint = sub.joint.permuted(self.topology.leaves())?;
        let mut joint = joint;
        joint.set_overflow(1.0 - joint.total());
        Ok(Propagation {
            joint,
            stage_leakage: sub.leak,
        })
    }

    fn subtree(&self, v: usize, input: &SeparationDist, memo: &mut HashMap<(usize, usize), Rc<Sub>>) -> Result<Sub> {
        let topo = self.topology;
        let node = topo.node(v);
        let n3 = self.limits.n3;
        let kernel = self.cache.get(&node.arrival, node.priority, &self.limits)?;
        let mixed = kernel.mix(input);
        let mut leak = vec![0.0; topo.len()];
        leak[v] += mixed.uncovered + mixed.pushed_out;
        let children = topo.children(v);

        if children.is_empty() {
            let out = mixed.into_separation();
            return Ok(Sub {
                joint: LeafJointDist::from_separation(v, &out, n3),
                leak,
            });
        }

        if children.len() == 1 && topo.joint_delay(v).is_none() {
            let c = children[0];
            let out = apply_delay_kernel(&mixed.into_separation(), topo.delay(c))?;
            let sub = self.subtree(c, &out, memo)?;
            for (a, b) in leak.iter_mut().zip(&sub.leak) {
                *a += b;
            }
            return Ok(Sub { joint: sub.joint, leak });
        }

        // Branch node: condition on its output separation t.
        let grouped: Vec<usize> = topo.joint_delay(v).map(|j| j.children.clone()).unwrap_or_default();
        let free: Vec<usize> = children.iter().copied().filter(|c| !grouped.contains(c)).collect();
        let mut parts_leaves: Vec<usize> = Vec::new();
        let mut leaves_of = HashMap::new();
        for &c in grouped.iter().chain(&free) {
            let ls = self.subtree_leaves(c);
            parts_leaves.extend(&ls);
            leaves_of.insert(c, ls);
        }
        let mut acc = LeafJointDist::zeros(parts_leaves, n3);

        for (i, &w) in mixed.mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if w < BRANCH_CUTOFF {
                leak[v] += w;
                continue;
            }
            let t = i + 1;
            let mut owned: Vec<LeafJointDist> = Vec::new();
            let mut shared: Vec<Rc<Sub>> = Vec::new();
            // Parts in assembly order: the joint-delay group first, then the rest.
            let mut order: Vec<Part> = Vec::new();
            // Each part's own leakage vector, attributed below.
            let mut part_leaks: Vec<Vec<f64>> = Vec::new();

            if let Some(jk) = topo.joint_delay(v) {
                let row = jk.rows.get(&t).ok_or(Error::KernelDomain { separation: t })?;
                let group_leaves: Vec<usize> = grouped.iter().flat_map(|c| leaves_of[c].clone()).collect();
                let mut part = LeafJointDist::zeros(group_leaves, n3);
                let mut part_leak = vec![0.0; topo.len()];
                for (xs, p) in row {
                    if *p == 0.0 {
                        continue;
                    }
                    let subs: Vec<Rc<Sub>> = grouped
                        .iter()
                        .zip(xs)
                        .map(|(&c, &x)| self.conditional(c, x, memo))
                        .collect::<Result<_>>()?;
                    let refs: Vec<&LeafJointDist> = subs.iter().map(|s| &s.joint).collect();
                    part.add_product(*p, &refs);
                    let pieces: Vec<(f64, &[f64])> = subs.iter().map(|s| (s.joint.total(), s.leak.as_slice())).collect();
                    attribute(&mut part_leak, *p, &pieces);
                }
                owned.push(part);
                order.push(Part::Owned(owned.len() - 1));
                part_leaks.push(part_leak);
            }

            for &c in &free {
                let delay = topo.delay(c);
                if delay.is_identity() {
                    let s = self.conditional(c, t, memo)?;
                    part_leaks.push(s.leak.clone());
                    shared.push(s);
                    order.push(Part::Shared(shared.len() - 1));
                } else {
                    let row = delay.row(t).ok_or(Error::KernelDomain { separation: t })?;
                    let mut part = LeafJointDist::zeros(leaves_of[&c].clone(), n3);
                    let mut part_leak = vec![0.0; topo.len()];
                    for (x, p) in row {
                        let s = self.conditional(c, x, memo)?;
                        part.add_scaled(p, &s.joint)?;
                        for (a, b) in part_leak.iter_mut().zip(&s.leak) {
                            *a += p * b;
                        }
                    }
                    owned.push(part);
                    order.push(Part::Owned(owned.len() - 1));
                    part_leaks.push(part_leak);
                }
            }

            let refs: Vec<&LeafJointDist> = order
                .iter()
                .map(|p| match *p {
                    Part::Owned(k) => &owned[k],
                    Part::Shared(k) => &shared[k].joint,
                })
                .collect();
            let pieces: Vec<(f64, &[f64])> = refs
                .iter()
                .zip(&part_leaks)
                .map(|(r, l)| (r.total(), l.as_slice()))
                .collect();
            attribute(&mut leak, w, &pieces);
            acc.add_product(w, &refs);
        }
        Ok(Sub { joint: acc, leak })
    }

    /// Subtree law below `c` given input separation exactly `x`.
    fn conditional(&self, c: usize, x: usize, memo: &mut HashMap<(usize, usize), Rc<Sub>>) -> Result<Rc<Sub>> {
        if let Some(s) = memo.get(&(c, x)) {
            return Ok(Rc::clone(s));
        }
        let sub = Rc::new(self.subtree(c, &SeparationDist::point(x)?, memo)?);
        memo.insert((c, x), Rc::clone(&sub));
        Ok(sub)
    }

    /// Leaves below `v` in the order the recursion assembles them.
    fn subtree_leaves(&self, v: usize) -> Vec<usize> {
        let topo = self.topology;
        let children = topo.children(v);
        if children.is_empty() {
            return vec![v];
        }
        let grouped: Vec<usize> = topo.joint_delay(v).map(|j| j.children.clone()).unwrap_or_default();
        let free = children.iter().copied().filter(|c| !grouped.contains(c));
        grouped
            .iter()
            .copied()
            .chain(free)
            .flat_map(|c| self.subtree_leaves(c))
            .collect()
    }
}

/// Adds `w` times the leakage of a product of independent parts to `leak`.
///
/// The product loses `1 - Π mass_k`. Part `k` is charged only for the mass
/// that survived parts `0..k`, so the charges add up to exactly that loss.
fn attribute(leak: &mut [f64], w: f64, parts: &[(f64, &[f64])]) {
    let mut survived = w;
    for &(mass, part_leak) in parts {
        for (a, b) in leak.iter_mut().zip(part_leak) {
            *a += survived * b;
        }
        survived *= mass;
    }
}

enum Part {
    Owned(usize),
    Shared(usize),
}

/// Leaf joint law for the tree, renormalized once at the end. Fails if any
/// node leaks more than the tail tolerance.
pub fn propagate_tree(topology: &Topology, d0: &SeparationDist, limits: &Limits) -> Result<LeafJointDist> {
    let cache = KernelCache::new();
    propagate_tree_cached(topology, d0, limits, &cache)
}

pub fn propagate_tree_cached(
    topology: &Topology,
    d0: &SeparationDist,
    limits: &Limits,
    cache: &KernelCache,
) -> Result<LeafJointDist> {
    let run = Propagator::new(topology, *limits, cache).run(d0)?;
    run.check(limits.tail_tolerance)?;
    Ok(run.joint.renormalize())
}

/// Output separation after a chain of lowest-priority queues. The error
/// for excessive leakage names the queue's position along the path.
pub fn propagate_path(queues: &[ArrivalModel], d0: &SeparationDist, limits: &Limits) -> Result<SeparationDist> {
    let topo = Topology::path(queues)?;
    propagate_tree(&topo, d0, limits)?.to_separation()
}
