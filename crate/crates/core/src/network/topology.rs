use serde::Serialize;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::kernel::Priority;

use super::delay::{DelayKernel, JointDelayKernel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub name: String,
    pub arrival: ArrivalModel,
    pub priority: Priority,
}

impl Node {
    pub fn new(name: impl Into<String>, arrival: ArrivalModel) -> Self {
        Self {
            name: name.into(),
            arrival,
            priority: Priority::Lowest,
        }
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }
}

/// Rooted tree of queues. Probes enter at the root; each leaf is an
/// observation point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Topology {
    nodes: Vec<Node>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Kernel on the link into each node (unused for the root).
    delay: Vec<DelayKernel>,
    joint_delay: Vec<Option<JointDelayKernel>>,
    leaves: Vec<usize>,
}

impl Topology {
    pub fn with_root(root: Node) -> Result<Self> {
        root.arrival.validate()?;
        Ok(Self {
            nodes: vec![root],
            parent: vec![None],
            children: vec![Vec::new()],
            delay: vec![DelayKernel::Identity],
            joint_delay: vec![None],
            leaves: vec![0],
        })
    }

    /// Chain of queues with fixed link delays.
    pub fn path(queues: &[ArrivalModel]) -> Result<Self> {
        let (first, rest) = queues
            .split_first()
            .ok_or_else(|| Error::Topology("a path needs at least one queue".into()))?;
        let mut topo = Self::with_root(Node::new("q1", first.clone()))?;
        let mut last = 0;
        for (k, q) in rest.iter().enumerate() {
            last = topo.add_child(last, Node::new(format!("q{}", k + 2), q.clone()), DelayKernel::Identity)?;
        }
        Ok(topo)
    }

    /// Root feeding two leaf queues.
    pub fn multicast(root: ArrivalModel, left: ArrivalModel, right: ArrivalModel) -> Result<Self> {
        let mut topo = Self::with_root(Node::new("q1", root))?;
        topo.add_child(0, Node::new("q2", left), DelayKernel::Identity)?;
        topo.add_child(0, Node::new("q3", right), DelayKernel::Identity)?;
        Ok(topo)
    }

    /// Appends `node` below `parent`; returns its id. Leaves are kept in
    /// depth-first order.
    pub fn add_child(&mut self, parent: usize, node: Node, delay: DelayKernel) -> Result<usize> {
        if parent >= self.nodes.len() {
            return Err(Error::Topology(format!("no node {parent}")));
        }
        node.arrival.validate()?;
        delay.validate()?;
        let id = self.nodes.len();
        self.nodes.push(node);
        self.parent.push(Some(parent));
        self.children.push(Vec::new());
        self.delay.push(delay);
        self.joint_delay.push(None);
        self.children[parent].push(id);
        self.leaves = self.dfs_leaves();
        Ok(id)
    }

    /// Replaces the independent edge kernels of some children of `node` by
    /// one joint law.
    pub fn set_joint_delay(&mut self, node: usize, kernel: JointDelayKernel) -> Result<()> {
        kernel.validate()?;
        let kids = self
            .children
            .get(node)
            .ok_or_else(|| Error::Topology(format!("no node {node}")))?;
        for c in &kernel.children {
            if !kids.contains(c) {
                return Err(Error::Topology(format!("node {c} is not a child of {node}")));
            }
        }
        let mut seen = kernel.children.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != kernel.children.len() {
            return Err(Error::Topology("joint delay kernel lists a child twice".into()));
        }
        self.joint_delay[node] = Some(kernel);
        Ok(())
    }

    /// Reorders the observation axes. `order` must be a permutation of the leaves.
    pub fn set_leaf_order(&mut self, order: Vec<usize>) -> Result<()> {
        let mut want = self.dfs_leaves();
        let mut got = order.clone();
        want.sort_unstable();
        got.sort_unstable();
        if want != got {
            return Err(Error::Topology("leaf order must list every leaf exactly once".into()));
        }
        self.leaves = order;
        Ok(())
    }

    fn dfs_leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            if self.children[v].is_empty() {
                out.push(v);
            }
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn delay(&self, id: usize) -> &DelayKernel {
        &self.delay[id]
    }

    pub fn joint_delay(&self, id: usize) -> Option<&JointDelayKernel> {
        self.joint_delay[id].as_ref()
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// Node ids from the root down to `leaf`.
    pub fn path_to(&self, leaf: usize) -> Vec<usize> {
        let mut out = vec![leaf];
        let mut v = leaf;
        while let Some(p) = self.parent[v] {
            out.push(p);
            v = p;
        }
        out.reverse();
        out
    }

    /// The root-to-leaf chain as its own topology, keeping edge kernels.
    pub fn path_topology(&self, leaf: usize) -> Result<Self> {
        let ids = self.path_to(leaf);
        let mut topo = Self::with_root(self.nodes[ids[0]].clone())?;
        for (k, &id) in ids.iter().enumerate().skip(1) {
            topo.add_child(k - 1, self.nodes[id].clone(), self.delay[id].clone())?;
        }
        Ok(topo)
    }

    /// Per-node arrival rates in node-id order (one-parameter families only).
    pub fn rates(&self) -> Option<Vec<f64>> {
        self.nodes.iter().map(|n| n.arrival.rate()).collect()
    }

    /// Same tree with node `k` switched to rate `rates[k]`.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self> {
        if rates.len() != self.nodes.len() {
            return Err(Error::Usage(format!(
                "{} rates given for {} queues",
                rates.len(),
                self.nodes.len()
            )));
        }
        let mut out = self.clone();
        for (node, &r) in out.nodes.iter_mut().zip(rates) {
            node.arrival = node.arrival.with_rate(r)?;
        }
        Ok(out)
    }

    pub fn set_priority_all(&mut self, priority: Priority) {
        for n in &mut self.nodes {
            n.priority = priority;
        }
    }

    pub fn max_rate(&self) -> f64 {
        self.nodes.iter().map(|n| n.arrival.mean()).fold(0.0, f64::max)
    }
}
