//! Noisy-or diagnostic networks.
//!
//! A [`Network`] is an immutable DAG of binary noisy-or units. Each node
//! carries a leak probability that acts as an always-true implicit parent,
//! and each edge `i -> j` carries the probability that `i` alone causes `j`.
//! The probability that node `j` is true given its parents is
//!
//! ```text
//! P(j | parents) = 1 - (1 - leak_j) * prod_{i true} (1 - p_ij)
//! ```

use crate::error::{Error, Result};
use crate::scalar::Prob;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

/// Dense internal index of a node, assigned in file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Model,
    Sensory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<P> {
    pub id: String,
    pub kind: NodeKind,
    pub leak: P,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<P> {
    pub from: NodeId,
    pub to: NodeId,
    pub p: P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationProfile {
    /// Leaks strictly inside (0, 1) and link probabilities below 1, so every
    /// complete assignment has positive probability.
    #[default]
    Strict,
    Permissive,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    LeakOutOfRange(f64),
    /// Leak is 0 or 1 under the strict profile.
    LeakNotPositive(f64),
    LinkOutOfRange(f64),
    /// Link probability of exactly 1 under the strict profile.
    DeterministicLink(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Node id, or `from->to` for edges.
    pub subject: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::LeakOutOfRange(v) => write!(f, "{}: leak {} outside [0,1]", self.subject, v),
            ViolationKind::LeakNotPositive(v) => {
                write!(f, "{}: positivity violation, leak {} not in (0,1)", self.subject, v)
            }
            ViolationKind::LinkOutOfRange(v) => write!(f, "{}: link {} outside [0,1]", self.subject, v),
            ViolationKind::DeterministicLink(v) => {
                write!(f, "{}: positivity violation, link {} is deterministic", self.subject, v)
            }
        }
    }
}

fn in_unit<P: Prob>(x: P) -> bool {
    x >= P::zero() && x <= P::one()
}

/// Incremental constructor; `build` checks every structural invariant.
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder<P> {
    nodes: Vec<Node<P>>,
    edges: Vec<(String, String, P)>,
}

impl<P: Prob> NetworkBuilder<P> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn node(mut self, id: impl Into<String>, kind: NodeKind, leak: P) -> Self {
        self.add_node(id, kind, leak);
        self
    }

    pub fn edge(mut self, from: impl Into<String>, to: impl Into<String>, p: P) -> Self {
        self.add_edge(from, to, p);
        self
    }

    pub fn add_node(&mut self, id: impl Into<String>, kind: NodeKind, leak: P) {
        self.nodes.push(Node { id: id.into(), kind, leak });
    }

    pub fn add_edge(&mut self, from: impl Into<String>, to: impl Into<String>, p: P) {
        self.edges.push((from.into(), to.into(), p));
    }

    pub fn build(self) -> Result<Network<P>> {
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            if index.insert(node.id.clone(), NodeId(i)).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
            if !in_unit(node.leak) {
                return Err(Error::ProbabilityOutOfRange {
                    what: format!("leak of `{}`", node.id),
                    value: node.leak.as_f64(),
                });
            }
        }

        let n = self.nodes.len();
        let mut parents: Vec<Vec<(NodeId, P)>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut seen = HashSet::with_capacity(self.edges.len());
        for (from, to, p) in self.edges {
            let f = *index.get(&from).ok_or_else(|| Error::UnknownNode(from.clone()))?;
            let t = *index.get(&to).ok_or_else(|| Error::UnknownNode(to.clone()))?;
            if !in_unit(p) {
                return Err(Error::ProbabilityOutOfRange {
                    what: format!("edge `{from}` -> `{to}`"),
                    value: p.as_f64(),
                });
            }
            if f == t {
                return Err(Error::Cycle(from));
            }
            if !seen.insert((f, t)) {
                return Err(Error::DuplicateEdge { from, to });
            }
            parents[t.0].push((f, p));
            children[f.0].push(t);
            edges.push(Edge { from: f, to: t, p });
        }

        let topo = topological_order(&parents, &children).map_err(|i| Error::Cycle(self.nodes[i].id.clone()))?;
        let mut topo_pos = vec![0; n];
        for (pos, id) in topo.iter().enumerate() {
            topo_pos[id.0] = pos;
        }

        Ok(Network { nodes: self.nodes, edges, parents, children, topo, topo_pos, index })
    }
}

fn noisy_or<P: Prob>(leak: P, active_links: impl Iterator<Item = P>) -> P {
    let mut q = P::one() - leak;
    let mut any = false;
    for p in active_links {
        q = q * (P::one() - p);
        any = true;
    }
    if any {
        P::one() - q
    } else {
        leak
    }
}

/// Kahn's algorithm, lowest index first among ready nodes. On failure returns
/// the index of a node lying on a directed cycle.
fn topological_order<P>(
    parents: &[Vec<(NodeId, P)>],
    children: &[Vec<NodeId>],
) -> std::result::Result<Vec<NodeId>, usize> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(NodeId(i));
        for c in &children[i] {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                ready.push(Reverse(c.0));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover node has a leftover parent; walking parents must revisit.
    let mut cur = (0..n).find(|&i| indeg[i] > 0).expect("leftover node");
    let mut visited = vec![false; n];
    while !visited[cur] {
        visited[cur] = true;
        cur = parents[cur].iter().map(|(p, _)| p.0).find(|&p| indeg[p] > 0).expect("leftover parent");
    }
    Err(cur)
}

#[derive(Clone, Debug)]
pub struct Network<P: Prob = f64> {
    nodes: Vec<Node<P>>,
    edges: Vec<Edge<P>>,
    parents: Vec<Vec<(NodeId, P)>>,
    children: Vec<Vec<NodeId>>,
    topo: Vec<NodeId>,
    topo_pos: Vec<usize>,
    index: HashMap<String, NodeId>,
}

impl<P: Prob> Network<P> {
    pub fn builder() -> NetworkBuilder<P> {
        NetworkBuilder::new()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node<P>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<P>] {
        &self.edges
    }

    pub fn node(&self, n: NodeId) -> &Node<P> {
        &self.nodes[n.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn id(&self, n: NodeId) -> &str {
        &self.nodes[n.0].id
    }

    pub fn lookup(&self, id: &str) -> Option<NodeId> {
        self.index.get(id).copied()
    }

    pub fn node_id(&self, id: &str) -> Result<NodeId> {
        self.lookup(id).ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn check(&self, n: NodeId) -> Result<()> {
        if n.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("#{}", n.0)))
        }
    }

    pub fn leak(&self, n: NodeId) -> P {
        self.nodes[n.0].leak
    }

    pub fn kind(&self, n: NodeId) -> NodeKind {
        self.nodes[n.0].kind
    }

    /// π(n) with link probabilities, in edge insertion order.
    pub fn parents(&self, n: NodeId) -> &[(NodeId, P)] {
        &self.parents[n.0]
    }

    /// λ(n), in edge insertion order.
    pub fn children(&self, n: NodeId) -> &[NodeId] {
        &self.children[n.0]
    }

    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn topo_position(&self, n: NodeId) -> usize {
        self.topo_pos[n.0]
    }

    pub fn link(&self, from: NodeId, to: NodeId) -> Option<P> {
        self.parents[to.0].iter().find(|(p, _)| *p == from).map(|&(_, p)| p)
    }

    /// Probability that `n` is false given the parent values in `state`.
    #[inline]
    pub fn prob_false(&self, n: NodeId, state: &[bool]) -> P {
        let mut q = P::one() - self.nodes[n.0].leak;
        for &(par, p) in &self.parents[n.0] {
            if state[par.0] {
                q = q * (P::one() - p);
            }
        }
        q
    }

    /// With no true parent this is the leak itself, not 1 - (1 - leak).
    #[inline]
    pub fn prob_true(&self, n: NodeId, state: &[bool]) -> P {
        let active = self.parents[n.0].iter().filter(|(par, _)| state[par.0]).map(|&(_, p)| p);
        noisy_or(self.nodes[n.0].leak, active)
    }

    /// P(n = state[n] | parents in state).
    #[inline]
    pub fn factor(&self, n: NodeId, state: &[bool]) -> P {
        if state[n.0] {
            self.prob_true(n, state)
        } else {
            self.prob_false(n, state)
        }
    }

    /// Noisy-or CPD value for `n = true`; `parent_values` must name exactly π(n).
    pub fn noisy_or_prob(&self, n: NodeId, parent_values: &[(NodeId, bool)]) -> Result<P> {
        self.check(n)?;
        let parents = &self.parents[n.0];
        let bad = |reason: String| Error::ParentAssignment { node: self.id(n).to_string(), reason };
        let mut seen = HashSet::new();
        for (p, _) in parent_values {
            if !parents.iter().any(|(q, _)| q == p) {
                return Err(bad(format!("`{}` is not a parent", self.label(*p))));
            }
            if !seen.insert(*p) {
                return Err(bad(format!("`{}` assigned twice", self.label(*p))));
            }
        }
        if seen.len() != parents.len() {
            let missing = parents.iter().find(|(p, _)| !seen.contains(p)).expect("missing parent").0;
            return Err(bad(format!("missing parent `{}`", self.id(missing))));
        }
        let active = parent_values.iter().filter(|v| v.1).map(|&(par, _)| self.link(par, n).expect("checked parent"));
        Ok(noisy_or(self.nodes[n.0].leak, active))
    }

    fn label(&self, n: NodeId) -> String {
        self.nodes.get(n.0).map(|x| x.id.clone()).unwrap_or_else(|| format!("#{}", n.0))
    }

    /// Σ_j log P(n_j | π(n_j)) over a complete assignment; `-inf` if any factor is 0.
    pub fn joint_log_prob(&self, assignment: &[bool]) -> Result<P> {
        if assignment.len() != self.nodes.len() {
            return Err(Error::IncompleteAssignment { expected: self.nodes.len(), got: assignment.len() });
        }
        let mut total = P::zero();
        for &n in &self.topo {
            let f = self.factor(n, assignment);
            if f <= P::zero() {
                return Ok(P::neg_infinity());
            }
            total = total + f.ln();
        }
        Ok(total)
    }

    /// Parents, children and co-parents of children, excluding `n`.
    pub fn markov_blanket(&self, n: NodeId) -> Result<BTreeSet<NodeId>> {
        self.check(n)?;
        let mut out: BTreeSet<NodeId> = self.parents[n.0].iter().map(|&(p, _)| p).collect();
        for &c in &self.children[n.0] {
            out.insert(c);
            out.extend(self.parents[c.0].iter().map(|&(p, _)| p));
        }
        out.remove(&n);
        Ok(out)
    }

    /// Mask of `seeds` and all their ancestors.
    pub fn ancestor_mask(&self, seeds: impl IntoIterator<Item = NodeId>) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<NodeId> = seeds.into_iter().collect();
        while let Some(n) = stack.pop() {
            if !mask[n.0] {
                mask[n.0] = true;
                stack.extend(self.parents[n.0].iter().map(|&(p, _)| p));
            }
        }
        mask
    }

    /// Mask of `seeds` and all their descendants.
    pub fn descendant_mask(&self, seeds: impl IntoIterator<Item = NodeId>) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<NodeId> = seeds.into_iter().collect();
        while let Some(n) = stack.pop() {
            if !mask[n.0] {
                mask[n.0] = true;
                stack.extend(self.children[n.0].iter().copied());
            }
        }
        mask
    }

    pub fn validate(&self, profile: ValidationProfile) -> Vec<Violation> {
        let mut out = Vec::new();
        for node in &self.nodes {
            let leak = node.leak;
            if !in_unit(leak) {
                out.push(Violation { subject: node.id.clone(), kind: ViolationKind::LeakOutOfRange(leak.as_f64()) });
            } else if profile == ValidationProfile::Strict && (leak <= P::zero() || leak >= P::one()) {
                out.push(Violation { subject: node.id.clone(), kind: ViolationKind::LeakNotPositive(leak.as_f64()) });
            }
        }
        for e in &self.edges {
            let subject = format!("{}->{}", self.id(e.from), self.id(e.to));
            if !in_unit(e.p) {
                out.push(Violation { subject, kind: ViolationKind::LinkOutOfRange(e.p.as_f64()) });
            } else if profile == ValidationProfile::Strict && e.p >= P::one() {
                out.push(Violation { subject, kind: ViolationKind::DeterministicLink(e.p.as_f64()) });
            }
        }
        out
    }

    /// Error form of [`Network::validate`] used by sampling entry points.
    pub fn ensure_valid(&self, profile: ValidationProfile) -> Result<()> {
        let v = self.validate(profile);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))
        }
    }

    /// Same topology with every probability converted to another scalar type.
    pub fn cast<Q: Prob>(&self) -> Network<Q> {
        let c = |x: P| Q::of(x.as_f64());
        Network {
            nodes: self.nodes.iter().map(|n| Node { id: n.id.clone(), kind: n.kind, leak: c(n.leak) }).collect(),
            edges: self.edges.iter().map(|e| Edge { from: e.from, to: e.to, p: c(e.p) }).collect(),
            parents: self.parents.iter().map(|ps| ps.iter().map(|&(n, p)| (n, c(p))).collect()).collect(),
            children: self.children.clone(),
            topo: self.topo.clone(),
            topo_pos: self.topo_pos.clone(),
            index: self.index.clone(),
        }
    }

    /// Copy with one node's leak replaced; used for fixtures and what-if tests.
    pub fn with_leak(&self, n: NodeId, leak: P) -> Result<Self> {
        self.check(n)?;
        if !in_unit(leak) {
            return Err(Error::ProbabilityOutOfRange {
                what: format!("leak of `{}`", self.id(n)),
                value: leak.as_f64(),
            });
        }
        let mut out = self.clone();
        out.nodes[n.0].leak = leak;
        Ok(out)
    }
}

/// The broken-vase network: earthquake and boy compete to explain a broken vase.
pub fn vase<P: Prob>() -> Network<P> {
    Network::builder()
        .node("e", NodeKind::Model, P::of(0.01))
        .node("b", NodeKind::Model, P::of(0.02))
        .node("v", NodeKind::Sensory, P::of(0.001))
        .edge("e", "v", P::of(0.9))
        .edge("b", "v", P::of(0.8))
        .build()
        .expect("vase fixture is valid")
}
