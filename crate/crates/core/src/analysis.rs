//! Pre-simulation analysis: clamping and evidence-flow classification.
//!
//! Clamping fixes to false every node that positive evidence cannot reach:
//! anything that is neither an ancestor of a true observation nor a
//! descendant of such an ancestor. Flow classification then splits the
//! remaining free nodes into those that only receive causal support from
//! above (forward sampled) and those with diagnostic evidence flowing up from
//! a child (diagnostic sampled).

use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeId};
use crate::scalar::Prob;
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalPhase {
    Backward,
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalRecord {
    pub phase: SignalPhase,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClampResult {
    mask: Vec<bool>,
    pub clamped_false: BTreeSet<NodeId>,
    pub unclamped: BTreeSet<NodeId>,
    pub signal_trace: Vec<SignalRecord>,
}

impl ClampResult {
    /// No clamping: every unobserved node stays free.
    pub fn disabled<P: Prob>(net: &Network<P>, ev: &Evidence) -> Self {
        Self {
            mask: vec![false; net.len()],
            clamped_false: BTreeSet::new(),
            unclamped: net.node_ids().filter(|&n| !ev.is_observed(n)).collect(),
            signal_trace: Vec::new(),
        }
    }

    #[inline]
    pub fn is_clamped(&self, n: NodeId) -> bool {
        self.mask[n.0]
    }
}

/// Two-phase signal pass. A backward signal climbs from every true
/// observation to its ancestors; a forward signal then descends from every
/// node that received one (and from the observations themselves). Signals
/// are idempotent, so each phase is a plain breadth-first search.
pub fn clamp_pass<P: Prob>(net: &Network<P>, ev: &Evidence) -> Result<ClampResult> {
    ev.check_against(net)?;
    let n = net.len();
    let mut backward = vec![false; n];
    let mut trace = Vec::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();

    for t in ev.true_nodes() {
        if !backward[t.0] {
            backward[t.0] = true;
            queue.push_back(t);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &(p, _) in net.parents(x) {
            if !backward[p.0] {
                backward[p.0] = true;
                trace.push(SignalRecord { phase: SignalPhase::Backward, node: p });
                queue.push_back(p);
            }
        }
    }

    let mut signaled = backward.clone();
    queue.extend((0..n).filter(|&i| backward[i]).map(NodeId));
    while let Some(x) = queue.pop_front() {
        for &c in net.children(x) {
            if !signaled[c.0] {
                signaled[c.0] = true;
                trace.push(SignalRecord { phase: SignalPhase::Forward, node: c });
                queue.push_back(c);
            }
        }
    }

    let mut mask = vec![false; n];
    let mut clamped_false = BTreeSet::new();
    let mut unclamped = BTreeSet::new();
    for id in net.node_ids() {
        if ev.is_observed(id) {
            continue;
        }
        if signaled[id.0] {
            unclamped.insert(id);
        } else {
            mask[id.0] = true;
            clamped_false.insert(id);
        }
    }
    Ok(ClampResult { mask, clamped_false, unclamped, signal_trace: trace })
}

/// Mask of nodes that are observed or have an observed descendant.
pub fn evidence_below<P: Prob>(net: &Network<P>, ev: &Evidence) -> Vec<bool> {
    let mut below = vec![false; net.len()];
    for &v in net.topo_order().iter().rev() {
        below[v.0] = ev.is_observed(v) || net.children(v).iter().any(|c| below[c.0]);
    }
    below
}

fn is_free(ev: &Evidence, clamp: &ClampResult, n: NodeId) -> bool {
    !ev.is_observed(n) && !clamp.is_clamped(n)
}

/// λᵉ(n): children through which diagnostic evidence reaches `n`.
pub fn evidential_children<P: Prob>(
    net: &Network<P>,
    ev: &Evidence,
    clamp: &ClampResult,
    n: NodeId,
) -> Result<BTreeSet<NodeId>> {
    net.check(n)?;
    if !is_free(ev, clamp, n) {
        return Err(Error::NotFree(net.id(n).to_string()));
    }
    let below = evidence_below(net, ev);
    Ok(net.children(n).iter().copied().filter(|c| below[c.0]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Clamped,
    ForwardSampled,
    DiagnosticSampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowInfo {
    pub status: FlowStatus,
    /// λᵉ(n)
    pub evidential_children: BTreeSet<NodeId>,
    /// ξ(n): parents, evidential children and their other parents.
    pub conditioning_set: BTreeSet<NodeId>,
}

/// Flow information for every unobserved node; observed nodes have none.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    infos: Vec<Option<FlowInfo>>,
}

impl FlowMap {
    pub fn get(&self, n: NodeId) -> Option<&FlowInfo> {
        self.infos[n.0].as_ref()
    }

    pub fn status(&self, n: NodeId) -> Option<FlowStatus> {
        self.get(n).map(|f| f.status)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &FlowInfo)> {
        self.infos.iter().enumerate().filter_map(|(i, f)| f.as_ref().map(|f| (NodeId(i), f)))
    }

    pub fn with_status(&self, status: FlowStatus) -> impl Iterator<Item = NodeId> + '_ {
        self.iter().filter(move |(_, f)| f.status == status).map(|(n, _)| n)
    }
}

pub fn classify_flow<P: Prob>(net: &Network<P>, ev: &Evidence, clamp: &ClampResult) -> Result<FlowMap> {
    ev.check_against(net)?;
    let below = evidence_below(net, ev);
    let infos = net
        .node_ids()
        .map(|n| {
            if ev.is_observed(n) {
                return None;
            }
            let parents: BTreeSet<NodeId> = net.parents(n).iter().map(|&(p, _)| p).collect();
            if clamp.is_clamped(n) {
                return Some(FlowInfo {
                    status: FlowStatus::Clamped,
                    evidential_children: BTreeSet::new(),
                    conditioning_set: BTreeSet::new(),
                });
            }
            let lambda: BTreeSet<NodeId> = net.children(n).iter().copied().filter(|c| below[c.0]).collect();
            let mut xi = parents;
            for &c in &lambda {
                xi.insert(c);
                xi.extend(net.parents(c).iter().map(|&(p, _)| p).filter(|&p| p != n));
            }
            let status = if lambda.is_empty() { FlowStatus::ForwardSampled } else { FlowStatus::DiagnosticSampled };
            Some(FlowInfo { status, evidential_children: lambda, conditioning_set: xi })
        })
        .collect();
    Ok(FlowMap { infos })
}
