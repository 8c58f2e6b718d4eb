//! Moves on the joint state of the free nodes.
//!
//! Every move is a small Markov chain over a set of candidate states Θ_m that
//! differ only on the moved nodes Δ_m. Its Gibbs transition probabilities are
//! the joint probabilities restricted to Θ_m; all factors outside Δ_m and its
//! children cancel, so only those are evaluated.

use super::accumulator::MarginalAccumulator;
use super::strategy::{MoveRule, StrategySpec};
use crate::analysis::{clamp_pass, classify_flow, ClampResult, FlowInfo, FlowMap, FlowStatus};
use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeId, ValidationProfile};
use crate::scalar::Prob;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SamplerRng = ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SamplerState {
    /// θ over all nodes; observed and clamped entries never change.
    pub values: Vec<bool>,
    pub rng: SamplerRng,
    pub sweep_count: u64,
    /// Factor evaluations so far, a hardware-independent cost measure.
    pub work: u64,
}

impl SamplerState {
    pub fn new(values: Vec<bool>, seed: u64) -> Self {
        Self { values, rng: SamplerRng::seed_from_u64(seed), sweep_count: 0, work: 0 }
    }
}

/// How a node is resampled.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Role {
    /// Observed or clamped.
    Fixed,
    /// Drawn directly from its CPD given the current parents.
    Forward,
    /// Resampled from its own factor times the factors of `children`.
    Local { children: Vec<NodeId> },
}

/// Forward-samples every unobserved, unclamped node in topological order.
pub fn initialize_state<P: Prob>(
    net: &Network<P>,
    ev: &Evidence,
    clamp: &ClampResult,
    seed: u64,
) -> Result<SamplerState> {
    net.ensure_valid(ValidationProfile::Strict)?;
    ev.check_against(net)?;
    let mut rng = SamplerRng::seed_from_u64(seed);
    let mut values = vec![false; net.len()];
    for &n in net.topo_order() {
        values[n.0] = match ev.get(n) {
            Some(v) => v,
            None if clamp.is_clamped(n) => false,
            None => P::draw(&mut rng) < net.prob_true(n, &values),
        };
    }
    Ok(SamplerState { values, rng, sweep_count: 0, work: 0 })
}

/// Accepts with probability min(1, proposed / current). No random number is
/// consumed when the proposal is at least as likely as the current state.
pub fn metropolis_accept<P: Prob, R: Rng + ?Sized>(current: P, proposed: P, rng: &mut R) -> Result<bool> {
    if !(current > P::zero()) || !(proposed >= P::zero()) {
        return Err(Error::NonpositiveWeight { current: current.as_f64(), proposed: proposed.as_f64() });
    }
    if proposed >= current {
        return Ok(true);
    }
    Ok(P::draw(rng) < proposed / current)
}

/// A candidate set Θ_m of complete assignments differing only on Δ_m.
#[derive(Clone, Debug, PartialEq)]
pub struct MoveProposal {
    pub delta: Vec<NodeId>,
    pub candidate_states: Vec<Vec<bool>>,
    pub rule: MoveRule,
}

impl MoveProposal {
    fn with(values: &[bool], delta: Vec<NodeId>, patterns: &[u8], rule: MoveRule) -> Self {
        let candidate_states = patterns
            .iter()
            .map(|&bits| {
                let mut s = values.to_vec();
                for (i, n) in delta.iter().enumerate() {
                    s[n.0] = bits >> i & 1 == 1;
                }
                s
            })
            .collect();
        Self { delta, candidate_states, rule }
    }

    pub fn single(values: &[bool], n: NodeId, rule: MoveRule) -> Self {
        Self::with(values, vec![n], &[0, 1], rule)
    }

    /// All four joint states of `(a, b)`, in the order 00, 10, 01, 11.
    pub fn block(values: &[bool], a: NodeId, b: NodeId, rule: MoveRule) -> Self {
        Self::with(values, vec![a, b], &[0, 1, 2, 3], rule)
    }

    /// The current state and the state with `a` and `b` exchanged.
    pub fn swap(values: &[bool], a: NodeId, b: NodeId, rule: MoveRule) -> Self {
        let cur = values[a.0] as u8 | (values[b.0] as u8) << 1;
        let swapped = values[b.0] as u8 | (values[a.0] as u8) << 1;
        Self::with(values, vec![a, b], &[cur, swapped], rule)
    }

    pub fn validate(&self, values: &[bool]) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProposal(m.to_string()));
        if !(1..=2).contains(&self.delta.len()) {
            return bad("Δ_m must hold one or two nodes");
        }
        if self.delta.len() == 2 && self.delta[0] == self.delta[1] {
            return bad("Δ_m repeats a node");
        }
        if ![2, 4].contains(&self.candidate_states.len()) {
            return bad("Θ_m must hold two or four states");
        }
        for s in &self.candidate_states {
            if s.len() != values.len() {
                return bad("candidate state has the wrong length");
            }
            let outside =
                s.iter().zip(values).enumerate().any(|(i, (a, b))| a != b && !self.delta.contains(&NodeId(i)));
            if outside {
                return bad("Θ_m states disagree outside Δ_m");
            }
        }
        if !self.candidate_states.iter().any(|s| s == values) {
            return bad("Θ_m does not contain the current state");
        }
        Ok(())
    }
}

fn restricted_weights<P: Prob>(
    net: &Network<P>,
    proposal: &MoveProposal,
    children_of: impl Fn(NodeId) -> Vec<NodeId>,
) -> Result<Vec<P>> {
    let mut factor_nodes: Vec<NodeId> = proposal.delta.clone();
    for &d in &proposal.delta {
        for c in children_of(d) {
            if !factor_nodes.contains(&c) {
                factor_nodes.push(c);
            }
        }
    }
    let weights: Vec<P> = proposal
        .candidate_states
        .iter()
        .map(|s| factor_nodes.iter().fold(P::one(), |w, &k| w * net.factor(k, s)))
        .collect();
    let total: P = weights.iter().copied().sum();
    if !(total > P::zero()) {
        return Err(Error::DegenerateConditional(net.id(proposal.delta[0]).to_string()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// P(θ_j | Θ_m, Y) over the candidate states, using every child of Δ_m.
pub fn transition_distribution<P: Prob>(net: &Network<P>, values: &[bool], proposal: &MoveProposal) -> Result<Vec<P>> {
    if proposal.rule != MoveRule::Gibbs {
        return Err(Error::InvalidProposal("transition distribution is defined for the Gibbs rule".into()));
    }
    if values.len() != net.len() {
        return Err(Error::IncompleteAssignment { expected: net.len(), got: values.len() });
    }
    proposal.validate(values)?;
    restricted_weights(net, proposal, |d| net.children(d).to_vec())
}

/// P(n = true | ξ) from the sampling equation: the node's CPD times the
/// factors of its evidential children, normalized over both values. For a
/// forward-sampled node this is the CPD itself.
pub fn conditional_prob<P: Prob>(net: &Network<P>, values: &[bool], n: NodeId, flow: &FlowInfo) -> Result<P> {
    match flow.status {
        FlowStatus::Clamped => Err(Error::NotFree(net.id(n).to_string())),
        FlowStatus::ForwardSampled => Ok(net.prob_true(n, values)),
        FlowStatus::DiagnosticSampled => {
            let children: Vec<NodeId> = flow.evidential_children.iter().copied().collect();
            let (w0, w1) = single_weights(net, values, n, &children);
            normalize_pair(net, n, w0, w1)
        }
    }
}

fn normalize_pair<P: Prob>(net: &Network<P>, n: NodeId, w0: P, w1: P) -> Result<P> {
    let total = w0 + w1;
    if !(total > P::zero()) {
        return Err(Error::DegenerateConditional(net.id(n).to_string()));
    }
    Ok(w1 / total)
}

/// Unnormalized weights of n = false and n = true: the node's own factor
/// times the factors of `children`, computed in one pass over their parents.
#[inline]
pub(crate) fn single_weights<P: Prob>(net: &Network<P>, values: &[bool], n: NodeId, children: &[NodeId]) -> (P, P) {
    let one = P::one();
    let q = net.prob_false(n, values);
    let (mut w0, mut w1) = (q, one - q);
    for &c in children {
        let mut q_rest = one - net.leak(c);
        let mut link = P::zero();
        for &(par, p) in net.parents(c) {
            if par == n {
                link = p;
            } else if values[par.0] {
                q_rest = q_rest * (one - p);
            }
        }
        let q_on = q_rest * (one - link);
        if values[c.0] {
            w0 = w0 * (one - q_rest);
            w1 = w1 * (one - q_on);
        } else {
            w0 = w0 * q_rest;
            w1 = w1 * q_on;
        }
    }
    (w0, w1)
}

/// Immutable sampling context shared by all chains of one strategy on one
/// (network, evidence) problem.
#[derive(Clone, Debug)]
pub struct Engine<'a, P: Prob> {
    pub(crate) net: &'a Network<P>,
    pub(crate) evidence: &'a Evidence,
    pub(crate) strategy: StrategySpec,
    pub(crate) clamp: ClampResult,
    pub(crate) flow: FlowMap,
    pub(crate) roles: Vec<Role>,
    /// Free nodes in topological order.
    pub(crate) free: Vec<NodeId>,
    pub(crate) pairing: super::schedule::PairCandidates,
}

impl<'a, P: Prob> Engine<'a, P> {
    pub fn new(net: &'a Network<P>, evidence: &'a Evidence, strategy: StrategySpec) -> Result<Self> {
        Self::with_profile(net, evidence, strategy, ValidationProfile::Strict)
    }

    /// Permissive networks may produce degenerate conditionals, reported as
    /// errors when a move hits one.
    pub fn with_profile(
        net: &'a Network<P>,
        evidence: &'a Evidence,
        strategy: StrategySpec,
        profile: ValidationProfile,
    ) -> Result<Self> {
        strategy.validate()?;
        net.ensure_valid(profile)?;
        evidence.check_against(net)?;
        let clamp = if strategy.clamp { clamp_pass(net, evidence)? } else { ClampResult::disabled(net, evidence) };
        let flow = classify_flow(net, evidence, &clamp)?;
        let roles: Vec<Role> = net
            .node_ids()
            .map(|n| match flow.get(n) {
                None => Role::Fixed,
                Some(info) => match info.status {
                    FlowStatus::Clamped => Role::Fixed,
                    FlowStatus::ForwardSampled if strategy.flow_aware => Role::Forward,
                    _ if strategy.flow_aware => {
                        Role::Local { children: info.evidential_children.iter().copied().collect() }
                    }
                    _ => Role::Local { children: net.children(n).to_vec() },
                },
            })
            .collect();
        let free: Vec<NodeId> = net.topo_order().iter().copied().filter(|n| roles[n.0] != Role::Fixed).collect();
        let mut engine = Self { net, evidence, strategy, clamp, flow, roles, free, pairing: Default::default() };
        engine.pairing = super::schedule::PairCandidates::build(&engine);
        Ok(engine)
    }

    pub fn network(&self) -> &'a Network<P> {
        self.net
    }

    pub fn evidence(&self) -> &'a Evidence {
        self.evidence
    }

    pub fn strategy(&self) -> &StrategySpec {
        &self.strategy
    }

    pub fn clamp(&self) -> &ClampResult {
        &self.clamp
    }

    pub fn flow(&self) -> &FlowMap {
        &self.flow
    }

    /// Free nodes in topological order.
    pub fn free_nodes(&self) -> &[NodeId] {
        &self.free
    }

    pub fn is_free(&self, n: NodeId) -> bool {
        self.roles[n.0] != Role::Fixed
    }

    /// True for nodes drawn straight from their CPD (flow-aware forward nodes).
    pub fn is_forward(&self, n: NodeId) -> bool {
        self.roles[n.0] == Role::Forward
    }

    /// Children whose factors enter this node's conditional.
    pub fn scoring_children(&self, n: NodeId) -> &[NodeId] {
        match &self.roles[n.0] {
            Role::Local { children } => children,
            _ => &[],
        }
    }

    fn require_free(&self, n: NodeId) -> Result<()> {
        self.net.check(n)?;
        if self.is_free(n) {
            Ok(())
        } else {
            Err(Error::NotFree(self.net.id(n).to_string()))
        }
    }

    pub fn initial_state(&self, seed: u64) -> Result<SamplerState> {
        initialize_state(self.net, self.evidence, &self.clamp, seed)
    }

    /// P(n = true | conditioning set) under this engine's conditioning rule.
    pub fn conditional_prob(&self, values: &[bool], n: NodeId) -> Result<P> {
        self.require_free(n)?;
        match &self.roles[n.0] {
            Role::Forward => Ok(self.net.prob_true(n, values)),
            Role::Local { children } => {
                let (w0, w1) = single_weights(self.net, values, n, children);
                normalize_pair(self.net, n, w0, w1)
            }
            Role::Fixed => unreachable!(),
        }
    }

    /// P(n = true | Markov blanket), ignoring flow classification.
    pub fn blanket_conditional_prob(&self, values: &[bool], n: NodeId) -> Result<P> {
        self.require_free(n)?;
        let (w0, w1) = single_weights(self.net, values, n, self.net.children(n));
        normalize_pair(self.net, n, w0, w1)
    }

    /// Transition distribution over Θ_m using this engine's children sets.
    pub fn transition_distribution(&self, values: &[bool], proposal: &MoveProposal) -> Result<Vec<P>> {
        if proposal.rule != MoveRule::Gibbs {
            return Err(Error::InvalidProposal("transition distribution is defined for the Gibbs rule".into()));
        }
        proposal.validate(values)?;
        for &d in &proposal.delta {
            self.require_free(d)?;
        }
        restricted_weights(self.net, proposal, |d| self.scoring_children(d).to_vec())
    }

    /// Resamples one free node and scores its conditional probability.
    pub fn single_site_move(&self, st: &mut SamplerState, n: NodeId, acc: &mut MarginalAccumulator) -> Result<()> {
        match &self.roles[n.0] {
            Role::Fixed => Err(Error::NotFree(self.net.id(n).to_string())),
            Role::Forward => {
                self.forward_move(st, n, acc);
                Ok(())
            }
            Role::Local { children } => {
                let (w0, w1) = single_weights(self.net, &st.values, n, children);
                st.work += 2 * (1 + children.len() as u64);
                let p1 = normalize_pair(self.net, n, w0, w1)?;
                acc.record(n, p1.as_f64());
                let cur = st.values[n.0];
                st.values[n.0] = match self.strategy.rule {
                    MoveRule::Gibbs => P::draw(&mut st.rng) < p1,
                    MoveRule::Metropolis => {
                        let (wc, wp) = if cur { (w1, w0) } else { (w0, w1) };
                        cur ^ metropolis_accept(wc, wp, &mut st.rng)?
                    }
                };
                Ok(())
            }
        }
    }

    pub(crate) fn forward_move(&self, st: &mut SamplerState, n: NodeId, acc: &mut MarginalAccumulator) {
        let p1 = self.net.prob_true(n, &st.values);
        st.work += 1;
        acc.record(n, p1.as_f64());
        st.values[n.0] = P::draw(&mut st.rng) < p1;
    }

    fn require_pair(&self, a: NodeId, b: NodeId) -> Result<()> {
        self.require_free(a)?;
        self.require_free(b)?;
        if a == b {
            return Err(Error::InvalidProposal("pair repeats a node".into()));
        }
        Ok(())
    }

    /// Weights of the four joint states of (a, b), indexed by `a | b << 1`.
    fn pair_weights(&self, st: &mut SamplerState, a: NodeId, b: NodeId, patterns: &[u8], out: &mut [P]) {
        let mut factor_nodes: Vec<NodeId> = Vec::with_capacity(8);
        factor_nodes.push(a);
        factor_nodes.push(b);
        for &d in &[a, b] {
            let children: &[NodeId] = match &self.roles[d.0] {
                Role::Local { children } => children,
                _ => self.net.children(d),
            };
            for &c in children {
                if !factor_nodes.contains(&c) {
                    factor_nodes.push(c);
                }
            }
        }
        let (va, vb) = (st.values[a.0], st.values[b.0]);
        for &bits in patterns {
            st.values[a.0] = bits & 1 == 1;
            st.values[b.0] = bits & 2 == 2;
            out[bits as usize] = factor_nodes.iter().fold(P::one(), |w, &k| w * self.net.factor(k, &st.values));
        }
        st.values[a.0] = va;
        st.values[b.0] = vb;
        st.work += (patterns.len() * factor_nodes.len()) as u64;
    }

    /// Jointly resamples two free nodes over all four of their states.
    pub fn block_pair_move(
        &self,
        st: &mut SamplerState,
        a: NodeId,
        b: NodeId,
        acc: &mut MarginalAccumulator,
    ) -> Result<()> {
        self.require_pair(a, b)?;
        let mut w = [P::zero(); 4];
        self.pair_weights(st, a, b, &[0, 1, 2, 3], &mut w);
        let total = w[0] + w[1] + w[2] + w[3];
        if !(total > P::zero()) {
            return Err(Error::DegenerateConditional(self.net.id(a).to_string()));
        }
        acc.record(a, ((w[1] + w[3]) / total).as_f64());
        acc.record(b, ((w[2] + w[3]) / total).as_f64());
        let cur = st.values[a.0] as usize | (st.values[b.0] as usize) << 1;
        let next = match self.strategy.rule {
            MoveRule::Gibbs => {
                let u = P::draw(&mut st.rng) * total;
                let mut acc_w = P::zero();
                let mut pick = 3;
                for (i, &wi) in w.iter().enumerate() {
                    acc_w = acc_w + wi;
                    if u < acc_w {
                        pick = i;
                        break;
                    }
                }
                // Guard against rounding at the top of the range.
                while w[pick] <= P::zero() {
                    pick -= 1;
                }
                pick
            }
            MoveRule::Metropolis => {
                let r = st.rng.gen_range(0..3usize);
                let prop = if r >= cur { r + 1 } else { r };
                if metropolis_accept(w[cur], w[prop], &mut st.rng)? {
                    prop
                } else {
                    cur
                }
            }
        };
        st.values[a.0] = next & 1 == 1;
        st.values[b.0] = next & 2 == 2;
        Ok(())
    }

    /// Proposes exchanging the values of two free nodes. Equal values make
    /// the move the identity; both nodes are still scored.
    pub fn swap_pair_move(
        &self,
        st: &mut SamplerState,
        a: NodeId,
        b: NodeId,
        acc: &mut MarginalAccumulator,
    ) -> Result<()> {
        self.require_pair(a, b)?;
        let (va, vb) = (st.values[a.0], st.values[b.0]);
        if va == vb {
            let v = if va { 1.0 } else { 0.0 };
            acc.record(a, v);
            acc.record(b, v);
            return Ok(());
        }
        let cur = va as u8 | (vb as u8) << 1;
        let swapped = vb as u8 | (va as u8) << 1;
        let mut w = [P::zero(); 4];
        self.pair_weights(st, a, b, &[cur, swapped], &mut w);
        let (wc, ws) = (w[cur as usize], w[swapped as usize]);
        let total = wc + ws;
        if !(total > P::zero()) {
            return Err(Error::DegenerateConditional(self.net.id(a).to_string()));
        }
        // a is true in exactly one of the two states.
        let p_a = if va { wc / total } else { ws / total };
        acc.record(a, p_a.as_f64());
        acc.record(b, (P::one() - p_a).as_f64());
        let take = match self.strategy.rule {
            MoveRule::Gibbs => P::draw(&mut st.rng) * total < ws,
            MoveRule::Metropolis => metropolis_accept(wc, ws, &mut st.rng)?,
        };
        if take {
            st.values[a.0] = vb;
            st.values[b.0] = va;
        }
        Ok(())
    }
}
