//! Spouse pairing and sweep schedules.
//!
//! Which spouses may pair is decided once per engine. Each sweep draws a
//! fresh random matching from those candidates. Policies that depend on a
//! shared child being true carry that child set as a gate which is checked
//! when the pair is executed, so each step of the sweep is a valid kernel
//! regardless of what earlier steps changed.

use super::accumulator::{estimate_marginals, MarginalAccumulator};
use super::engine::{Engine, Role, SamplerState};
use super::strategy::{CoverMode, Eligibility, PairStyle, StrategySpec, VisitOrder};
use crate::error::Result;
use crate::evidence::Evidence;
use crate::network::{Network, NodeId};
use crate::scalar::Prob;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Spouse {
    pub other: NodeId,
    /// Shared children that must include a currently true node; empty means
    /// the pair is always eligible.
    pub gate: Vec<NodeId>,
    /// Shares a child that is fixed true.
    pub preferred: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct PairCandidates {
    pub style: Option<PairStyle>,
    pub spouses: Vec<Vec<Spouse>>,
}

impl PairCandidates {
    pub(crate) fn build<P: Prob>(engine: &Engine<'_, P>) -> Self {
        let net = engine.net;
        let Some((style, eligibility)) = engine.strategy.pairing() else {
            return Self { style: None, spouses: vec![Vec::new(); net.len()] };
        };
        let ev = engine.evidence;
        let fixed_true = |c: NodeId| ev.get(c) == Some(true);
        let fixed_false = |c: NodeId| ev.get(c) == Some(false) || engine.clamp.is_clamped(c);
        let cover = match eligibility {
            Eligibility::Cover(CoverMode::Ancestral) => {
                let mut mask = net.ancestor_mask(ev.true_nodes());
                for (n, v) in ev.observed() {
                    if !v {
                        mask[n.0] = false;
                    }
                }
                mask
            }
            Eligibility::Cover(CoverMode::EvidenceChild) => net.node_ids().map(fixed_true).collect(),
            Eligibility::ChildTrue => Vec::new(),
        };
        let local = |n: NodeId| matches!(engine.roles[n.0], Role::Local { .. });

        let mut spouses = vec![Vec::new(); net.len()];
        for &a in &engine.free {
            if !local(a) {
                continue;
            }
            let mut found: Vec<Spouse> = Vec::new();
            for &c in engine.scoring_children(a) {
                for &(b, _) in net.parents(c) {
                    if b == a || !local(b) || !engine.scoring_children(b).contains(&c) {
                        continue;
                    }
                    let (eligible, gated) = match eligibility {
                        Eligibility::Cover(_) => (cover[c.0], false),
                        Eligibility::ChildTrue => (!fixed_false(c), !fixed_true(c)),
                    };
                    if !eligible {
                        continue;
                    }
                    let entry = match found.iter_mut().position(|s| s.other == b) {
                        Some(i) => &mut found[i],
                        None => {
                            found.push(Spouse { other: b, gate: Vec::new(), preferred: false });
                            found.last_mut().expect("just pushed")
                        }
                    };
                    if gated {
                        entry.gate.push(c);
                    } else {
                        entry.preferred = true;
                    }
                }
            }
            // A fixed-true shared child makes the gate always pass.
            for s in &mut found {
                if s.preferred {
                    s.gate.clear();
                }
            }
            found.sort_by_key(|s| s.other);
            spouses[a.0] = found;
        }
        Self { style: Some(style), spouses }
    }

    /// Random greedy matching over the candidate graph. Nodes are visited in
    /// shuffled order; each takes the first unpaired spouse in that order,
    /// favouring spouses that share a fixed-true child.
    pub(crate) fn matching<R: Rng + ?Sized>(&self, free: &[NodeId], rng: &mut R) -> Vec<(NodeId, NodeId, Vec<NodeId>)> {
        if self.style.is_none() {
            return Vec::new();
        }
        let mut order: Vec<NodeId> = free.iter().copied().filter(|n| !self.spouses[n.0].is_empty()).collect();
        order.shuffle(rng);
        let mut rank = vec![usize::MAX; self.spouses.len()];
        for (i, n) in order.iter().enumerate() {
            rank[n.0] = i;
        }
        let mut paired = vec![false; self.spouses.len()];
        let mut pairs = Vec::new();
        for &a in &order {
            if paired[a.0] {
                continue;
            }
            let best =
                self.spouses[a.0].iter().filter(|s| !paired[s.other.0]).min_by_key(|s| (!s.preferred, rank[s.other.0]));
            if let Some(s) = best {
                paired[a.0] = true;
                paired[s.other.0] = true;
                pairs.push((a, s.other, s.gate.clone()));
            }
        }
        pairs
    }
}

/// Result of pairing the free nodes for one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    pub pairs: Vec<(NodeId, NodeId)>,
    pub singles: Vec<NodeId>,
}

/// Draws a random matching and keeps the pairs that are eligible in the given
/// state; every other free node is returned as a single.
pub fn pair_nodes<P: Prob, R: Rng + ?Sized>(engine: &Engine<'_, P>, values: &[bool], rng: &mut R) -> Pairing {
    let mut in_pair = vec![false; values.len()];
    let mut pairs = Vec::new();
    for (a, b, gate) in engine.pairing.matching(&engine.free, rng) {
        if gate.is_empty() || gate.iter().any(|c| values[c.0]) {
            in_pair[a.0] = true;
            in_pair[b.0] = true;
            pairs.push((a, b));
        }
    }
    let singles = engine.free.iter().copied().filter(|n| !in_pair[n.0]).collect();
    Pairing { pairs, singles }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairKind {
    Block,
    /// Swap-moved with this probability, otherwise both members single-site moved.
    Swap {
        fraction: f64,
    },
}

/// One step of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum MoveUnit {
    Single(NodeId),
    /// Drawn directly from its CPD.
    Forward(NodeId),
    /// A pair move, replaced by two single-site moves whenever no gate child
    /// is currently true.
    Pair {
        a: NodeId,
        b: NodeId,
        kind: PairKind,
        gate: Vec<NodeId>,
    },
}

impl MoveUnit {
    pub fn nodes(&self) -> Vec<NodeId> {
        match self {
            MoveUnit::Single(n) | MoveUnit::Forward(n) => vec![*n],
            MoveUnit::Pair { a, b, .. } => vec![*a, *b],
        }
    }
}

impl<'a, P: Prob> Engine<'a, P> {
    /// Every pair that may be drawn, once each with the smaller id first,
    /// and its gate.
    pub fn pair_candidates(&self) -> Vec<(NodeId, NodeId, Vec<NodeId>)> {
        let mut out = Vec::new();
        for (i, list) in self.pairing.spouses.iter().enumerate() {
            for s in list.iter().filter(|s| s.other.0 > i) {
                out.push((NodeId(i), s.other, s.gate.clone()));
            }
        }
        out
    }

    /// Kind of the pair moves of this strategy, if it pairs at all.
    pub fn pair_kind(&self) -> Option<PairKind> {
        match self.pairing.style? {
            PairStyle::Block => Some(PairKind::Block),
            PairStyle::Swap => Some(PairKind::Swap { fraction: self.strategy.swap_fraction }),
        }
    }

    /// The move units of one sweep. `sweep_index` selects the pass of the
    /// forward-backward schedule (even: forward, odd: backward).
    pub fn plan_sweep<R: Rng + ?Sized>(&self, sweep_index: u64, rng: &mut R) -> Vec<MoveUnit> {
        let kind = match self.pairing.style {
            Some(PairStyle::Swap) => PairKind::Swap { fraction: self.strategy.swap_fraction },
            _ => PairKind::Block,
        };
        let mut partner: Vec<Option<(NodeId, Vec<NodeId>)>> = vec![None; self.net.len()];
        let mut pair_units = Vec::new();
        for (a, b, gate) in self.pairing.matching(&self.free, rng) {
            partner[a.0] = Some((b, gate.clone()));
            partner[b.0] = Some((a, gate.clone()));
            pair_units.push(MoveUnit::Pair { a, b, kind: kind.clone(), gate });
        }
        let unit_for = |n: NodeId| match self.roles[n.0] {
            Role::Forward => MoveUnit::Forward(n),
            _ => MoveUnit::Single(n),
        };

        match self.strategy.order() {
            VisitOrder::Random => {
                let mut local: Vec<MoveUnit> = pair_units;
                local.extend(
                    self.free
                        .iter()
                        .filter(|n| partner[n.0].is_none() && !self.is_forward(**n))
                        .map(|&n| MoveUnit::Single(n)),
                );
                local.shuffle(rng);
                // Forward nodes come last, parents before children.
                local.extend(self.free.iter().filter(|n| self.is_forward(**n)).map(|&n| MoveUnit::Forward(n)));
                local
            }
            VisitOrder::ForwardBackward => {
                let forward_pass = sweep_index.is_multiple_of(2);
                let walk: Vec<NodeId> = if forward_pass {
                    self.free.clone()
                } else {
                    self.free.iter().rev().copied().filter(|n| !self.is_forward(*n)).collect()
                };
                let mut done = vec![false; self.net.len()];
                let mut units = Vec::with_capacity(walk.len());
                for n in walk {
                    if done[n.0] {
                        continue;
                    }
                    done[n.0] = true;
                    match &partner[n.0] {
                        Some((b, gate)) => {
                            done[b.0] = true;
                            units.push(MoveUnit::Pair { a: n, b: *b, kind: kind.clone(), gate: gate.clone() });
                        }
                        None => units.push(unit_for(n)),
                    }
                }
                units
            }
        }
    }

    pub fn execute_unit(&self, st: &mut SamplerState, unit: &MoveUnit, acc: &mut MarginalAccumulator) -> Result<()> {
        match unit {
            MoveUnit::Single(n) => self.single_site_move(st, *n, acc),
            MoveUnit::Forward(n) => {
                self.forward_move(st, *n, acc);
                Ok(())
            }
            MoveUnit::Pair { a, b, kind, gate } => {
                let open = gate.is_empty() || gate.iter().any(|c| st.values[c.0]);
                let paired = open
                    && match kind {
                        PairKind::Block => true,
                        PairKind::Swap { fraction } => st.rng.gen::<f64>() < *fraction,
                    };
                if !paired {
                    self.single_site_move(st, *a, acc)?;
                    return self.single_site_move(st, *b, acc);
                }
                match kind {
                    PairKind::Block => self.block_pair_move(st, *a, *b, acc),
                    PairKind::Swap { .. } => self.swap_pair_move(st, *a, *b, acc),
                }
            }
        }
    }

    /// One sweep: every free node gets at least one chance to change.
    pub fn run_sweep(&self, st: &mut SamplerState, acc: &mut MarginalAccumulator) -> Result<()> {
        let plan = self.plan_sweep(st.sweep_count, &mut st.rng);
        for unit in &plan {
            self.execute_unit(st, unit, acc)?;
        }
        st.sweep_count += 1;
        Ok(())
    }
}

/// A single chain: engine, state and accumulator.
#[derive(Clone, Debug)]
pub struct Sampler<'a, P: Prob> {
    engine: Engine<'a, P>,
    state: SamplerState,
    acc: MarginalAccumulator,
}

impl<'a, P: Prob> Sampler<'a, P> {
    pub fn new(net: &'a Network<P>, evidence: &'a Evidence, strategy: StrategySpec, seed: u64) -> Result<Self> {
        let engine = Engine::new(net, evidence, strategy)?;
        Self::from_engine(engine, seed)
    }

    pub fn from_engine(engine: Engine<'a, P>, seed: u64) -> Result<Self> {
        let state = engine.initial_state(seed)?;
        let acc = MarginalAccumulator::new(engine.net.len());
        Ok(Self { engine, state, acc })
    }

    pub fn engine(&self) -> &Engine<'a, P> {
        &self.engine
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn accumulator(&self) -> &MarginalAccumulator {
        &self.acc
    }

    /// Sweeps without scoring.
    pub fn burn_in(&mut self, sweeps: u64) -> Result<()> {
        let mut scratch = MarginalAccumulator::new(self.engine.net.len());
        for _ in 0..sweeps {
            self.engine.run_sweep(&mut self.state, &mut scratch)?;
        }
        Ok(())
    }

    pub fn run(&mut self, sweeps: u64) -> Result<()> {
        for _ in 0..sweeps {
            self.engine.run_sweep(&mut self.state, &mut self.acc)?;
        }
        Ok(())
    }

    /// Current marginals. Observed nodes report their observed value and
    /// clamped nodes report 0.
    pub fn estimates(&self) -> Vec<f64> {
        estimates_with_evidence(&self.acc, self.engine.evidence)
    }
}

pub fn estimates_with_evidence(acc: &MarginalAccumulator, ev: &Evidence) -> Vec<f64> {
    let mut est = estimate_marginals(acc);
    for (n, v) in ev.observed() {
        est[n.0] = if v { 1.0 } else { 0.0 };
    }
    est
}
