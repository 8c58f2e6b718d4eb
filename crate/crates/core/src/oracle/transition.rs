//! Explicit transition matrices over the free-node state space, built from
//! full joint probabilities rather than from the sampler's factor code.

use crate::error::{Error, Result};
use crate::network::NodeId;
use crate::sampler::{Engine, MoveRule, MoveUnit, PairKind};
use crate::scalar::Prob;
use rand::Rng;

pub const TRANSITION_CAP: usize = 12;

/// Row-stochastic matrix over the 2^k assignments of the free nodes. State
/// index bit i holds the value of `free[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub free: Vec<NodeId>,
    pub probabilities: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn identity(free: Vec<NodeId>) -> Self {
        let size = 1 << free.len();
        let probabilities = (0..size).map(|i| (0..size).map(|j| (i == j) as u8 as f64).collect()).collect();
        Self { free, probabilities }
    }

    pub fn size(&self) -> usize {
        self.probabilities.len()
    }

    /// Complete assignments for every state index, observed and clamped
    /// nodes held at their fixed values.
    pub fn states<P: Prob>(&self, space: &StateSpace<'_, '_, P>) -> Vec<Vec<bool>> {
        (0..self.size()).map(|i| space.assignment(i)).collect()
    }

    pub fn max_row_error(&self) -> f64 {
        self.probabilities.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |π_i T_ij − π_j T_ji|
    pub fn detailed_balance_error(&self, pi: &[f64]) -> f64 {
        let t = &self.probabilities;
        let mut worst: f64 = 0.0;
        for i in 0..self.size() {
            for j in (i + 1)..self.size() {
                worst = worst.max((pi[i] * t[i][j] - pi[j] * t[j][i]).abs());
            }
        }
        worst
    }

    /// max |(πT)_j − π_j|
    pub fn stationarity_error(&self, pi: &[f64]) -> f64 {
        (0..self.size())
            .map(|j| {
                let flow: f64 = (0..self.size()).map(|i| pi[i] * self.probabilities[i][j]).sum();
                (flow - pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// self · other: first this chain, then the other.
    pub fn then(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let n = self.size();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in self.probabilities.iter().enumerate() {
            for (k, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    for (j, &b) in other.probabilities[k].iter().enumerate() {
                        out[i][j] += a * b;
                    }
                }
            }
        }
        TransitionMatrix { free: self.free.clone(), probabilities: out }
    }

    fn then_sparse(&self, kernel: &[Vec<(usize, f64)>]) -> TransitionMatrix {
        let n = self.size();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in self.probabilities.iter().enumerate() {
            for (k, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    for &(j, b) in &kernel[k] {
                        out[i][j] += a * b;
                    }
                }
            }
        }
        TransitionMatrix { free: self.free.clone(), probabilities: out }
    }

    fn from_sparse(free: Vec<NodeId>, kernel: &[Vec<(usize, f64)>]) -> Self {
        let n = kernel.len();
        let probabilities = kernel
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(j, p) in row {
                    dense[j] += p;
                }
                dense
            })
            .collect();
        Self { free, probabilities }
    }

    /// The chain seen through the states with all bits in `hidden` cleared.
    /// Valid when rows do not depend on the hidden bits.
    pub fn lumped(&self, hidden: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
        let reps: Vec<usize> = (0..self.size()).filter(|i| i & hidden == 0).collect();
        let pos = |j: usize| reps.binary_search(&(j & !hidden)).expect("representative exists");
        let rows = reps
            .iter()
            .map(|&r| {
                let mut row = vec![0.0; reps.len()];
                for (j, &p) in self.probabilities[r].iter().enumerate() {
                    row[pos(j)] += p;
                }
                row
            })
            .collect();
        (reps, rows)
    }
}

/// The free-node state space of an engine with its target distribution.
pub struct StateSpace<'e, 'a, P: Prob> {
    engine: &'e Engine<'a, P>,
    pub free: Vec<NodeId>,
    base: Vec<bool>,
    bit: Vec<Option<usize>>,
    /// Posterior over free states, clamped nodes held false.
    pub posterior: Vec<f64>,
    /// Mask of forward-sampled nodes, summed out of the local-move target.
    pub barren: usize,
    /// Posterior of the non-barren part, indexed by state with barren bits cleared.
    lumped: Vec<f64>,
}

impl<'e, 'a, P: Prob> StateSpace<'e, 'a, P> {
    pub fn new(engine: &'e Engine<'a, P>) -> Result<Self> {
        let net = engine.network();
        let free = engine.free_nodes().to_vec();
        if free.len() > TRANSITION_CAP {
            return Err(Error::CapExceeded { count: free.len(), cap: TRANSITION_CAP });
        }
        let ev = engine.evidence();
        let base: Vec<bool> = net.node_ids().map(|n| ev.get(n).unwrap_or(false)).collect();
        let mut bit = vec![None; net.len()];
        for (i, n) in free.iter().enumerate() {
            bit[n.0] = Some(i);
        }
        let barren = free.iter().enumerate().filter(|(_, n)| engine.is_forward(**n)).fold(0, |m, (i, _)| m | 1 << i);
        let mut space = Self { engine, free, base, bit, posterior: Vec::new(), barren, lumped: Vec::new() };
        let logs: Vec<f64> = (0..1usize << space.free.len())
            .map(|i| net.joint_log_prob(&space.assignment(i)).map(|l| l.as_f64()))
            .collect::<Result<_>>()?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::InconsistentEvidence);
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        space.posterior = w.iter().map(|x| x / z).collect();
        let mut lumped = vec![0.0; space.posterior.len()];
        for (i, p) in space.posterior.iter().enumerate() {
            lumped[i & !barren] += p;
        }
        space.lumped = lumped;
        Ok(space)
    }

    pub fn size(&self) -> usize {
        self.posterior.len()
    }

    pub fn assignment(&self, index: usize) -> Vec<bool> {
        let mut v = self.base.clone();
        for (i, n) in self.free.iter().enumerate() {
            v[n.0] = index >> i & 1 == 1;
        }
        v
    }

    fn bit_of(&self, n: NodeId) -> usize {
        1 << self.bit[n.0].expect("node is free")
    }

    /// Target weight for local moves: the full posterior, or its non-barren
    /// marginal when conditioning follows the evidence flow.
    fn weight(&self, index: usize) -> f64 {
        if self.barren == 0 {
            self.posterior[index]
        } else {
            self.lumped[index & !self.barren]
        }
    }

    fn value(&self, index: usize, n: NodeId) -> bool {
        match self.bit[n.0] {
            Some(b) => index >> b & 1 == 1,
            None => self.base[n.0],
        }
    }

    fn rule(&self) -> MoveRule {
        self.engine.strategy().rule
    }

    fn single_row(&self, i: usize, n: NodeId) -> Vec<(usize, f64)> {
        let m = self.bit_of(n);
        let (off, on) = (i & !m, i | m);
        if self.engine.is_forward(n) {
            let p = self.engine.network().prob_true(n, &self.assignment(i)).as_f64();
            return vec![(off, 1.0 - p), (on, p)];
        }
        let (w_off, w_on) = (self.weight(off), self.weight(on));
        match self.rule() {
            MoveRule::Gibbs => {
                let p = w_on / (w_off + w_on);
                vec![(off, 1.0 - p), (on, p)]
            }
            MoveRule::Metropolis => {
                let flip = i ^ m;
                let a = (self.weight(flip) / self.weight(i)).min(1.0);
                vec![(flip, a), (i, 1.0 - a)]
            }
        }
    }

    fn block_row(&self, i: usize, a: NodeId, b: NodeId) -> Vec<(usize, f64)> {
        let mask = self.bit_of(a) | self.bit_of(b);
        let states: Vec<usize> = [0, self.bit_of(a), self.bit_of(b), mask].iter().map(|s| (i & !mask) | s).collect();
        match self.rule() {
            MoveRule::Gibbs => {
                let z: f64 = states.iter().map(|&s| self.weight(s)).sum();
                states.iter().map(|&s| (s, self.weight(s) / z)).collect()
            }
            MoveRule::Metropolis => {
                let mut row: Vec<(usize, f64)> = states
                    .iter()
                    .filter(|&&s| s != i)
                    .map(|&s| (s, (self.weight(s) / self.weight(i)).min(1.0) / 3.0))
                    .collect();
                let stay = 1.0 - row.iter().map(|x| x.1).sum::<f64>();
                row.push((i, stay));
                row
            }
        }
    }

    fn swap_row(&self, i: usize, a: NodeId, b: NodeId) -> Vec<(usize, f64)> {
        if self.value(i, a) == self.value(i, b) {
            return vec![(i, 1.0)];
        }
        let j = i ^ self.bit_of(a) ^ self.bit_of(b);
        let (wi, wj) = (self.weight(i), self.weight(j));
        let p = match self.rule() {
            MoveRule::Gibbs => wj / (wi + wj),
            MoveRule::Metropolis => (wj / wi).min(1.0),
        };
        vec![(j, p), (i, 1.0 - p)]
    }

    fn then_row(&self, row: Vec<(usize, f64)>, step: impl Fn(usize) -> Vec<(usize, f64)>) -> Vec<(usize, f64)> {
        row.into_iter().flat_map(|(k, p)| step(k).into_iter().map(move |(j, q)| (j, p * q))).collect()
    }

    fn gate_open(&self, i: usize, gate: &[NodeId]) -> bool {
        gate.is_empty() || gate.iter().any(|&c| self.value(i, c))
    }

    fn unit_row(&self, i: usize, unit: &MoveUnit) -> Vec<(usize, f64)> {
        match unit {
            MoveUnit::Single(n) | MoveUnit::Forward(n) => self.single_row(i, *n),
            MoveUnit::Pair { a, b, kind, gate } => {
                let singles = self.then_row(self.single_row(i, *a), |k| self.single_row(k, *b));
                if !self.gate_open(i, gate) {
                    return singles;
                }
                match kind {
                    PairKind::Block => self.block_row(i, *a, *b),
                    PairKind::Swap { fraction } => {
                        let mut row: Vec<(usize, f64)> =
                            self.swap_row(i, *a, *b).into_iter().map(|(j, p)| (j, p * fraction)).collect();
                        row.extend(singles.into_iter().map(|(j, p)| (j, p * (1.0 - fraction))));
                        row
                    }
                }
            }
        }
    }

    fn kernel(&self, row: impl Fn(usize) -> Vec<(usize, f64)>) -> Vec<Vec<(usize, f64)>> {
        (0..self.size()).map(row).collect()
    }

    /// Kernel of a whole move unit, including the single-site fallback of pairs.
    pub fn unit_matrix(&self, unit: &MoveUnit) -> TransitionMatrix {
        TransitionMatrix::from_sparse(self.free.clone(), &self.kernel(|i| self.unit_row(i, unit)))
    }

    /// Elementary single-site kernel.
    pub fn single_matrix(&self, n: NodeId) -> TransitionMatrix {
        TransitionMatrix::from_sparse(self.free.clone(), &self.kernel(|i| self.single_row(i, n)))
    }

    /// Elementary pair kernel: the pair move where the gate is open, the
    /// identity elsewhere.
    pub fn pair_matrix(&self, a: NodeId, b: NodeId, kind: &PairKind, gate: &[NodeId]) -> TransitionMatrix {
        let k = self.kernel(|i| {
            if !self.gate_open(i, gate) {
                return vec![(i, 1.0)];
            }
            match kind {
                PairKind::Block => self.block_row(i, a, b),
                PairKind::Swap { .. } => self.swap_row(i, a, b),
            }
        });
        TransitionMatrix::from_sparse(self.free.clone(), &k)
    }

    /// All forward-sampled nodes drawn in topological order, as one kernel.
    pub fn forward_block_matrix(&self) -> TransitionMatrix {
        let mut m = TransitionMatrix::identity(self.free.clone());
        for &n in self.free.iter().filter(|n| self.engine.is_forward(**n)) {
            m = m.then_sparse(&self.kernel(|i| self.single_row(i, n)));
        }
        m
    }

    /// Composition of a planned sweep.
    pub fn plan_matrix(&self, plan: &[MoveUnit]) -> TransitionMatrix {
        let mut m = TransitionMatrix::identity(self.free.clone());
        for unit in plan {
            m = m.then_sparse(&self.kernel(|i| self.unit_row(i, unit)));
        }
        m
    }

    /// Random-scan single-site chain: a uniform mixture over the free nodes.
    pub fn mixture_matrix(&self) -> TransitionMatrix {
        if self.free.is_empty() {
            return TransitionMatrix::identity(Vec::new());
        }
        let k = self.free.len().max(1) as f64;
        let kernel = self.kernel(|i| {
            self.free.iter().flat_map(|&n| self.single_row(i, n).into_iter().map(move |(j, p)| (j, p / k))).collect()
        });
        TransitionMatrix::from_sparse(self.free.clone(), &kernel)
    }

    /// Non-barren posterior, indexed like the representatives of `lumped`.
    pub fn lumped_posterior(&self) -> Vec<f64> {
        (0..self.size()).filter(|i| i & self.barren == 0).map(|i| self.lumped[i]).collect()
    }
}

/// Composed matrix of one planned sweep. For the forward-backward schedule,
/// a backward pass followed by a forward pass.
pub fn explicit_transition_matrix<P: Prob, R: Rng + ?Sized>(
    engine: &Engine<'_, P>,
    rng: &mut R,
) -> Result<TransitionMatrix> {
    let space = StateSpace::new(engine)?;
    let mut m = space.plan_matrix(&engine.plan_sweep(1, rng));
    if engine.strategy().order() == crate::sampler::VisitOrder::ForwardBackward {
        m = m.then(&space.plan_matrix(&engine.plan_sweep(0, rng)));
    }
    Ok(m)
}

/// Max detailed-balance error of a lumped chain against its lumped target.
pub fn lumped_balance_error(rows: &[Vec<f64>], pi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            worst = worst.max((pi[i] * rows[i][j] - pi[j] * rows[j][i]).abs());
        }
    }
    worst
}
