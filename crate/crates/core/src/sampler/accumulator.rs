use crate::network::NodeId;

/// Markov-blanket scoring: per node, the running sum of the probability of
/// being true at each move that could change it, and the number of such moves.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarginalAccumulator {
    sum: Vec<f64>,
    count: Vec<u64>,
}

impl MarginalAccumulator {
    pub fn new(node_count: usize) -> Self {
        Self { sum: vec![0.0; node_count], count: vec![0; node_count] }
    }

    #[inline]
    pub fn record(&mut self, n: NodeId, p_true: f64) {
        self.sum[n.0] += p_true;
        self.count[n.0] += 1;
    }

    pub fn sum(&self, n: NodeId) -> f64 {
        self.sum[n.0]
    }

    pub fn count(&self, n: NodeId) -> u64 {
        self.count[n.0]
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    /// Adds another chain's totals; merging is associative and commutative.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.len(), other.len(), "accumulators span different networks");
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
    }

    pub fn reset(&mut self) {
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.count.iter_mut().for_each(|c| *c = 0);
    }
}

/// sum / count per node; nodes never scored (clamped, observed) report 0.
pub fn estimate_marginals(acc: &MarginalAccumulator) -> Vec<f64> {
    acc.sum.iter().zip(&acc.count).map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64).clamp(0.0, 1.0) }).collect()
}
