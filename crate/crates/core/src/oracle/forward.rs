use crate::network::Network;
use crate::scalar::Prob;
use rand::Rng;

/// Prior marginals by ancestral sampling.
pub fn prior_marginals_forward<P: Prob, R: Rng + ?Sized>(net: &Network<P>, n_samples: usize, rng: &mut R) -> Vec<f64> {
    let mut on = vec![0u64; net.len()];
    let mut values = vec![false; net.len()];
    for _ in 0..n_samples {
        for &n in net.topo_order() {
            values[n.0] = P::draw(rng) < net.prob_true(n, &values);
            on[n.0] += values[n.0] as u64;
        }
    }
    on.into_iter().map(|c| c as f64 / n_samples.max(1) as f64).collect()
}

/// One ancestral draw of every node.
pub fn forward_sample<P: Prob, R: Rng + ?Sized>(net: &Network<P>, rng: &mut R) -> Vec<bool> {
    let mut values = vec![false; net.len()];
    for &n in net.topo_order() {
        values[n.0] = P::draw(rng) < net.prob_true(n, &values);
    }
    values
}
