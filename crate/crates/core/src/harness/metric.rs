use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeId, NodeKind};
use crate::scalar::Prob;
use std::collections::BTreeMap;

pub const DEFAULT_EPSILON_FLOOR: f64 = 0.01;

/// Half-width of the accuracy band around a true marginal: a fifth of its
/// standard deviation, but never narrower than `floor`.
pub fn accuracy_bound(truth: f64, floor: f64) -> f64 {
    ((truth * (1.0 - truth)).max(0.0).sqrt() / 5.0).max(floor)
}

/// Number of nodes whose estimate falls outside the accuracy band. The band
/// is inclusive.
pub fn error_count<K: Ord + ToString>(
    estimates: &BTreeMap<K, f64>,
    truths: &BTreeMap<K, f64>,
    epsilon_floor: f64,
) -> Result<usize> {
    if estimates.len() != truths.len() || estimates.keys().zip(truths.keys()).any(|(a, b)| a != b) {
        let missing = truths
            .keys()
            .find(|k| !estimates.contains_key(k))
            .or_else(|| estimates.keys().find(|k| !truths.contains_key(k)))
            .map(|k| k.to_string())
            .unwrap_or_default();
        return Err(Error::NodeMismatch(missing));
    }
    if !(epsilon_floor >= 0.0) {
        return Err(Error::Config(format!("epsilon floor {epsilon_floor} is negative")));
    }
    Ok(truths.iter().filter(|(n, &t)| (estimates[n] - t).abs() > accuracy_bound(t, epsilon_floor)).count())
}

/// Unobserved model nodes: the nodes scored by the error count.
pub fn scored_nodes<P: Prob>(net: &Network<P>, ev: &Evidence) -> Vec<NodeId> {
    net.node_ids().filter(|&n| net.kind(n) == NodeKind::Model && !ev.is_observed(n)).collect()
}

/// `error_count` over the unobserved model nodes of dense per-node vectors.
pub fn model_error_count<P: Prob>(
    net: &Network<P>,
    ev: &Evidence,
    estimates: &[f64],
    truths: &[f64],
    epsilon_floor: f64,
) -> Result<usize> {
    let nodes = scored_nodes(net, ev);
    let pick = |v: &[f64]| nodes.iter().map(|&n| (net.id(n), v[n.0])).collect::<BTreeMap<_, _>>();
    error_count(&pick(estimates), &pick(truths), epsilon_floor)
}
