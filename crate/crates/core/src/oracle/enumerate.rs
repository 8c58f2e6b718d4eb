use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeId, ValidationProfile};
use crate::scalar::Prob;

pub const DEFAULT_EXACT_CAP: usize = 22;

/// Exact marginals P(n = true | evidence) by enumerating every assignment of
/// the unobserved nodes. Observed nodes report their observed value.
pub fn exact_posteriors<P: Prob>(net: &Network<P>, ev: &Evidence) -> Result<Vec<f64>> {
    exact_posteriors_capped(net, ev, DEFAULT_EXACT_CAP)
}

pub fn exact_posteriors_capped<P: Prob>(net: &Network<P>, ev: &Evidence, cap: usize) -> Result<Vec<f64>> {
    ev.check_against(net)?;
    let free: Vec<NodeId> = net.node_ids().filter(|&n| !ev.is_observed(n)).collect();
    if free.len() > cap {
        return Err(Error::CapExceeded { count: free.len(), cap });
    }
    let mut values: Vec<bool> = net.node_ids().map(|n| ev.get(n).unwrap_or(false)).collect();
    let mut log_factor: Vec<f64> = net.node_ids().map(|k| ln(net.factor(k, &values))).collect();

    // Streaming log-sum-exp: all sums are kept relative to `scale`.
    let mut scale = f64::NEG_INFINITY;
    let mut total = 0.0;
    let mut on = vec![0.0; net.len()];
    let count = 1u64 << free.len();
    for step in 0..count {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            let x = free[bit];
            values[x.0] = !values[x.0];
            log_factor[x.0] = ln(net.factor(x, &values));
            for &c in net.children(x) {
                log_factor[c.0] = ln(net.factor(c, &values));
            }
        }
        let lw: f64 = log_factor.iter().sum();
        if lw == f64::NEG_INFINITY {
            continue;
        }
        if lw > scale {
            let r = (scale - lw).exp();
            total *= r;
            on.iter_mut().for_each(|s| *s *= r);
            scale = lw;
        }
        let w = (lw - scale).exp();
        total += w;
        for &x in &free {
            if values[x.0] {
                on[x.0] += w;
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::InconsistentEvidence);
    }
    Ok(net
        .node_ids()
        .map(|n| match ev.get(n) {
            Some(v) => v as u8 as f64,
            None => on[n.0] / total,
        })
        .collect())
}

fn ln<P: Prob>(p: P) -> f64 {
    p.as_f64().ln()
}

/// Exact marginals for two-layer networks: every node with parents has only
/// parentless parents and no children. Unobserved sinks are summed out
/// analytically, so the cost grows with the number of true observations
/// (inclusion-exclusion over them) rather than with the number of free nodes.
pub fn exact_posteriors_bipartite<P: Prob>(net: &Network<P>, ev: &Evidence, positive_cap: usize) -> Result<Vec<f64>> {
    ev.check_against(net)?;
    if !is_bipartite(net) {
        return Err(Error::Validation("network is not two-layer".into()));
    }
    let is_root = |n: NodeId| net.parents(n).is_empty();
    let positives: Vec<NodeId> = ev.observed().filter(|&(n, v)| v && !is_root(n)).map(|x| x.0).collect();
    let negatives: Vec<NodeId> = ev.observed().filter(|&(n, v)| !v && !is_root(n)).map(|x| x.0).collect();
    if positives.len() > positive_cap {
        return Err(Error::CapExceeded { count: positives.len(), cap: positive_cap });
    }
    let roots: Vec<NodeId> = net.node_ids().filter(|&n| is_root(n)).collect();
    let (total, on) = bipartite_sums(net, ev, &roots, &positives, &negatives);
    if !(total > 0.0) {
        return Err(Error::InconsistentEvidence);
    }
    let mut forced = negatives.clone();
    Ok(net
        .node_ids()
        .map(|n| match ev.get(n) {
            Some(v) => v as u8 as f64,
            None if is_root(n) => (on[n.0] / total).clamp(0.0, 1.0),
            None => {
                forced.push(n);
                let (off, _) = bipartite_sums(net, ev, &roots, &positives, &forced);
                forced.pop();
                (1.0 - off / total).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Unnormalized P(evidence, `negatives` false) and, per unobserved root, the
/// same joint with that root true. Constant factors of observed roots are
/// dropped since they cancel.
fn bipartite_sums<P: Prob>(
    net: &Network<P>,
    ev: &Evidence,
    roots: &[NodeId],
    positives: &[NodeId],
    negatives: &[NodeId],
) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut on = vec![0.0; net.len()];
    let mut forced: Vec<NodeId> = Vec::with_capacity(positives.len() + negatives.len());
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(roots.len());
    for subset in 0..(1u64 << positives.len()) {
        forced.clear();
        forced.extend_from_slice(negatives);
        forced.extend(positives.iter().enumerate().filter(|(i, _)| subset >> i & 1 == 1).map(|(_, &f)| f));
        let sign = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let base = sign * forced.iter().map(|&f| 1.0 - net.leak(f).as_f64()).product::<f64>();
        // (weight with the root false, weight with it true) of all forced
        // leaves staying false.
        terms.clear();
        terms.extend(roots.iter().map(|&r| {
            let keep: f64 = forced.iter().filter_map(|&f| net.link(r, f)).map(|p| 1.0 - p.as_f64()).product();
            let prior = net.leak(r).as_f64();
            match ev.get(r) {
                Some(true) => (0.0, keep),
                Some(false) => (1.0, 0.0),
                None => (1.0 - prior, prior * keep),
            }
        }));
        let prod: f64 = terms.iter().map(|(f, t)| f + t).product();
        total += base * prod;
        for (i, &r) in roots.iter().enumerate() {
            if ev.get(r).is_none() {
                let others: f64 = terms.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, (f, t))| f + t).product();
                on[r.0] += base * terms[i].1 * others;
            }
        }
    }
    (total, on)
}

pub fn is_bipartite<P: Prob>(net: &Network<P>) -> bool {
    net.node_ids().all(|n| {
        let ps = net.parents(n);
        ps.is_empty() || (net.children(n).is_empty() && ps.iter().all(|&(p, _)| net.parents(p).is_empty()))
    })
}

/// Which exact method answered a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactMethod {
    Enumeration,
    Bipartite,
}

impl ExactMethod {
    pub fn name(self) -> &'static str {
        match self {
            ExactMethod::Enumeration => "enumeration",
            ExactMethod::Bipartite => "bipartite",
        }
    }
}

/// Enumeration when the free-node count is within `cap`, otherwise the
/// two-layer method when the network allows it.
pub fn exact_marginals_auto<P: Prob>(net: &Network<P>, ev: &Evidence, cap: usize) -> Result<(Vec<f64>, ExactMethod)> {
    net.ensure_valid(ValidationProfile::Permissive)?;
    let free = net.len() - ev.count();
    if free <= cap {
        return Ok((exact_posteriors_capped(net, ev, cap)?, ExactMethod::Enumeration));
    }
    if is_bipartite(net) {
        return Ok((exact_posteriors_bipartite(net, ev, cap)?, ExactMethod::Bipartite));
    }
    Err(Error::CapExceeded { count: free, cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{vase, NodeKind};

    #[test]
    fn vase_posteriors() {
        let net: Network = vase();
        let ev = Evidence::from_ids(&net, [("v", true)]).unwrap();
        let m = exact_posteriors(&net, &ev).unwrap();
        // Hand enumeration of the four cause states.
        let w = [0.00882098, 0.01584396, 0.000196004, 0.0009702];
        let z: f64 = w.iter().sum();
        assert_close!(m[0], (w[0] + w[2]) / z, 1e-7);
        assert_close!(m[1], (w[1] + w[2]) / z, 1e-7);
        assert_close!(m[0], 0.34908, 1e-5);
        assert_close!(m[1], 0.62095, 1e-5);
        assert_eq!(m[2], 1.0);
    }

    #[test]
    fn single_node_prior() {
        let net = Network::builder().node("x", NodeKind::Model, 0.01).build().unwrap();
        assert_close!(exact_posteriors(&net, &Evidence::none(1)).unwrap()[0], 0.01, 1e-15);
    }

    #[test]
    fn fully_observed() {
        let net: Network = vase();
        let ev = Evidence::from_ids(&net, [("e", true), ("b", false), ("v", true)]).unwrap();
        assert_eq!(exact_posteriors(&net, &ev).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn cap_and_inconsistency() {
        let net: Network = vase();
        assert_eq!(
            exact_posteriors_capped(&net, &Evidence::none(3), 2).unwrap_err(),
            Error::CapExceeded { count: 3, cap: 2 }
        );
        let zero = net.with_leak(NodeId(2), 0.0).unwrap();
        let ev = Evidence::from_ids(&zero, [("e", false), ("b", false), ("v", true)]).unwrap();
        assert_eq!(exact_posteriors(&zero, &ev).unwrap_err(), Error::InconsistentEvidence);
    }

    #[test]
    fn bipartite_matches_enumeration() {
        let net = Network::builder()
            .node("a", NodeKind::Model, 0.05)
            .node("b", NodeKind::Model, 0.1)
            .node("c", NodeKind::Model, 0.02)
            .node("s1", NodeKind::Sensory, 0.01)
            .node("s2", NodeKind::Sensory, 0.005)
            .node("s3", NodeKind::Sensory, 0.02)
            .node("s4", NodeKind::Sensory, 0.02)
            .edge("a", "s1", 0.9)
            .edge("b", "s1", 0.6)
            .edge("b", "s2", 0.7)
            .edge("c", "s2", 0.8)
            .edge("c", "s3", 0.5)
            .edge("a", "s4", 0.5)
            .build()
            .unwrap();
        assert!(is_bipartite(&net));
        for ev_pairs in [
            vec![("s1", true), ("s2", true), ("s3", false)],
            vec![("s1", true), ("s2", false), ("s4", true)],
            vec![("s2", true), ("b", true)],
            vec![("s3", false)],
        ] {
            let ev = Evidence::from_ids(&net, ev_pairs).unwrap();
            let enumerated = exact_posteriors(&net, &ev).unwrap();
            let quick = exact_posteriors_bipartite(&net, &ev, 10).unwrap();
            for (q, e) in quick.iter().zip(&enumerated) {
                assert_close!(*q, *e, 1e-12);
            }
        }
    }

    #[test]
    fn auto_picks_a_method() {
        let net: Network = vase();
        let ev = Evidence::from_ids(&net, [("v", true)]).unwrap();
        assert_eq!(exact_marginals_auto(&net, &ev, 22).unwrap().1, ExactMethod::Enumeration);
        assert_eq!(exact_marginals_auto(&net, &ev, 1).unwrap().1, ExactMethod::Bipartite);
        let chain = Network::builder()
            .node("a", NodeKind::Model, 0.1)
            .node("b", NodeKind::Model, 0.1)
            .node("c", NodeKind::Sensory, 0.1)
            .edge("a", "b", 0.5)
            .edge("b", "c", 0.5)
            .build()
            .unwrap();
        assert!(exact_marginals_auto(&chain, &Evidence::none(3), 1).is_err());
    }
}
