#![allow(dead_code)]

use noisyor::{Evidence, Network, NodeId, NodeKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG with edges only from lower to higher index. Leaks and links
/// are kept away from 0 and 1 so every state has positive probability.
pub fn random_network(rng: &mut impl Rng, n: usize, edge_prob: f64) -> Network {
    let mut b = Network::builder();
    for i in 0..n {
        b.add_node(format!("n{i}"), NodeKind::Model, rng.gen_range(0.01..0.4));
    }
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(edge_prob) {
                b.add_edge(format!("n{i}"), format!("n{j}"), rng.gen_range(0.2..0.95));
            }
        }
    }
    b.build().expect("forward edges cannot form a cycle")
}

pub fn seeded_network(seed: u64, n: usize, edge_prob: f64) -> Network {
    random_network(&mut ChaCha8Rng::seed_from_u64(seed), n, edge_prob)
}

/// Observe up to `max_obs` random nodes with random values.
pub fn random_evidence(rng: &mut impl Rng, net: &Network, max_obs: usize) -> Evidence {
    let mut ids: Vec<NodeId> = net.node_ids().collect();
    ids.shuffle(rng);
    let k = rng.gen_range(0..=max_obs.min(ids.len()));
    let pairs: Vec<(NodeId, bool)> = ids[..k].iter().map(|&n| (n, rng.gen_bool(0.5))).collect();
    Evidence::from_assignments(net.len(), pairs).unwrap()
}

/// Evidence biased towards sinks, which is where diagnostic evidence sits
/// and where clamping and barren nodes show up.
pub fn sink_evidence(rng: &mut impl Rng, net: &Network, max_obs: usize) -> Evidence {
    let mut ids: Vec<NodeId> = net.node_ids().collect();
    ids.sort_by_key(|&n| std::cmp::Reverse(net.topo_position(n)));
    let pool = &ids[..(net.len() / 2).max(1)];
    let k = rng.gen_range(1..=max_obs.min(pool.len()));
    let mut pick = pool.to_vec();
    pick.shuffle(rng);
    let pairs: Vec<(NodeId, bool)> = pick[..k].iter().map(|&n| (n, rng.gen_bool(0.6))).collect();
    Evidence::from_assignments(net.len(), pairs).unwrap()
}

/// Every complete assignment of `n` nodes.
pub fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u64 << n).map(move |i| (0..n).map(|b| i >> b & 1 == 1).collect())
}

/// Probability of the network's factor product by direct multiplication,
/// without going through the library's log-space evaluation.
pub fn joint_direct(net: &Network, state: &[bool]) -> f64 {
    net.node_ids()
        .map(|n| {
            let mut q = 1.0 - net.leak(n);
            for &(p, link) in net.parents(n) {
                if state[p.0] {
                    q *= 1.0 - link;
                }
            }
            if state[n.0] {
                1.0 - q
            } else {
                q
            }
        })
        .product()
}

/// Posterior marginals by brute force over all assignments.
pub fn brute_posteriors(net: &Network, ev: &Evidence) -> Vec<f64> {
    let mut num = vec![0.0; net.len()];
    let mut z = 0.0;
    for s in assignments(net.len()) {
        if ev.observed().any(|(n, v)| s[n.0] != v) {
            continue;
        }
        let p = joint_direct(net, &s);
        z += p;
        for (i, &v) in s.iter().enumerate() {
            if v {
                num[i] += p;
            }
        }
    }
    num.iter().map(|x| x / z).collect()
}

/// Nodes reachable from `seeds` following `next`, seeds included.
pub fn closure(net: &Network, seeds: &[NodeId], next: impl Fn(NodeId) -> Vec<NodeId>) -> Vec<bool> {
    let mut seen = vec![false; net.len()];
    let mut stack = seeds.to_vec();
    while let Some(n) = stack.pop() {
        if !seen[n.0] {
            seen[n.0] = true;
            stack.extend(next(n));
        }
    }
    seen
}

pub fn ancestors(net: &Network, seeds: &[NodeId]) -> Vec<bool> {
    closure(net, seeds, |n| net.parents(n).iter().map(|p| p.0).collect())
}

pub fn descendants(net: &Network, seeds: &[NodeId]) -> Vec<bool> {
    closure(net, seeds, |n| net.children(n).to_vec())
}
