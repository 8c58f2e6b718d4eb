use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeId, NodeKind};
use crate::oracle::forward_sample;
use crate::scalar::Prob;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layering {
    /// Model nodes are roots, sensory nodes their children.
    TwoLayer,
    /// Model nodes split into this many layers; links only point to later
    /// layers or to sensory nodes.
    LayeredCausal(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub n_model: usize,
    pub n_sensory: usize,
    pub n_links: usize,
    #[serde(default = "default_prior_range")]
    pub prior_range: (f64, f64),
    #[serde(default = "default_link_range")]
    pub link_range: (f64, f64),
    #[serde(default = "default_sensory_leak_range")]
    pub sensory_leak_range: (f64, f64),
    #[serde(default = "default_layering")]
    pub layering: Layering,
    /// Share of sensory nodes given at least two parents.
    #[serde(default = "default_multi_parent_fraction")]
    pub multi_parent_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_prior_range() -> (f64, f64) {
    (0.001, 0.05)
}
fn default_link_range() -> (f64, f64) {
    (0.5, 0.95)
}
fn default_sensory_leak_range() -> (f64, f64) {
    (0.001, 0.01)
}
fn default_layering() -> Layering {
    Layering::TwoLayer
}
fn default_multi_parent_fraction() -> f64 {
    0.5
}

impl GeneratorParams {
    pub fn new(n_model: usize, n_sensory: usize, n_links: usize, seed: u64) -> Self {
        Self {
            n_model,
            n_sensory,
            n_links,
            prior_range: default_prior_range(),
            link_range: default_link_range(),
            sensory_leak_range: default_sensory_leak_range(),
            layering: default_layering(),
            multi_parent_fraction: default_multi_parent_fraction(),
            seed,
        }
    }

    fn layer_count(&self) -> usize {
        match self.layering {
            Layering::TwoLayer => 1,
            Layering::LayeredCausal(d) => d.max(1),
        }
    }

    /// Number of sensory nodes that must get a second parent.
    fn multi_parent_count(&self) -> usize {
        if self.n_model < 2 {
            return 0;
        }
        (self.multi_parent_fraction * self.n_sensory as f64).ceil() as usize
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        for (name, (lo, hi)) in [
            ("prior_range", self.prior_range),
            ("link_range", self.link_range),
            ("sensory_leak_range", self.sensory_leak_range),
        ] {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return bad(format!("{name} [{lo}, {hi}] must lie inside (0,1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.multi_parent_fraction) {
            return bad(format!("multi_parent_fraction {} outside [0,1]", self.multi_parent_fraction));
        }
        if self.n_sensory > 0 && self.n_model == 0 {
            return bad("sensory nodes need at least one model node".into());
        }
        let required = self.n_sensory + self.multi_parent_count();
        if self.n_links < required {
            return bad(format!(
                "{} links cannot give {} sensory nodes their parents (need {required})",
                self.n_links, self.n_sensory
            ));
        }
        let available = self.candidate_links().len();
        if self.n_links > available {
            return bad(format!("{} links requested but only {available} are possible", self.n_links));
        }
        Ok(())
    }

    fn layer_of(&self, model: usize) -> usize {
        model * self.layer_count() / self.n_model.max(1)
    }

    /// Every (from, to) index pair allowed by the layering.
    fn candidate_links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for m in 0..self.n_model {
            for t in 0..self.n_model {
                if self.layer_of(m) < self.layer_of(t) {
                    out.push((m, t));
                }
            }
            for s in 0..self.n_sensory {
                out.push((m, self.n_model + s));
            }
        }
        out
    }
}

/// Deterministic synthetic diagnostic network. Every sensory node is a sink
/// with at least one model parent, and the requested share of sensory nodes
/// has competing causes.
pub fn generate_network<P: Prob>(params: &GeneratorParams) -> Result<Network<P>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let nm = params.n_model;
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..hi) };

    let mut b = Network::builder();
    for m in 0..nm {
        let leak = uniform(&mut rng, params.prior_range);
        b.add_node(format!("m{m}"), NodeKind::Model, P::of(leak));
    }
    for s in 0..params.n_sensory {
        let leak = uniform(&mut rng, params.sensory_leak_range);
        b.add_node(format!("s{s}"), NodeKind::Sensory, P::of(leak));
    }

    let mut chosen = std::collections::BTreeSet::new();
    let mut children = vec![0usize; nm];
    // Sensory parents come mostly from the last model layer.
    let last: Vec<usize> = (0..nm).filter(|&m| params.layer_of(m) + 1 == params.layer_count()).collect();
    let pick_parent = |rng: &mut ChaCha8Rng, taken: &dyn Fn(usize) -> bool| -> Option<usize> {
        let pool = if last.iter().any(|&m| !taken(m)) { &last } else { &(0..nm).collect::<Vec<_>>() };
        let free: Vec<usize> = pool.iter().copied().filter(|&m| !taken(m)).collect();
        free.choose(rng).copied()
    };
    let mut multi: Vec<usize> = (0..params.n_sensory).collect();
    multi.shuffle(&mut rng);
    multi.truncate(params.multi_parent_count());
    let mut wants = vec![1usize; params.n_sensory];
    for &s in &multi {
        wants[s] = 2;
    }
    for (s, &w) in wants.iter().enumerate() {
        let to = nm + s;
        for _ in 0..w {
            let taken = |m: usize| chosen.contains(&(m, to));
            if let Some(m) = pick_parent(&mut rng, &taken) {
                chosen.insert((m, to));
                children[m] += 1;
            }
        }
    }
    // Remaining links: childless model nodes first, then uniformly.
    let mut pool: Vec<(usize, usize)> = params.candidate_links().into_iter().filter(|l| !chosen.contains(l)).collect();
    pool.shuffle(&mut rng);
    let mut rest = Vec::with_capacity(pool.len());
    for l in pool {
        if chosen.len() < params.n_links && children[l.0] == 0 {
            chosen.insert(l);
            children[l.0] += 1;
        } else {
            rest.push(l);
        }
    }
    for l in rest {
        if chosen.len() >= params.n_links {
            break;
        }
        chosen.insert(l);
    }
    let name = |i: usize| if i < nm { format!("m{i}") } else { format!("s{}", i - nm) };
    for (from, to) in chosen {
        let p = uniform(&mut rng, params.link_range);
        b.add_edge(name(from), name(to), P::of(p));
    }
    b.build()
}

/// One diagnostic problem: evidence on sensory nodes only.
#[derive(Clone, Debug, PartialEq)]
pub struct TestCase {
    pub evidence: Evidence,
    pub n_positive: usize,
}

const CASE_ATTEMPTS: usize = 100_000;

/// Cases drawn by sampling a world from the prior and observing a random
/// subset of its sensory nodes, so the evidence is always consistent.
pub fn generate_cases<P: Prob>(
    net: &Network<P>,
    n_cases: usize,
    evidence_range: (usize, usize),
    positive_range: (usize, usize),
    seed: u64,
) -> Result<Vec<TestCase>> {
    let sensors: Vec<NodeId> = net.node_ids().filter(|&n| net.kind(n) == NodeKind::Sensory).collect();
    let (ev_lo, ev_hi) = evidence_range;
    let (pos_lo, pos_hi) = positive_range;
    if ev_lo > ev_hi || pos_lo > pos_hi || ev_lo == 0 {
        return Err(Error::Infeasible(format!("bad ranges: evidence {evidence_range:?}, positive {positive_range:?}")));
    }
    if ev_hi > sensors.len() {
        return Err(Error::Infeasible(format!(
            "evidence range up to {ev_hi} exceeds the {} sensory nodes",
            sensors.len()
        )));
    }
    if pos_lo > ev_hi {
        return Err(Error::Infeasible(format!("cannot have {pos_lo} positives among at most {ev_hi} observations")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n_cases);
    let mut attempts = 0;
    while cases.len() < n_cases {
        attempts += 1;
        if attempts > CASE_ATTEMPTS * n_cases.max(1) {
            return Err(Error::Infeasible(format!(
                "no world with {pos_lo}..={pos_hi} true sensory nodes found in {CASE_ATTEMPTS} draws per case"
            )));
        }
        let world = forward_sample(net, &mut rng);
        let mut on: Vec<NodeId> = sensors.iter().copied().filter(|s| world[s.0]).collect();
        let mut off: Vec<NodeId> = sensors.iter().copied().filter(|s| !world[s.0]).collect();
        let k = rng.gen_range(ev_lo..=ev_hi);
        // Positive counts compatible with this world and k observations.
        let lo = pos_lo.max(k.saturating_sub(off.len()));
        let hi = pos_hi.min(k).min(on.len());
        if lo > hi {
            continue;
        }
        let p = rng.gen_range(lo..=hi);
        on.shuffle(&mut rng);
        off.shuffle(&mut rng);
        let mut obs: Vec<(NodeId, bool)> = on[..p].iter().map(|&n| (n, true)).collect();
        obs.extend(off[..k - p].iter().map(|&n| (n, false)));
        obs.sort();
        cases.push(TestCase { evidence: Evidence::from_assignments(net.len(), obs)?, n_positive: p });
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::network_to_json;
    use crate::network::ValidationProfile;

    #[test]
    fn engine_scale_counts() {
        let net: Network = generate_network(&GeneratorParams::new(187, 82, 600, 7)).unwrap();
        let models = net.node_ids().filter(|&n| net.kind(n) == NodeKind::Model).count();
        assert_eq!((models, net.len() - models, net.edges().len()), (187, 82, 600));
        assert!(net.validate(ValidationProfile::Strict).is_empty());
        for n in net.node_ids().filter(|&n| net.kind(n) == NodeKind::Sensory) {
            assert!(net.children(n).is_empty());
            assert!(!net.parents(n).is_empty());
        }
        let competing = net.node_ids().filter(|&n| net.parents(n).len() >= 2).count();
        assert!(competing >= 41);
    }

    #[test]
    fn vase_family() {
        let net: Network = generate_network(&GeneratorParams::new(2, 1, 2, 3)).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.parents(net.node_id("s0").unwrap()).len(), 2);
    }

    #[test]
    fn deterministic() {
        let mut p = GeneratorParams::new(30, 12, 60, 5);
        p.layering = Layering::LayeredCausal(3);
        let a: Network = generate_network(&p).unwrap();
        let b: Network = generate_network(&p).unwrap();
        assert_eq!(network_to_json(&a), network_to_json(&b));
        p.seed = 6;
        let c: Network = generate_network(&p).unwrap();
        assert_ne!(network_to_json(&a), network_to_json(&c));
    }

    #[test]
    fn layered_has_model_links() {
        let mut p = GeneratorParams::new(20, 10, 60, 1);
        p.layering = Layering::LayeredCausal(3);
        let net: Network = generate_network(&p).unwrap();
        let inner = net.edges().iter().filter(|e| net.kind(e.to) == NodeKind::Model).count();
        assert!(inner > 0);
    }

    #[test]
    fn infeasible_parameters() {
        assert!(matches!(generate_network::<f64>(&GeneratorParams::new(5, 10, 9, 0)), Err(Error::Infeasible(_))));
        assert!(matches!(generate_network::<f64>(&GeneratorParams::new(2, 2, 5, 0)), Err(Error::Infeasible(_))));
        let mut p = GeneratorParams::new(5, 5, 10, 0);
        p.link_range = (0.5, 1.0);
        assert!(generate_network::<f64>(&p).is_err());
    }

    #[test]
    fn cases_within_ranges() {
        let net: Network = generate_network(&GeneratorParams::new(60, 30, 200, 11)).unwrap();
        let cases = generate_cases(&net, 5, (4, 20), (2, 9), 3).unwrap();
        assert_eq!(cases.len(), 5);
        for c in &cases {
            assert!((4..=20).contains(&c.evidence.count()));
            assert!((2..=9).contains(&c.n_positive));
            assert_eq!(c.evidence.positive_count(), c.n_positive);
            assert!(c.evidence.observed().all(|(n, _)| net.kind(n) == NodeKind::Sensory));
        }
    }

    #[test]
    fn vase_single_positive() {
        let net: Network = crate::network::vase();
        let cases = generate_cases(&net, 1, (1, 1), (1, 1), 0).unwrap();
        assert_eq!(cases[0].evidence, Evidence::from_ids(&net, [("v", true)]).unwrap());
    }

    #[test]
    fn too_much_evidence() {
        let net: Network = crate::network::vase();
        assert!(matches!(generate_cases(&net, 1, (1, 2), (1, 1), 0), Err(Error::Infeasible(_))));
    }
}
