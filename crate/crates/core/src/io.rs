//! JSON file formats for networks and evidence.
//!
//! ```json
//! {"nodes":[{"id":"e","kind":"model","leak":0.01}],
//!  "edges":[{"from":"e","to":"v","p":0.9}]}
//! ```
//!
//! Evidence files are flat objects mapping node ids to booleans.

use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::network::{Network, NodeKind, ValidationProfile};
use crate::scalar::Prob;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    pub kind: NodeKind,
    pub leak: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

impl NetworkFile {
    pub fn from_network<P: Prob>(net: &Network<P>) -> Self {
        Self {
            nodes: net
                .nodes()
                .iter()
                .map(|n| NodeRecord { id: n.id.clone(), kind: n.kind, leak: n.leak.as_f64() })
                .collect(),
            edges: net
                .edges()
                .iter()
                .map(|e| EdgeRecord { from: net.id(e.from).to_string(), to: net.id(e.to).to_string(), p: e.p.as_f64() })
                .collect(),
        }
    }

    pub fn into_network<P: Prob>(self) -> Result<Network<P>> {
        let mut b = Network::builder();
        for n in self.nodes {
            b.add_node(n.id, n.kind, P::of(n.leak));
        }
        for e in self.edges {
            b.add_edge(e.from, e.to, P::of(e.p));
        }
        b.build()
    }
}

fn reject_unknown(value: &Value, allowed: &[&str], context: &str) -> Result<()> {
    if let Value::Object(map) = value {
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::UnknownKey { key: key.clone(), context: context.to_string() });
        }
    }
    Ok(())
}

/// Parses a network file, rejecting unknown keys.
pub fn parse_network<P: Prob>(text: &str) -> Result<Network<P>> {
    parse_network_with(text, ValidationProfile::Strict)
}

/// Parses a network file. Under [`ValidationProfile::Strict`] unknown keys are
/// errors; the permissive profile ignores them. Probability positivity is not
/// enforced here; see [`Network::validate`].
pub fn parse_network_with<P: Prob>(text: &str, profile: ValidationProfile) -> Result<Network<P>> {
    let value: Value = serde_json::from_str(text)?;
    if profile == ValidationProfile::Strict {
        reject_unknown(&value, &["nodes", "edges"], "network")?;
        if let Some(Value::Array(nodes)) = value.get("nodes") {
            for n in nodes {
                reject_unknown(n, &["id", "kind", "leak"], "node")?;
            }
        }
        if let Some(Value::Array(edges)) = value.get("edges") {
            for e in edges {
                reject_unknown(e, &["from", "to", "p"], "edge")?;
            }
        }
    }
    let file: NetworkFile = serde_json::from_value(value)?;
    file.into_network()
}

pub fn network_to_json<P: Prob>(net: &Network<P>) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes")
}

/// Ordered key/value pairs of an evidence object; duplicate keys survive so
/// they can be reported.
struct EvidencePairs(Vec<(String, bool)>);

impl<'de> Deserialize<'de> for EvidencePairs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = EvidencePairs;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping node ids to booleans")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, bool>()? {
                    out.push((k, v));
                }
                Ok(EvidencePairs(out))
            }
        }
        d.deserialize_map(PairVisitor)
    }
}

pub fn parse_evidence<P: Prob>(net: &Network<P>, text: &str) -> Result<Evidence> {
    let pairs: EvidencePairs = serde_json::from_str(text)?;
    Evidence::from_ids(net, pairs.0)
}

/// Evidence as an id-sorted JSON object.
pub fn evidence_to_json<P: Prob>(net: &Network<P>, ev: &Evidence) -> String {
    let map: BTreeMap<&str, bool> = ev.observed().map(|(n, v)| (net.id(n), v)).collect();
    serde_json::to_string_pretty(&map).expect("evidence serializes")
}
