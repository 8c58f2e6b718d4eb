use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::scalar::Prob;

/// Observed boolean values on a subset of nodes (the set Y).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Evidence {
    values: Vec<Option<bool>>,
}

impl Evidence {
    /// No observations over a network of `node_count` nodes.
    pub fn none(node_count: usize) -> Self {
        Self { values: vec![None; node_count] }
    }

    pub fn from_assignments(node_count: usize, pairs: impl IntoIterator<Item = (NodeId, bool)>) -> Result<Self> {
        let mut ev = Self::none(node_count);
        for (n, value) in pairs {
            let slot = ev.values.get_mut(n.0).ok_or_else(|| Error::UnknownNode(format!("#{}", n.0)))?;
            if slot.is_some() {
                return Err(Error::DuplicateEvidence(format!("#{}", n.0)));
            }
            *slot = Some(value);
        }
        Ok(ev)
    }

    pub fn from_ids<P: Prob, S: AsRef<str>>(
        net: &Network<P>,
        pairs: impl IntoIterator<Item = (S, bool)>,
    ) -> Result<Self> {
        let mut ev = Self::none(net.len());
        for (id, value) in pairs {
            let n = net.node_id(id.as_ref())?;
            if ev.values[n.0].is_some() {
                return Err(Error::DuplicateEvidence(id.as_ref().to_string()));
            }
            ev.values[n.0] = Some(value);
        }
        Ok(ev)
    }

    #[inline]
    pub fn get(&self, n: NodeId) -> Option<bool> {
        self.values[n.0]
    }

    #[inline]
    pub fn is_observed(&self, n: NodeId) -> bool {
        self.values[n.0].is_some()
    }

    pub fn observed(&self) -> impl Iterator<Item = (NodeId, bool)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|b| (NodeId(i), b)))
    }

    pub fn true_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.observed().filter(|&(_, v)| v).map(|(n, _)| n)
    }

    /// Number of observed nodes.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|v| **v == Some(true)).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Fails if the evidence was built for a network of a different size.
    pub fn check_against<P: Prob>(&self, net: &Network<P>) -> Result<()> {
        if self.values.len() == net.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(format!("evidence spans {} nodes, network has {}", self.values.len(), net.len())))
        }
    }
}
