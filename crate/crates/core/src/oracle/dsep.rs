use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::scalar::Prob;
use std::collections::{BTreeSet, VecDeque};

/// True when no active trail joins `x` to any node of `targets` given
/// `given`. Reachability in the style of the Bayes ball: a trail may pass a
/// collider only if the collider or one of its descendants is in `given`.
pub fn d_separated<P: Prob>(
    net: &Network<P>,
    x: NodeId,
    given: &BTreeSet<NodeId>,
    targets: &BTreeSet<NodeId>,
) -> Result<bool> {
    net.check(x)?;
    for &n in given.iter().chain(targets) {
        net.check(n)?;
    }
    if given.contains(&x) {
        return Err(Error::Validation(format!("{} is in the conditioning set", net.id(x))));
    }
    let reach = reachable(net, x, given);
    Ok(targets.iter().all(|t| *t == x || given.contains(t) || !reach[t.0]))
}

/// Nodes joined to `x` by an active trail given `given` (excluding `given`).
pub fn reachable<P: Prob>(net: &Network<P>, x: NodeId, given: &BTreeSet<NodeId>) -> Vec<bool> {
    let n = net.len();
    let observed: Vec<bool> = (0..n).map(|i| given.contains(&NodeId(i))).collect();
    // Colliders are opened by observed descendants.
    let opens = net.ancestor_mask(given.iter().copied());

    // (node, arrived from a child)
    let mut seen = vec![[false; 2]; n];
    let mut reach = vec![false; n];
    let mut queue = VecDeque::from([(x, true)]);
    while let Some((y, up)) = queue.pop_front() {
        if std::mem::replace(&mut seen[y.0][up as usize], true) {
            continue;
        }
        if !observed[y.0] {
            reach[y.0] = true;
        }
        if up && !observed[y.0] {
            queue.extend(net.parents(y).iter().map(|&(p, _)| (p, true)));
            queue.extend(net.children(y).iter().map(|&c| (c, false)));
        } else if !up {
            if !observed[y.0] {
                queue.extend(net.children(y).iter().map(|&c| (c, false)));
            }
            if opens[y.0] {
                queue.extend(net.parents(y).iter().map(|&(p, _)| (p, true)));
            }
        }
    }
    reach
}
