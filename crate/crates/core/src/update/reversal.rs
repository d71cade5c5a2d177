//! Arc reversal and elimination of hidden nodes.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{NodeId, Wire};
use crate::matrix::{Classification, StochMatrix, MAX_ARITY};
use crate::mbn::{Mbn, ObnCertificate};
use crate::scalar::Scalar;

use super::rewrite::tidy_node;
use super::split::{fill_sparse, fill_uniform, split_with_free};

/// Reverses the arc `u -> y` of an ordinary Bayesian network. Afterwards `y`
/// reads the parents of both nodes and `u` additionally reads `y`; the
/// joint distribution is unchanged.
pub fn reverse_arc<T: Scalar>(mbn: &Mbn<T>, u: NodeId, y: NodeId) -> Result<Mbn<T>> {
    if let ObnCertificate::Fails(reason) = mbn.is_obn() {
        return Err(Error::NotObn(format!("{reason:?}")));
    }
    mbn.node(u)?;
    mbn.node(y)?;
    let mut result = mbn.clone();
    reverse_in_place(&mut result, u, y, false)?;
    result.assign_fresh_labels();
    Ok(result)
}

/// Reverses `u -> y` in place. With `sparse`, undetermined conditionals of
/// `u` are chosen to ignore as many inputs as possible and ignored inputs of
/// both nodes are removed.
pub(crate) fn reverse_in_place<T: Scalar>(mbn: &mut Mbn<T>, u: NodeId, y: NodeId, sparse: bool) -> Result<()> {
    let (nu, ny) = (mbn.node(u)?.clone(), mbn.node(y)?.clone());
    if !ny.sources.contains(&Wire::Node(u)) {
        return Err(Error::NotPredecessor(u, y));
    }
    if reaches_indirectly(mbn, u, y) {
        return Err(Error::NotPathClosed);
    }
    let mut z: Vec<Wire> = Vec::new();
    for w in nu.sources.iter().chain(&ny.sources) {
        if *w != Wire::Node(u) && !z.contains(w) {
            z.push(*w);
        }
    }
    if z.len() + 1 > MAX_ARITY {
        return Err(Error::SizeOverflow { inputs: z.len() + 1, outputs: 1 });
    }
    let zn = z.len();
    let pos = |w: &Wire| z.iter().position(|v| v == w).expect("source collected in z");
    let u_pos: Vec<usize> = nu.sources.iter().map(pos).collect();
    // None marks the reversed arc itself.
    let y_pos: Vec<Option<usize>> =
        ny.sources.iter().map(|w| (*w != Wire::Node(u)).then(|| pos(w))).collect();
    let bit = |code: usize, p: usize| code >> (zn - 1 - p) & 1;
    let joint = StochMatrix::from_fn(zn, 2, |x, zc| {
        let (yb, ub) = (x >> 1, x & 1);
        let uc = u_pos.iter().fold(0, |acc, &p| acc << 1 | bit(zc, p));
        let yc = y_pos.iter().fold(0, |acc, p| acc << 1 | p.map_or(ub, |p| bit(zc, p)));
        nu.matrix.get(ub, uc) * ny.matrix.get(yb, yc)
    })?;
    let (front, mut back, free) = split_with_free(&joint, 1)?;
    if sparse {
        fill_sparse(&mut back, &free);
    } else {
        fill_uniform(&mut back, &free);
    }
    let (nodes, _) = mbn.parts_mut();
    let node_y = nodes.get_mut(&y).expect("checked above");
    node_y.label.clear();
    node_y.sources = z.clone();
    node_y.matrix = front;
    if sparse {
        tidy_node(node_y);
    }
    let node_u = nodes.get_mut(&u).expect("checked above");
    node_u.label.clear();
    node_u.sources = std::iter::once(Wire::Node(y)).chain(z).collect();
    node_u.matrix = back;
    if sparse {
        tidy_node(node_u);
    }
    Ok(())
}

/// Whether `y` is reachable from `u` through some other node.
fn reaches_indirectly<T: Scalar>(mbn: &Mbn<T>, u: NodeId, y: NodeId) -> bool {
    let succ = mbn.successors();
    let mut stack: Vec<NodeId> = succ.get(&u).into_iter().flatten().copied().filter(|&s| s != y).collect();
    let mut seen: BTreeSet<NodeId> = stack.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &s in succ.get(&v).into_iter().flatten() {
            if s == y {
                return true;
            }
            if seen.insert(s) {
                stack.push(s);
            }
        }
    }
    false
}

/// Removes a stochastic node that feeds no output port, reversing its arcs
/// into its successors first so that the joint of the remaining wires is
/// preserved.
pub fn eliminate_hidden_node<T: Scalar>(mbn: &Mbn<T>, v: NodeId) -> Result<Mbn<T>> {
    let mut result = mbn.clone();
    eliminate_in_place(&mut result, v)?;
    result.assign_fresh_labels();
    Ok(result)
}

pub(crate) fn eliminate_in_place<T: Scalar>(mbn: &mut Mbn<T>, v: NodeId) -> Result<()> {
    let node = mbn.node(v)?;
    if mbn.outputs().contains(&Wire::Node(v)) {
        return Err(Error::NodeHasOutput(v));
    }
    if node.matrix.classify() != Classification::Stochastic {
        return Err(Error::NodeNotStochastic(v));
    }
    loop {
        let succ = mbn.successors();
        let Some(children) = succ.get(&v).filter(|c| !c.is_empty()) else { break };
        let first = mbn.topo_order().into_iter().find(|w| children.contains(w)).expect("successor is a node");
        reverse_in_place(mbn, v, first, true)?;
    }
    mbn.parts_mut().0.remove(&v);
    Ok(())
}
