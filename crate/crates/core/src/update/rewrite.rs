//! Local simplification rules, applied until none fires.

use std::collections::BTreeMap;

use crate::graph::{NodeId, Wire};
use crate::matrix::Classification;
use crate::mbn::{Mbn, MbnNode};
use crate::scalar::Scalar;

use super::split::MERGE_TOL;

/// Applies the simplification rules to a fixpoint. The denoted matrix is
/// unchanged.
pub fn rewrite_fixpoint<T: Scalar>(mbn: &Mbn<T>) -> Mbn<T> {
    let mut result = mbn.clone();
    rewrite_in_place(&mut result);
    result.assign_fresh_labels();
    result
}

/// Termination measure of the rules, compared lexicographically: surplus
/// uses of node wires (ports included), node count, total node arity.
pub fn measure<T: Scalar>(mbn: &Mbn<T>) -> (usize, usize, usize) {
    let surplus = uses(mbn).values().map(|&k| k.saturating_sub(1)).sum();
    let arity = mbn.nodes().values().map(|n| n.sources.len()).sum();
    (surplus, mbn.nodes().len(), arity)
}

pub(crate) fn rewrite_in_place<T: Scalar>(mbn: &mut Mbn<T>) {
    while delete_unused(mbn)
        || absorb_points(mbn)
        || split_shared_points(mbn)
        || merge_diagonal(mbn)
        || tidy_all(mbn)
    {}
}

/// Contracts repeated sources and drops inputs the matrix ignores.
pub(crate) fn tidy_node<T: Scalar>(node: &mut MbnNode<T>) -> bool {
    let mut changed = false;
    let mut j = 0;
    while j < node.sources.len() {
        if let Some(first) = node.sources[..j].iter().position(|w| *w == node.sources[j]) {
            node.matrix = node.matrix.contract_inputs(first, j);
            node.sources.remove(j);
            changed = true;
        } else {
            j += 1;
        }
    }
    let tol = T::lit(MERGE_TOL);
    for j in (0..node.sources.len()).rev() {
        if !node.matrix.depends_on_input(j, tol) {
            node.matrix = node.matrix.restrict_input(j, false);
            node.sources.remove(j);
            changed = true;
        }
    }
    if changed {
        node.label.clear();
    }
    changed
}

fn uses<T: Scalar>(mbn: &Mbn<T>) -> BTreeMap<NodeId, usize> {
    let mut count: BTreeMap<NodeId, usize> = mbn.nodes().keys().map(|&v| (v, 0)).collect();
    let wires = mbn.nodes().values().flat_map(|n| n.sources.iter()).chain(mbn.outputs());
    for v in wires.filter_map(|w| w.node()) {
        *count.entry(v).or_default() += 1;
    }
    count
}

fn port_count<T: Scalar>(mbn: &Mbn<T>, v: NodeId) -> usize {
    mbn.outputs().iter().filter(|w| **w == Wire::Node(v)).count()
}

/// The bit carrying all the mass of a source-free node, if any.
fn point_bit<T: Scalar>(node: &MbnNode<T>) -> Option<bool> {
    if !node.sources.is_empty() {
        return None;
    }
    let tol = T::lit(MERGE_TOL);
    let (m0, m1) = (node.matrix.get(0, 0), node.matrix.get(1, 0));
    match (m0 <= tol, m1 <= tol) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

/// Deletes stochastic nodes whose wire is used nowhere.
fn delete_unused<T: Scalar>(mbn: &mut Mbn<T>) -> bool {
    let count = uses(mbn);
    let dead: Vec<NodeId> = mbn
        .nodes()
        .iter()
        .filter(|(v, n)| count[v] == 0 && n.matrix.classify() == Classification::Stochastic)
        .map(|(&v, _)| v)
        .collect();
    let nodes = mbn.parts_mut().0;
    for v in &dead {
        nodes.remove(v);
    }
    !dead.is_empty()
}

/// Substitutes the value of a source-free point node into its consumers.
fn absorb_points<T: Scalar>(mbn: &mut Mbn<T>) -> bool {
    let points: Vec<(NodeId, bool)> =
        mbn.nodes().iter().filter_map(|(&v, n)| point_bit(n).map(|b| (v, b))).collect();
    let mut changed = false;
    let nodes = mbn.parts_mut().0;
    for (v, b) in points {
        for node in nodes.values_mut() {
            for j in (0..node.sources.len()).rev() {
                if node.sources[j] == Wire::Node(v) {
                    node.matrix = node.matrix.restrict_input(j, b);
                    node.sources.remove(j);
                    node.label.clear();
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Gives each output port of a shared point node its own copy.
fn split_shared_points<T: Scalar>(mbn: &mut Mbn<T>) -> bool {
    let shared: Vec<NodeId> = mbn
        .nodes()
        .iter()
        .filter(|(&v, n)| {
            point_bit(n).is_some() && n.matrix.classify() == Classification::Stochastic && port_count(mbn, v) > 1
        })
        .map(|(&v, _)| v)
        .collect();
    for &v in &shared {
        let template = mbn.nodes()[&v].clone();
        let mut next = mbn.next_id();
        let (nodes, ports) = mbn.parts_mut();
        for port in ports.iter_mut().filter(|w| **w == Wire::Node(v)).skip(1) {
            nodes.insert(next, template.clone());
            *port = Wire::Node(next);
            next += 1;
        }
    }
    !shared.is_empty()
}

/// Folds a diagonal `1 -> 1` node into the node it reads, scaling that
/// node's rows by the diagonal.
fn merge_diagonal<T: Scalar>(mbn: &mut Mbn<T>) -> bool {
    let tol = T::lit(MERGE_TOL);
    let found = mbn.nodes().iter().find_map(|(&w, n)| {
        let [Wire::Node(u)] = n.sources[..] else { return None };
        let diagonal = n.matrix.get(1, 0) <= tol && n.matrix.get(0, 1) <= tol;
        let both_ported = port_count(mbn, w) > 0 && port_count(mbn, u) > 0;
        (diagonal && !both_ported).then_some((w, u))
    });
    let Some((w, u)) = found else { return false };
    let (nodes, ports) = mbn.parts_mut();
    let diag = nodes.remove(&w).expect("found above").matrix;
    let (d0, d1) = (diag.get(0, 0), diag.get(1, 1));
    if d0 != T::one() || d1 != T::one() {
        let source = nodes.get_mut(&u).expect("source of a node");
        source.matrix = source.matrix.masked(|x, _| if x == 1 { d1 } else { d0 });
        source.label.clear();
    }
    let rename = |wire: &mut Wire| {
        if *wire == Wire::Node(w) {
            *wire = Wire::Node(u);
        }
    };
    nodes.values_mut().flat_map(|n| n.sources.iter_mut()).for_each(rename);
    ports.iter_mut().for_each(rename);
    true
}

fn tidy_all<T: Scalar>(mbn: &mut Mbn<T>) -> bool {
    mbn.parts_mut().0.values_mut().fold(false, |acc, n| tidy_node(n) | acc)
}
