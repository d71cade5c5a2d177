//! Removing sub-stochastic nodes and hidden nodes, turning a network back
//! into an ordinary Bayesian network.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{NodeId, Wire};
use crate::matrix::Classification;
use crate::mbn::{Mbn, MbnNode, MAX_FRONTIER};
use crate::scalar::{Scalar, ZERO_MASS};

use super::reversal::{eliminate_in_place, reverse_in_place};
use super::rewrite::rewrite_in_place;
use super::split::matrix_to_mbn;
use super::NormalizationReport;

/// Rescales every sub-stochastic node to a stochastic one, returning the
/// factored-out mass. Each such node is first moved to the front of the
/// network by reversing the arcs from its parents.
pub fn normalize<T: Scalar>(mbn: &Mbn<T>) -> Result<(Mbn<T>, NormalizationReport<T>)> {
    require_closed(mbn)?;
    let mut work = mbn.clone();
    let report = normalize_in_place(&mut work)?;
    if report.zero_mass {
        return Ok((mbn.clone(), report));
    }
    work.assign_fresh_labels();
    Ok((work, report))
}

pub(crate) fn normalize_in_place<T: Scalar>(mbn: &mut Mbn<T>) -> Result<NormalizationReport<T>> {
    let mut report = NormalizationReport::unit();
    loop {
        let order = mbn.topo_order();
        let Some(v) = order.iter().copied().find(|v| !mbn.nodes()[v].matrix.is_stochastic()) else {
            return Ok(report);
        };
        if mbn.nodes()[&v].matrix.classify() == Classification::Neither {
            return Err(Error::InvalidMbn(format!("node {v} is not sub-stochastic")));
        }
        loop {
            let order = mbn.topo_order();
            let parents: BTreeSet<NodeId> = mbn.nodes()[&v].sources.iter().filter_map(|w| w.node()).collect();
            let Some(last) = order.iter().rev().copied().find(|p| parents.contains(p)) else { break };
            reverse_in_place(mbn, last, v, true)?;
        }
        let node = mbn.parts_mut().0.get_mut(&v).expect("node found above");
        let q = node.matrix.get(0, 0) + node.matrix.get(1, 0);
        if q <= T::lit(ZERO_MASS) {
            report.p_b = T::zero();
            report.zero_mass = true;
            report.factors.push((v, q));
            return Ok(report);
        }
        node.matrix = node.matrix.scaled(T::one() / q);
        node.label.clear();
        report.p_b = report.p_b * q;
        report.factors.push((v, q));
    }
}

/// Normalization by brute force: the sub-stochastic nodes and all their
/// ancestors are evaluated jointly, rescaled, and re-expanded as a chain.
/// Exponential in the size of that ancestor set; meant for cross-checking.
pub fn normalize_via_closure<T: Scalar>(mbn: &Mbn<T>) -> Result<(Mbn<T>, NormalizationReport<T>)> {
    require_closed(mbn)?;
    let sub: BTreeSet<NodeId> =
        mbn.nodes().iter().filter(|(_, n)| !n.matrix.is_stochastic()).map(|(&v, _)| v).collect();
    if sub.is_empty() {
        return Ok((mbn.clone(), NormalizationReport::unit()));
    }
    let closure = mbn.graph().pred_star_of(&sub)?;
    if closure.len() > MAX_FRONTIER {
        return Err(Error::FrontierOverflow(closure.len()));
    }
    let order: Vec<NodeId> = mbn.topo_order().into_iter().filter(|v| closure.contains(v)).collect();
    let wires: Vec<Wire> = order.iter().map(|&v| Wire::Node(v)).collect();
    let joint = mbn.eval_wires(&wires, true)?;
    let q: T = joint.data().iter().copied().sum();
    let mut report = NormalizationReport::unit();
    report.factors.push((order[0], q));
    if q <= T::lit(ZERO_MASS) {
        report.p_b = T::zero();
        report.zero_mass = true;
        return Ok((mbn.clone(), report));
    }
    report.p_b = q;
    let chain = matrix_to_mbn(&joint.scaled(T::one() / q))?;
    let mut nodes: BTreeMap<NodeId, MbnNode<T>> =
        mbn.nodes().iter().filter(|(v, _)| !closure.contains(v)).map(|(&v, n)| (v, n.clone())).collect();
    for (j, node) in chain.nodes().values().enumerate() {
        let sources = node.sources.iter().map(|w| Wire::Node(order[w.node().expect("chain reads nodes") as usize])).collect();
        nodes.insert(order[j], MbnNode { label: String::new(), sources, matrix: node.matrix.clone() });
    }
    let mut result = Mbn::from_nodes_unchecked(0, nodes, mbn.outputs().to_vec());
    rewrite_in_place(&mut result);
    result.assign_fresh_labels();
    Ok((result, report))
}

/// Full simplification: rewriting, normalization, and elimination of hidden
/// nodes. For a network whose ports reach every node the result is an
/// ordinary Bayesian network with the same normalized joint.
pub fn simplify<T: Scalar>(mbn: &Mbn<T>) -> Result<(Mbn<T>, NormalizationReport<T>)> {
    require_closed(mbn)?;
    let mut work = mbn.clone();
    let report = simplify_in_place(&mut work)?;
    if report.zero_mass {
        return Ok((mbn.clone(), report));
    }
    Ok((work, report))
}

pub(crate) fn simplify_in_place<T: Scalar>(mbn: &mut Mbn<T>) -> Result<NormalizationReport<T>> {
    rewrite_in_place(mbn);
    let report = normalize_in_place(mbn)?;
    if report.zero_mass {
        return Ok(report);
    }
    rewrite_in_place(mbn);
    loop {
        let ported: BTreeSet<NodeId> = mbn.outputs().iter().filter_map(|w| w.node()).collect();
        let Some(v) = mbn.topo_order().into_iter().rev().find(|v| !ported.contains(v)) else { break };
        eliminate_in_place(mbn, v)?;
        rewrite_in_place(mbn);
    }
    mbn.assign_fresh_labels();
    Ok(report)
}

fn require_closed<T: Scalar>(mbn: &Mbn<T>) -> Result<()> {
    if mbn.inputs() != 0 {
        return Err(Error::InvalidMbn("normalization needs a network without inputs".into()));
    }
    Ok(())
}
