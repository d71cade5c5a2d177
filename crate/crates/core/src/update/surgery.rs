//! Local surgery on output wires: the network counterparts of the dense
//! `set`, `assert` and negative `assert` operations.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::Wire;
use crate::matrix::{MatrixKind, StochMatrix};
use crate::mbn::{Mbn, MbnNode};
use crate::scalar::Scalar;

use super::split::matrix_to_mbn;

/// Overwrites the listed outputs with the constant `b`.
pub fn insert_set<T: Scalar>(mbn: &Mbn<T>, outputs: &[usize], b: bool) -> Result<Mbn<T>> {
    let matrix = StochMatrix::from_fn(1, 1, |x, _| if (x == 1) == b { T::one() } else { T::zero() })?;
    splice_unary(mbn, outputs, matrix, &format!("set{}", u8::from(b)))
}

/// Keeps only the mass where every listed output equals `b`.
pub fn insert_assert<T: Scalar>(mbn: &Mbn<T>, outputs: &[usize], b: bool) -> Result<Mbn<T>> {
    let matrix = StochMatrix::constant(MatrixKind::F(1, !b))?;
    splice_unary(mbn, outputs, matrix, &format!("assert{}", u8::from(b)))
}

/// Removes the mass where every listed output equals `b`.
pub fn insert_nassert<T: Scalar>(mbn: &Mbn<T>, outputs: &[usize], b: bool) -> Result<Mbn<T>> {
    let outs = distinct_outputs(mbn, outputs)?;
    if outs.is_empty() {
        return Err(Error::EmptyPlaceSet);
    }
    let chain = matrix_to_mbn(&StochMatrix::constant(MatrixKind::F(outs.len(), b))?)?;
    let mut result = mbn.clone();
    let base = result.next_id();
    let old: Vec<Wire> = outs.iter().map(|&s| mbn.outputs()[s]).collect();
    let (nodes, ports) = result.parts_mut();
    for (&id, node) in chain.nodes() {
        let sources = node
            .sources
            .iter()
            .map(|w| match *w {
                Wire::Input(i) => old[i],
                Wire::Node(v) => Wire::Node(base + v),
            })
            .collect();
        nodes.insert(base + id, MbnNode { label: String::new(), sources, matrix: node.matrix.clone() });
    }
    for (j, &s) in outs.iter().enumerate() {
        ports[s] = Wire::Node(base + chain.outputs()[j].node().expect("chain outputs are nodes"));
    }
    result.assign_fresh_labels();
    Ok(result)
}

fn distinct_outputs<T: Scalar>(mbn: &Mbn<T>, outputs: &[usize]) -> Result<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut outs = Vec::new();
    for &s in outputs {
        if s >= mbn.outputs().len() {
            return Err(Error::UnknownOutput(s));
        }
        if seen.insert(s) {
            outs.push(s);
        }
    }
    Ok(outs)
}

/// Inserts a copy of the `1 -> 1` node `matrix` behind each listed output.
fn splice_unary<T: Scalar>(mbn: &Mbn<T>, outputs: &[usize], matrix: StochMatrix<T>, label: &str) -> Result<Mbn<T>> {
    let outs = distinct_outputs(mbn, outputs)?;
    let clash = mbn.nodes().values().any(|n| n.label == label && n.matrix != matrix);
    let label = if clash { String::new() } else { label.to_string() };
    let mut result = mbn.clone();
    let mut next = result.next_id();
    let (nodes, ports) = result.parts_mut();
    for s in outs {
        nodes.insert(next, MbnNode { label: label.clone(), sources: vec![ports[s]], matrix: matrix.clone() });
        ports[s] = Wire::Node(next);
        next += 1;
    }
    result.assign_fresh_labels();
    Ok(result)
}
