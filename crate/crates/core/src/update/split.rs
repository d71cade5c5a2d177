//! Splitting a matrix into a marginal and a conditional, and representing an
//! arbitrary matrix as a chain of single-output nodes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{NodeId, Wire};
use crate::matrix::{StochMatrix, MAX_ARITY};
use crate::mbn::{Mbn, MbnNode};
use crate::scalar::Scalar;

/// Entry tolerance when deciding that two conditional columns agree.
pub(crate) const MERGE_TOL: f64 = 1e-12;

/// Splits `P: n -> m` into `front: n -> m-k` and `back: (m-k+n) -> k` with
/// `front(x|z) = sum_y P(xy|z)` and `back(y|xz) = P(xy|z) / front(x|z)`.
/// Columns of `back` where `front` vanishes are uniform.
pub fn split_matrix<T: Scalar>(p: &StochMatrix<T>, k: usize) -> Result<(StochMatrix<T>, StochMatrix<T>)> {
    let (front, mut back, free) = split_with_free(p, k)?;
    fill_uniform(&mut back, &free);
    Ok((front, back))
}

/// Like [`split_matrix`] but leaves the undetermined `back` columns marked
/// in the returned mask instead of filling them.
pub(crate) fn split_with_free<T: Scalar>(
    p: &StochMatrix<T>,
    k: usize,
) -> Result<(StochMatrix<T>, StochMatrix<T>, Vec<bool>)> {
    let (n, m) = (p.inputs(), p.outputs());
    if k == 0 || k >= m {
        return Err(Error::InvalidK { k, outputs: m });
    }
    let keep = m - k;
    let mut front = StochMatrix::zeros(n, keep)?;
    let mut back = StochMatrix::zeros(keep + n, k)?;
    let mut free = vec![false; 1 << (keep + n)];
    for x in 0..1usize << keep {
        for z in 0..1usize << n {
            let f: T = (0..1usize << k).map(|y| p.get(x << k | y, z)).sum();
            front.set(x, z, f);
            let col = x << n | z;
            if f > T::zero() {
                for y in 0..1usize << k {
                    back.set(y, col, p.get(x << k | y, z) / f);
                }
            } else {
                free[col] = true;
            }
        }
    }
    Ok((front, back, free))
}

pub(crate) fn fill_uniform<T: Scalar>(m: &mut StochMatrix<T>, free: &[bool]) {
    let u = T::one() / T::lit(m.rows() as f64);
    for (col, _) in free.iter().enumerate().filter(|(_, &f)| f) {
        for x in 0..m.rows() {
            m.set(x, col, u);
        }
    }
}

/// Fills undetermined columns so that the matrix ignores as many inputs as
/// possible: an input is ignorable when every pair of determined columns
/// differing only in that input agree, and then each undetermined column
/// copies its determined partner. What remains undetermined becomes uniform.
pub(crate) fn fill_sparse<T: Scalar>(m: &mut StochMatrix<T>, free: &[bool]) {
    let (r, rows) = (m.inputs(), m.rows());
    let tol = T::lit(MERGE_TOL);
    let mut cols: Vec<Option<Vec<T>>> = (0..m.cols())
        .map(|c| (!free[c]).then(|| (0..rows).map(|x| m.get(x, c)).collect()))
        .collect();
    for j in 0..r {
        let bit = 1usize << (r - 1 - j);
        let pairs = || (0..cols.len()).filter(move |c| c & bit == 0).map(move |c| (c, c | bit));
        let agree = pairs().all(|(a, b)| match (&cols[a], &cols[b]) {
            (Some(u), Some(v)) => u.iter().zip(v).all(|(s, t)| (*s - *t).abs() <= tol),
            _ => true,
        });
        if !agree {
            continue;
        }
        for (a, b) in pairs().collect::<Vec<_>>() {
            match (cols[a].is_some(), cols[b].is_some()) {
                (true, _) => cols[b] = cols[a].clone(),
                (false, true) => cols[a] = cols[b].clone(),
                (false, false) => {}
            }
        }
    }
    let u = T::one() / T::lit(rows as f64);
    for (c, col) in cols.into_iter().enumerate() {
        for x in 0..rows {
            m.set(x, c, col.as_ref().map_or(u, |v| v[x]));
        }
    }
}

/// Represents `M: n -> m` as a chain of `m` nodes; node `j` reads the
/// earlier chain nodes and then all inputs. Only the first node may be
/// sub-stochastic.
pub fn matrix_to_mbn<T: Scalar>(mat: &StochMatrix<T>) -> Result<Mbn<T>> {
    let (n, m) = (mat.inputs(), mat.outputs());
    if m == 0 {
        return Err(Error::InvalidArity("a chain needs at least one output".into()));
    }
    if n + m - 1 > MAX_ARITY {
        return Err(Error::FrontierOverflow(n + m - 1));
    }
    let mut matrices = Vec::with_capacity(m);
    let mut current = mat.clone();
    for _ in 1..m {
        let (front, mut back, free) = split_with_free(&current, 1)?;
        fill_sparse(&mut back, &free);
        matrices.push(back);
        current = front;
    }
    matrices.push(current);
    matrices.reverse();

    let mut nodes = BTreeMap::new();
    for (j, matrix) in matrices.into_iter().enumerate() {
        let mut sources: Vec<Wire> = (0..j as NodeId).map(Wire::Node).collect();
        sources.extend((0..n).map(Wire::Input));
        nodes.insert(j as NodeId, MbnNode { label: String::new(), sources, matrix });
    }
    let mut mbn = Mbn::from_nodes_unchecked(n, nodes, (0..m as NodeId).map(Wire::Node).collect());
    mbn.assign_fresh_labels();
    Ok(mbn)
}
