//! Brute-force reference computations and random instance generators shared
//! by the integration tests. Nothing here calls the library's own
//! composition, evaluation or conditioning code.
#![allow(dead_code)]

pub mod suites;

use std::collections::{BTreeMap, BTreeSet};

use cnu_core::{Marking, Mbn, MbnNode, Net, Observation, StochMatrix, TieBreak, Transition, Wire};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = StochMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mass {
    Stochastic,
    /// Column sums strictly below one.
    Sub,
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, m: usize, mass: Mass) -> M {
    let rows = 1usize << m;
    let mut data = vec![0.0; rows << n];
    for y in 0..1usize << n {
        let raw: Vec<f64> = (0..rows).map(|_| r.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let scale = match mass {
            Mass::Stochastic => 1.0,
            Mass::Sub => r.random_range(0.1..0.95),
        };
        for (x, v) in raw.into_iter().enumerate() {
            data[(x << n) | y] = v / total * scale;
        }
    }
    StochMatrix::new(n, m, data).unwrap()
}

pub fn random_dist(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..1usize << n).map(|_| r.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Entry-wise distance; infinite for different shapes.
pub fn dist(a: &M, b: &M) -> f64 {
    if (a.inputs(), a.outputs()) != (b.inputs(), b.outputs()) {
        return f64::INFINITY;
    }
    a.data().iter().zip(b.data()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn vec_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Sequential composition by explicit summation: `(p;q)(z|x) = sum_y q(z|y) p(y|x)`.
pub fn compose_oracle(p: &M, q: &M) -> M {
    assert_eq!(p.outputs(), q.inputs());
    StochMatrix::from_fn(p.inputs(), q.outputs(), |z, x| (0..p.rows()).map(|y| q.get(z, y) * p.get(y, x)).sum()).unwrap()
}

/// Tensor by splitting each index into its high and low parts.
pub fn tensor_oracle(p: &M, q: &M) -> M {
    StochMatrix::from_fn(p.inputs() + q.inputs(), p.outputs() + q.outputs(), |x, y| {
        let (x1, x2) = (x >> q.outputs(), x & (q.rows() - 1));
        let (y1, y2) = (y >> q.inputs(), y & (q.cols() - 1));
        p.get(x1, y1) * q.get(x2, y2)
    })
    .unwrap()
}

fn bit(code: usize, width: usize, i: usize) -> usize {
    code >> (width - 1 - i) & 1
}

/// Evaluation by summing over every assignment of the node wires.
pub fn naive_eval(mbn: &Mbn<f64>) -> M {
    let ids: Vec<u32> = mbn.nodes().keys().copied().collect();
    assert!(ids.len() <= 14, "naive evaluation is exponential");
    let idx: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let (n, k) = (mbn.inputs(), ids.len());
    let value = |w: &Wire, y: usize, a: usize| match *w {
        Wire::Input(i) => bit(y, n, i),
        Wire::Node(v) => bit(a, k, idx[&v]),
    };
    let mut out = vec![0.0; 1usize << (mbn.outputs().len() + n)];
    for y in 0..1usize << n {
        for a in 0..1usize << k {
            let mut p = 1.0;
            for (&v, node) in mbn.nodes() {
                let col = node.sources.iter().fold(0, |acc, w| acc << 1 | value(w, y, a));
                p *= node.matrix.get(bit(a, k, idx[&v]), col);
            }
            let x = mbn.outputs().iter().fold(0, |acc, w| acc << 1 | value(w, y, a));
            out[(x << n) | y] += p;
        }
    }
    StochMatrix::new(n, mbn.outputs().len(), out).unwrap()
}

/// Random network: node `j` reads random earlier wires, outputs are random
/// wires with repeats allowed. At least one node is added when outputs
/// would otherwise have nothing to read.
pub fn random_mbn(r: &mut ChaCha8Rng, inputs: usize, nodes: usize, outputs: usize, max_arity: usize, sub: bool) -> Mbn<f64> {
    let nodes = if inputs + nodes == 0 && outputs > 0 { 1 } else { nodes };
    let mut map = BTreeMap::new();
    for j in 0..nodes {
        let avail: Vec<Wire> = (0..inputs).map(Wire::Input).chain((0..j as u32).map(Wire::Node)).collect();
        let arity = if avail.is_empty() { 0 } else { r.random_range(0..=max_arity.min(avail.len())) };
        let sources: Vec<Wire> = sample(r, avail.len(), arity).into_iter().map(|i| avail[i]).collect();
        let mass = if sub && r.random_bool(0.3) { Mass::Sub } else { Mass::Stochastic };
        let matrix = random_matrix(r, arity, 1, mass);
        let label = format!("g{j}_{:08x}", r.random::<u32>());
        map.insert(j as u32, MbnNode { label, sources, matrix });
    }
    let wires: Vec<Wire> = (0..inputs).map(Wire::Input).chain((0..nodes as u32).map(Wire::Node)).collect();
    let outs = (0..outputs).map(|_| wires[r.random_range(0..wires.len())]).collect();
    Mbn::from_nodes(inputs, map, outs).unwrap()
}

/// Random ordinary Bayesian network over `n` places with fan-in up to `fan_in`.
pub fn random_obn(r: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Mbn<f64> {
    let mut map = BTreeMap::new();
    for j in 0..n {
        let arity = r.random_range(0..=fan_in.min(j));
        let sources = sample(r, j.max(1), arity).into_iter().map(|i| Wire::Node(i as u32)).collect();
        map.insert(j as u32, MbnNode { label: format!("p{j}"), sources, matrix: random_matrix(r, arity, 1, Mass::Stochastic) });
    }
    Mbn::from_nodes(0, map, (0..n as u32).map(Wire::Node).collect()).unwrap()
}

/// Random net; pre- and postsets are disjoint and may be empty.
pub fn random_net(r: &mut ChaCha8Rng, n: usize, transitions: usize) -> Net {
    let places: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let ts = (0..transitions)
        .map(|i| {
            let size = r.random_range(1..=n.min(4));
            let picked = sample(r, n, size).into_vec();
            let split = r.random_range(0..=picked.len());
            Transition {
                name: format!("t{i}"),
                pre: picked[..split].iter().copied().collect(),
                post: picked[split..].iter().copied().collect(),
            }
        })
        .collect();
    Net::new(places, ts, Marking::empty(n), BTreeMap::new()).unwrap()
}

/// Conditional distribution after observing `outcome`, straight from the
/// definition: enumerate markings, keep those consistent with the
/// observation, move enabled ones along `t` for a success, renormalize.
pub fn brute_observe(net: &Net, mass: &[f64], t: &str, outcome: Observation) -> Option<Vec<f64>> {
    let n = net.place_count();
    let tr = net.transition(t).unwrap();
    let mut out = vec![0.0; mass.len()];
    let mut total = 0.0;
    for (code, &p) in mass.iter().enumerate() {
        let m = Marking::from_code(code, n);
        let pre_ok = tr.pre.iter().all(|&s| m.get(s));
        let post_ok = tr.post.iter().all(|&s| !m.get(s));
        let target = match outcome {
            Observation::Success if pre_ok && post_ok => match net.fire(&m, t, TieBreak::PreFirst).unwrap() {
                cnu_core::FireOutcome::Success(next) => Some(next.code()),
                _ => unreachable!("enabled transitions fire"),
            },
            Observation::FailPre if !pre_ok => Some(code),
            Observation::FailPost if !post_ok => Some(code),
            _ => None,
        };
        if let Some(c) = target {
            out[c] += p;
            total += p;
        }
    }
    (total > 0.0).then(|| out.into_iter().map(|v| v / total).collect())
}

/// Marginal over `places` (in that order) by summing the joint.
pub fn brute_marginal(mass: &[f64], n: usize, places: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << places.len()];
    for (code, &p) in mass.iter().enumerate() {
        let c = places.iter().fold(0, |acc, &s| acc << 1 | bit(code, n, s));
        out[c] += p;
    }
    out
}

pub fn node_set(ids: impl IntoIterator<Item = u32>) -> BTreeSet<u32> {
    ids.into_iter().collect()
}
