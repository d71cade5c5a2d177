//! Seeded random nets with a prior belief over their places.

use std::collections::{BTreeMap, BTreeSet};

use cnu_core::{Mbn, MbnNode, Marking, Net, StochMatrix, Transition, Wire};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{WbError, WbResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PriorKind {
    /// Every place marked independently with probability `q`.
    IndependentBernoulli { q: f64 },
    /// A chain-ordered network where each place reads at most two earlier
    /// places, with random conditionals.
    RandomChainObn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_places: usize,
    pub n_transitions: usize,
    pub max_pre: usize,
    pub max_post: usize,
    pub marked_fraction: f64,
    pub prior: PriorKind,
    pub seed: u64,
}

impl GenParams {
    /// Sparse nets of the benchmark shape: one transition per place and
    /// pre- and postsets of at most two places.
    pub fn sparse(n_places: usize, seed: u64) -> Self {
        GenParams {
            n_places,
            n_transitions: n_places,
            max_pre: 2,
            max_post: 2,
            marked_fraction: 0.5,
            prior: PriorKind::RandomChainObn,
            seed,
        }
    }

    pub fn validate(&self) -> WbResult<()> {
        let bad = |m: &str| Err(WbError::InvalidParams(m.into()));
        if self.n_places == 0 || self.n_transitions == 0 {
            return bad("a net needs places and transitions");
        }
        if self.max_pre == 0 || self.max_post == 0 {
            return bad("max_pre and max_post must be at least 1");
        }
        if !(self.marked_fraction > 0.0 && self.marked_fraction < 1.0) {
            return bad("marked_fraction must lie strictly between 0 and 1");
        }
        if let PriorKind::IndependentBernoulli { q } = self.prior {
            if !(q > 0.0 && q < 1.0) {
                return bad("Bernoulli prior needs 0 < q < 1");
            }
        }
        Ok(())
    }
}

/// Generates a net and a prior ordinary Bayesian network over its places.
///
/// Transitions come in pairs where the second undoes the first; an odd
/// last slot holds one more undo of an earlier transition. A net that has
/// fired once therefore never deadlocks. The initial marking is drawn with
/// `marked_fraction`, redrawn until some transition is enabled, and always
/// has positive prior mass.
pub fn gen_net(params: &GenParams) -> WbResult<(Net, Mbn<f64>)> {
    params.validate()?;
    let n = params.n_places;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let places: Vec<String> = (1..=n).map(|i| format!("P{i}")).collect();
    let mut transitions: Vec<Transition> = Vec::with_capacity(params.n_transitions);
    while transitions.len() < params.n_transitions {
        if transitions.len() + 1 == params.n_transitions && !transitions.is_empty() {
            let undo = &transitions[rng.random_range(0..transitions.len())];
            let (pre, post) = (undo.post.clone(), undo.pre.clone());
            if !pre.is_empty() {
                transitions.push(Transition { name: format!("T{}", transitions.len() + 1), pre, post });
                continue;
            }
        }
        let pre_len = rng.random_range(1..=params.max_pre.min(n));
        let room = n - pre_len;
        let post_len = if room == 0 { 0 } else { rng.random_range(1..=params.max_post.min(room)) };
        let picked = sample(&mut rng, n, pre_len + post_len).into_vec();
        let pre: BTreeSet<usize> = picked[..pre_len].iter().copied().collect();
        let post: BTreeSet<usize> = picked[pre_len..].iter().copied().collect();
        let name = |k: usize| format!("T{k}");
        transitions.push(Transition { name: name(transitions.len() + 1), pre: pre.clone(), post: post.clone() });
        if transitions.len() < params.n_transitions && !post.is_empty() && post.len() <= params.max_pre {
            transitions.push(Transition { name: name(transitions.len() + 1), pre: post, post: pre });
        }
    }
    let mut initial = random_marking(n, params.marked_fraction, &mut rng);
    for _ in 0..MARKING_ATTEMPTS {
        if transitions.iter().any(|t| t.pre.iter().all(|&p| initial.get(p)) && t.post.iter().all(|&p| !initial.get(p))) {
            break;
        }
        initial = random_marking(n, params.marked_fraction, &mut rng);
    }
    let net = Net::new(places, transitions, initial, BTreeMap::new())?;
    let prior = match params.prior {
        PriorKind::IndependentBernoulli { q } => Mbn::independent(&vec![q; n])?,
        PriorKind::RandomChainObn => random_chain(n, &mut rng)?,
    };
    Ok((net, prior))
}

const MARKING_ATTEMPTS: usize = 1000;

fn random_marking(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Marking {
    Marking::from_bits((0..n).map(|_| rng.random_bool(fraction)).collect())
}

fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> WbResult<Mbn<f64>> {
    let mut nodes = BTreeMap::new();
    for i in 0..n {
        let fan_in = rng.random_range(0..=i.min(2));
        let parents: BTreeSet<usize> = sample(rng, i.max(1), fan_in).into_iter().collect();
        let cols = 1usize << fan_in;
        let mut data = vec![0.0; 2 * cols];
        for c in 0..cols {
            let (a, b) = (0.05 + 0.95 * rng.random::<f64>(), 0.05 + 0.95 * rng.random::<f64>());
            data[c] = a / (a + b);
            data[cols + c] = b / (a + b);
        }
        let node = MbnNode {
            label: format!("p{}", i + 1),
            sources: parents.into_iter().map(|p| Wire::Node(p as u32)).collect(),
            matrix: StochMatrix::new(fan_in, 1, data)?,
        };
        nodes.insert(i as u32, node);
    }
    Ok(Mbn::from_nodes(0, nodes, (0..n as u32).map(Wire::Node).collect())?)
}

/// Mass of one marking under an ordinary Bayesian network whose ports list
/// one node per place.
pub fn obn_mass_of(mbn: &Mbn<f64>, m: &Marking) -> WbResult<f64> {
    let port = port_map(mbn)?;
    let n = m.len();
    if n != port.len() {
        return Err(cnu_core::Error::MarkingLengthMismatch { expected: port.len(), got: n }.into());
    }
    let code = m.code();
    Ok(mass_at(mbn, &mbn.topo_order(), &port, code, n))
}

fn port_map(mbn: &Mbn<f64>) -> WbResult<BTreeMap<u32, usize>> {
    let n = mbn.outputs().len();
    let port: BTreeMap<u32, usize> =
        mbn.outputs().iter().enumerate().filter_map(|(i, w)| w.node().map(|v| (v, i))).collect();
    if port.len() != n || mbn.nodes().len() != n || mbn.inputs() != 0 {
        return Err(cnu_core::Error::NotObn("expected one node per place".into()).into());
    }
    Ok(port)
}

fn mass_at(mbn: &Mbn<f64>, order: &[u32], port: &BTreeMap<u32, usize>, code: usize, n: usize) -> f64 {
    let bit = |place: usize| code >> (n - 1 - place) & 1;
    let mut p = 1.0;
    for v in order {
        let node = &mbn.nodes()[v];
        let col = node.sources.iter().fold(0, |acc, w| acc << 1 | bit(port[&w.node().expect("no inputs")]));
        p *= node.matrix.get(bit(port[v]), col);
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Expands an ordinary Bayesian network over `n` places into its joint,
/// one marking at a time. Unlike network evaluation this has no width cap.
pub fn expand_obn(mbn: &Mbn<f64>) -> WbResult<Vec<f64>> {
    let port = port_map(mbn)?;
    let n = port.len();
    let order = mbn.topo_order();
    Ok((0..1usize << n).map(|code| mass_at(mbn, &order, &port, code, n)).collect())
}
