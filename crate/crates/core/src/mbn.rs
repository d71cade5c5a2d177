//! Modular Bayesian networks: a causality graph whose generators are
//! interpreted as `2^n x 2` (sub-)stochastic matrices.
//!
//! The semantics of a network is the sum over all wire assignments of the
//! product of node entries. [`Mbn::eval`] computes it by folding nodes into a
//! table over the currently live wires, eliminating a wire as soon as its
//! last consumer has been folded in.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{successor_map, topo_order_of, CausalityGraph, GraphJson, Node, NodeId, Wire};
use crate::matrix::{check_type, Classification, MatrixJson, MatrixKind, StochMatrix};
use crate::net::Marking;
use crate::scalar::Scalar;

/// Largest number of simultaneously live wires during evaluation.
pub const MAX_FRONTIER: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MbnNode<T: Scalar = f64> {
    pub label: String,
    pub sources: Vec<Wire>,
    pub matrix: StochMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mbn<T: Scalar = f64> {
    inputs: usize,
    nodes: BTreeMap<NodeId, MbnNode<T>>,
    outputs: Vec<Wire>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObnFailure {
    HasInputs,
    OutNotBijection,
    NodeNotStochastic(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObnCertificate {
    IsObn,
    Fails(ObnFailure),
}

impl ObnCertificate {
    pub fn holds(self) -> bool {
        self == ObnCertificate::IsObn
    }
}

impl<T: Scalar> Mbn<T> {
    /// Attaches matrices to the generators of `graph`.
    pub fn new(graph: CausalityGraph, generators: BTreeMap<String, StochMatrix<T>>) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for (&id, node) in graph.nodes() {
            let matrix = generators
                .get(&node.label)
                .ok_or_else(|| Error::InvalidMbn(format!("no matrix for generator `{}`", node.label)))?;
            check_node_type(id, node.sources.len(), matrix)?;
            nodes.insert(id, MbnNode { label: node.label.clone(), sources: node.sources.clone(), matrix: matrix.clone() });
        }
        Ok(Mbn { inputs: graph.inputs(), nodes, outputs: graph.outputs().to_vec() })
    }

    /// Builds a network from per-node matrices; nodes sharing a label must
    /// carry identical matrices.
    pub fn from_nodes(inputs: usize, nodes: BTreeMap<NodeId, MbnNode<T>>, outputs: Vec<Wire>) -> Result<Self> {
        let mbn = Mbn { inputs, nodes, outputs };
        mbn.graph_checked()?;
        let mut by_label: HashMap<&str, &StochMatrix<T>> = HashMap::new();
        for (&id, node) in &mbn.nodes {
            check_node_type(id, node.sources.len(), &node.matrix)?;
            if let Some(prev) = by_label.insert(&node.label, &node.matrix) {
                if prev != &node.matrix {
                    return Err(Error::InvalidMbn(format!("label `{}` carries two different matrices", node.label)));
                }
            }
        }
        Ok(mbn)
    }

    pub(crate) fn from_nodes_unchecked(inputs: usize, nodes: BTreeMap<NodeId, MbnNode<T>>, outputs: Vec<Wire>) -> Self {
        Mbn { inputs, nodes, outputs }
    }

    /// Independent places; `probs[i]` is the probability that place `i` is marked.
    pub fn independent(probs: &[T]) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for (i, &p) in probs.iter().enumerate() {
            let matrix = StochMatrix::column_desc(&[p, T::one() - p])?;
            nodes.insert(i as NodeId, MbnNode { label: format!("p{}", i + 1), sources: vec![], matrix });
        }
        let outputs = (0..probs.len() as NodeId).map(Wire::Node).collect();
        Mbn::from_nodes(0, nodes, outputs)
    }

    /// Point mass on a single marking.
    pub fn point(m: &Marking) -> Self {
        let probs: Vec<T> = m.bits().iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
        Mbn::independent(&probs).expect("unit columns are valid")
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> &[Wire] {
        &self.outputs
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, MbnNode<T>> {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> Result<&MbnNode<T>> {
        self.nodes.get(&v).ok_or(Error::UnknownNode(v))
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut BTreeMap<NodeId, MbnNode<T>>, &mut Vec<Wire>) {
        (&mut self.nodes, &mut self.outputs)
    }

    pub fn graph(&self) -> CausalityGraph {
        self.graph_checked().expect("network graph is valid by construction")
    }

    fn graph_checked(&self) -> Result<CausalityGraph> {
        let nodes = self
            .nodes
            .iter()
            .map(|(&id, n)| (id, Node { label: n.label.clone(), sources: n.sources.clone() }))
            .collect();
        CausalityGraph::new(self.inputs, nodes, self.outputs.clone())
    }

    pub fn generators(&self) -> BTreeMap<String, StochMatrix<T>> {
        self.nodes.values().map(|n| (n.label.clone(), n.matrix.clone())).collect()
    }

    pub fn topo_order(&self) -> Vec<NodeId> {
        topo_order_of(&self.nodes, |n| &n.sources)
    }

    pub(crate) fn successors(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        successor_map(&self.nodes, |n| &n.sources)
    }

    pub(crate) fn next_id(&self) -> NodeId {
        self.nodes.keys().next_back().map_or(0, |m| m + 1)
    }

    /// Gives every node with an empty label a fresh, unused one.
    pub(crate) fn assign_fresh_labels(&mut self) {
        let mut used: BTreeSet<String> = self.nodes.values().map(|n| n.label.clone()).collect();
        for (id, node) in self.nodes.iter_mut() {
            if node.label.is_empty() {
                let mut label = format!("v{id}");
                let mut k = 1;
                while used.contains(&label) {
                    label = format!("v{id}_{k}");
                    k += 1;
                }
                used.insert(label.clone());
                node.label = label;
            }
        }
    }

    pub fn compose(&self, next: &Mbn<T>) -> Result<Mbn<T>> {
        let graph = self.graph().compose(&next.graph())?;
        Mbn::new(graph, merge_generators(self, next)?)
    }

    pub fn tensor(&self, other: &Mbn<T>) -> Result<Mbn<T>> {
        let graph = self.graph().tensor(&other.graph());
        Mbn::new(graph, merge_generators(self, other)?)
    }

    pub fn is_obn(&self) -> ObnCertificate {
        if self.inputs != 0 {
            return ObnCertificate::Fails(ObnFailure::HasInputs);
        }
        let targets: BTreeSet<NodeId> = self.outputs.iter().filter_map(|w| w.node()).collect();
        if targets.len() != self.outputs.len() || targets.len() != self.nodes.len() {
            return ObnCertificate::Fails(ObnFailure::OutNotBijection);
        }
        match self.nodes.iter().find(|(_, n)| n.matrix.classify() != Classification::Stochastic) {
            Some((&id, _)) => ObnCertificate::Fails(ObnFailure::NodeNotStochastic(id)),
            None => ObnCertificate::IsObn,
        }
    }

    /// Every node matrix is free of NaNs and infinities.
    pub fn is_finite(&self) -> bool {
        self.nodes.values().all(|n| n.matrix.is_finite())
    }

    /// The matrix denoted by the network.
    pub fn eval(&self) -> Result<StochMatrix<T>> {
        self.eval_wires(&self.outputs, false)
    }

    /// Joint distribution of the outputs listed in `which`, in that order.
    pub fn marginal(&self, which: &[usize]) -> Result<StochMatrix<T>> {
        if self.inputs != 0 {
            return Err(Error::InvalidMbn("marginals need a network without inputs".into()));
        }
        let wires = which
            .iter()
            .map(|&i| self.outputs.get(i).copied().ok_or(Error::UnknownOutput(i)))
            .collect::<Result<Vec<_>>>()?;
        self.eval_wires(&wires, true)
    }

    /// Total mass of a network without inputs; one unless sub-stochastic
    /// nodes are present.
    pub fn total_mass(&self) -> Result<T> {
        Ok(self.eval_wires(&[], true)?.get(0, 0))
    }

    /// Evaluates the network with only `targets` kept as outputs. With
    /// `prune`, stochastic nodes whose wires cannot influence the targets or
    /// any sub-stochastic node are skipped, since they sum out to one.
    pub(crate) fn eval_wires(&self, targets: &[Wire], prune: bool) -> Result<StochMatrix<T>> {
        let keep: BTreeSet<NodeId> = if prune {
            let mut seeds: Vec<NodeId> = targets.iter().filter_map(|w| w.node()).collect();
            seeds.extend(
                self.nodes
                    .iter()
                    .filter(|(_, n)| n.matrix.classify() != Classification::Stochastic)
                    .map(|(&id, _)| id),
            );
            self.ancestors_inclusive(seeds)
        } else {
            self.nodes.keys().copied().collect()
        };
        let plan = self.plan(&keep, targets)?;
        let out_bits = targets.len();
        check_type(self.inputs, out_bits)?;
        let mut data = vec![T::zero(); 1 << (self.inputs + out_bits)];
        let cols = 1usize << self.inputs;
        for y in 0..cols {
            let column = self.run_plan(&plan, targets, y);
            for (x, v) in column.into_iter().enumerate() {
                data[x * cols + y] = v;
            }
        }
        Ok(StochMatrix::from_raw(self.inputs, out_bits, data))
    }

    fn ancestors_inclusive(&self, seeds: Vec<NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = seeds;
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.nodes[&v].sources.iter().filter_map(|w| w.node()));
            }
        }
        seen
    }

    /// Greedy elimination order over `keep`: repeatedly fold in the ready
    /// node leaving the narrowest table, smallest id on ties.
    fn plan(&self, keep: &BTreeSet<NodeId>, targets: &[Wire]) -> Result<Vec<Step>> {
        let target_nodes: BTreeSet<NodeId> = targets.iter().filter_map(|w| w.node()).collect();
        let distinct_sources = |v: NodeId| -> Vec<NodeId> {
            let mut s: Vec<NodeId> = self.nodes[&v].sources.iter().filter_map(|w| w.node()).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let mut uses: HashMap<NodeId, usize> = keep.iter().map(|&v| (v, usize::from(target_nodes.contains(&v)))).collect();
        let mut waiting: HashMap<NodeId, usize> = HashMap::new();
        let mut consumers: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for &v in keep {
            let srcs = distinct_sources(v);
            waiting.insert(v, srcs.len());
            for s in srcs {
                *uses.get_mut(&s).expect("kept nodes are closed under sources") += 1;
                consumers.entry(s).or_default().push(v);
            }
        }
        let mut ready: BTreeSet<NodeId> = waiting.iter().filter(|(_, &w)| w == 0).map(|(&v, _)| v).collect();
        let mut width = 0usize;
        let mut steps = Vec::with_capacity(keep.len());
        while !ready.is_empty() {
            let (_, v) = ready
                .iter()
                .map(|&v| {
                    let freed = distinct_sources(v).iter().filter(|s| uses[s] == 1).count();
                    let after = width + 1 - freed - usize::from(uses[&v] == 0);
                    (after, v)
                })
                .min()
                .expect("ready set is nonempty");
            ready.remove(&v);
            if width + 1 > MAX_FRONTIER {
                return Err(Error::FrontierOverflow(width + 1));
            }
            width += 1;
            let mut drop = Vec::new();
            for s in distinct_sources(v) {
                let u = uses.get_mut(&s).unwrap();
                *u -= 1;
                if *u == 0 {
                    drop.push(s);
                }
            }
            if uses[&v] == 0 {
                drop.push(v);
            }
            width -= drop.len();
            for &c in consumers.get(&v).into_iter().flatten() {
                let w = waiting.get_mut(&c).unwrap();
                *w -= 1;
                if *w == 0 {
                    ready.insert(c);
                }
            }
            steps.push(Step { node: v, drop });
        }
        Ok(steps)
    }

    fn run_plan(&self, plan: &[Step], targets: &[Wire], y: usize) -> Vec<T> {
        let input_bit = |j: usize| (y >> (self.inputs - 1 - j)) & 1;
        let mut frontier: Vec<NodeId> = Vec::new();
        let mut table = vec![T::one()];
        for step in plan {
            let node = &self.nodes[&step.node];
            let arity = node.sources.len();
            let sources: Vec<Source> = node
                .sources
                .iter()
                .map(|w| match *w {
                    Wire::Input(j) => Source::Fixed(input_bit(j)),
                    Wire::Node(s) => Source::Pos(frontier.iter().position(|&f| f == s).expect("source is live")),
                })
                .collect();
            let half = table.len();
            let mut next = vec![T::zero(); half * 2];
            for (idx, &v) in table.iter().enumerate() {
                if v == T::zero() {
                    continue;
                }
                let mut col = 0usize;
                for (j, s) in sources.iter().enumerate() {
                    let bit = match *s {
                        Source::Fixed(b) => b,
                        Source::Pos(p) => (idx >> p) & 1,
                    };
                    col |= bit << (arity - 1 - j);
                }
                next[idx] = v * node.matrix.get(0, col);
                next[idx | half] = v * node.matrix.get(1, col);
            }
            frontier.push(step.node);
            table = next;
            for d in &step.drop {
                let p = frontier.iter().position(|f| f == d).expect("dropped wire is live");
                table = sum_out(&table, p);
                frontier.remove(p);
            }
        }

        let t = targets.len();
        let first_use: Vec<usize> = frontier
            .iter()
            .map(|f| targets.iter().position(|w| *w == Wire::Node(*f)).expect("live wire is a target"))
            .collect();
        (0..1usize << t)
            .map(|x| {
                let bit_of = |i: usize| (x >> (t - 1 - i)) & 1;
                let idx = first_use.iter().enumerate().fold(0, |acc, (p, &i)| acc | bit_of(i) << p);
                let consistent = targets.iter().enumerate().all(|(i, w)| {
                    let expected = match *w {
                        Wire::Input(j) => input_bit(j),
                        Wire::Node(v) => (idx >> frontier.iter().position(|&f| f == v).unwrap()) & 1,
                    };
                    expected == bit_of(i)
                });
                if consistent {
                    table[idx]
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> MbnJson {
        MbnJson {
            graph: self.graph().to_json(),
            generators: self.generators().into_iter().map(|(l, m)| (l, m.to_json())).collect(),
        }
    }

    pub fn from_json(json: &MbnJson) -> Result<Self> {
        let graph = CausalityGraph::from_json(&json.graph)?;
        let generators = json
            .generators
            .iter()
            .map(|(l, m)| Ok((l.clone(), StochMatrix::from_json(m)?)))
            .collect::<Result<_>>()?;
        Mbn::new(graph, generators)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Mbn::from_json(&serde_json::from_str(s)?)
    }
}

/// Network denoting a constant matrix: for node-free constants this is just
/// the wiring graph.
pub fn constant_network<T: Scalar>(kind: crate::graph::GraphConstant) -> Mbn<T> {
    Mbn::new(CausalityGraph::constant(kind), BTreeMap::new()).expect("constants have no generators")
}

/// Single node carrying `matrix`, wired to all inputs.
pub fn generator_network<T: Scalar>(label: &str, matrix: StochMatrix<T>) -> Result<Mbn<T>> {
    if matrix.outputs() != 1 {
        return Err(Error::InvalidArity(format!("generators have one output, got {}", matrix.outputs())));
    }
    let g = crate::graph::Generator::new(label, matrix.inputs());
    Mbn::new(CausalityGraph::generator(&g), BTreeMap::from([(label.to_string(), matrix)]))
}

/// Point-mass generator `1_b` as a network.
pub fn unit_network<T: Scalar>(label: &str, b: bool) -> Mbn<T> {
    generator_network(label, StochMatrix::constant(MatrixKind::One(b)).expect("valid constant")).expect("0 -> 1")
}

fn check_node_type<T: Scalar>(id: NodeId, arity: usize, m: &StochMatrix<T>) -> Result<()> {
    if m.inputs() != arity || m.outputs() != 1 {
        return Err(Error::InvalidMbn(format!(
            "node {id} has {arity} sources but its matrix has type {}->{}",
            m.inputs(),
            m.outputs()
        )));
    }
    Ok(())
}

fn merge_generators<T: Scalar>(a: &Mbn<T>, b: &Mbn<T>) -> Result<BTreeMap<String, StochMatrix<T>>> {
    let mut gens = a.generators();
    for (label, m) in b.generators() {
        if let Some(prev) = gens.get(&label) {
            if prev != &m {
                return Err(Error::InvalidMbn(format!("label `{label}` carries two different matrices")));
            }
        }
        gens.insert(label, m);
    }
    Ok(gens)
}

struct Step {
    node: NodeId,
    drop: Vec<NodeId>,
}

enum Source {
    Fixed(usize),
    Pos(usize),
}

fn sum_out<T: Scalar>(table: &[T], p: usize) -> Vec<T> {
    let low = (1usize << p) - 1;
    (0..table.len() / 2)
        .map(|i| {
            let i0 = ((i & !low) << 1) | (i & low);
            table[i0] + table[i0 | 1 << p]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbnJson {
    #[serde(flatten)]
    pub graph: GraphJson,
    pub generators: BTreeMap<String, MatrixJson>,
}
