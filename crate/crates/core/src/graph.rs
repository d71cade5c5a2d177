//! Causality graphs: acyclic term graphs whose nodes are generators of type
//! `n -> 1`, wired to input ports or to other nodes. They are the arrows of
//! the free PROP with a commutative comonoid on every wire: a wire may be
//! read many times (duplication) or never (termination), but two wires are
//! never merged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Either an input port (numbered from zero) or the output of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Wire {
    Input(usize),
    Node(NodeId),
}

impl Wire {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Wire::Node(v) => Some(v),
            Wire::Input(_) => None,
        }
    }
}

/// Textual form used in JSON: `in:1` for the first input port, `node:7`.
impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wire::Input(j) => write!(f, "in:{}", j + 1),
            Wire::Node(v) => write!(f, "node:{v}"),
        }
    }
}

impl FromStr for Wire {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed wire `{s}`"));
        if let Some(rest) = s.strip_prefix("in:") {
            let j: usize = rest.parse().map_err(|_| bad())?;
            if j == 0 {
                return Err(bad());
            }
            Ok(Wire::Input(j - 1))
        } else if let Some(rest) = s.strip_prefix("node:") {
            Ok(Wire::Node(rest.parse().map_err(|_| bad())?))
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<String> for Wire {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Wire> for String {
    fn from(w: Wire) -> String {
        w.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Generator {
    pub label: String,
    pub arity: usize,
}

impl Generator {
    pub fn new(label: impl Into<String>, arity: usize) -> Self {
        Generator { label: label.into(), arity }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub label: String,
    pub sources: Vec<Wire>,
}

/// Node-free wiring graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphConstant {
    Id(usize),
    Sigma(usize, usize),
    Nabla(usize),
    Top(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeQueryKind {
    Pred,
    Succ,
    PredStar,
    /// All nodes on directed paths from the queried node to the given one.
    Path(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalityGraph {
    inputs: usize,
    nodes: BTreeMap<NodeId, Node>,
    outputs: Vec<Wire>,
}

/// Result of cutting a graph around a path-closed node set:
/// `graph ≅ b1 ; (id_k ⊗ b2) ; b3`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub b1: CausalityGraph,
    pub k: usize,
    pub b2: CausalityGraph,
    pub b3: CausalityGraph,
}

impl CausalityGraph {
    pub fn new(inputs: usize, nodes: BTreeMap<NodeId, Node>, outputs: Vec<Wire>) -> Result<Self> {
        let g = CausalityGraph { inputs, nodes, outputs };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let check = |w: &Wire, ctx: &str| match *w {
            Wire::Input(j) if j >= self.inputs => {
                Err(Error::InvalidGraph(format!("{ctx} reads input {} of {}", j + 1, self.inputs)))
            }
            Wire::Node(v) if !self.nodes.contains_key(&v) => {
                Err(Error::InvalidGraph(format!("{ctx} reads missing node {v}")))
            }
            _ => Ok(()),
        };
        let mut arities: HashMap<&str, usize> = HashMap::new();
        for (id, node) in &self.nodes {
            for w in &node.sources {
                check(w, &format!("node {id}"))?;
            }
            let arity = *arities.entry(&node.label).or_insert(node.sources.len());
            if arity != node.sources.len() {
                return Err(Error::InvalidGraph(format!(
                    "generator `{}` used with arities {arity} and {}",
                    node.label,
                    node.sources.len()
                )));
            }
        }
        for (i, w) in self.outputs.iter().enumerate() {
            check(w, &format!("output {}", i + 1))?;
        }
        if self.topo_order().len() != self.nodes.len() {
            return Err(Error::InvalidGraph("graph has a cycle".into()));
        }
        Ok(())
    }

    pub fn identity(n: usize) -> Self {
        CausalityGraph { inputs: n, nodes: BTreeMap::new(), outputs: (0..n).map(Wire::Input).collect() }
    }

    pub fn constant(kind: GraphConstant) -> Self {
        let (inputs, outputs): (usize, Vec<usize>) = match kind {
            GraphConstant::Id(n) => (n, (0..n).collect()),
            GraphConstant::Sigma(n, m) => (n + m, (n..n + m).chain(0..n).collect()),
            GraphConstant::Nabla(n) => (n, (0..n).chain(0..n).collect()),
            GraphConstant::Top(n) => (n, vec![]),
        };
        CausalityGraph { inputs, nodes: BTreeMap::new(), outputs: outputs.into_iter().map(Wire::Input).collect() }
    }

    /// The single-node graph `B_g`.
    pub fn generator(g: &Generator) -> Self {
        let node = Node { label: g.label.clone(), sources: (0..g.arity).map(Wire::Input).collect() };
        CausalityGraph { inputs: g.arity, nodes: BTreeMap::from([(0, node)]), outputs: vec![Wire::Node(0)] }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> &[Wire] {
        &self.outputs
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Node> {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> Result<&Node> {
        self.nodes.get(&v).ok_or(Error::UnknownNode(v))
    }

    /// Renames nodes of `other` that clash with ids in `self`.
    fn disjoint_copy(&self, other: &CausalityGraph) -> (BTreeMap<NodeId, NodeId>, NodeId) {
        let mut next = self
            .nodes
            .keys()
            .chain(other.nodes.keys())
            .max()
            .map_or(0, |m| m + 1);
        let mut rename = BTreeMap::new();
        for &id in other.nodes.keys() {
            if self.nodes.contains_key(&id) {
                rename.insert(id, next);
                next += 1;
            } else {
                rename.insert(id, id);
            }
        }
        (rename, next)
    }

    /// Sequential composition `self ; next`.
    pub fn compose(&self, next: &CausalityGraph) -> Result<CausalityGraph> {
        if self.outputs.len() != next.inputs {
            return Err(Error::TypeMismatch(format!(
                "cannot compose {}->{} with {}->{}",
                self.inputs,
                self.outputs.len(),
                next.inputs,
                next.outputs.len()
            )));
        }
        let (rename, _) = self.disjoint_copy(next);
        let map = |w: &Wire| match *w {
            Wire::Input(j) => self.outputs[j],
            Wire::Node(v) => Wire::Node(rename[&v]),
        };
        let mut nodes = self.nodes.clone();
        for (id, node) in &next.nodes {
            nodes.insert(rename[id], Node { label: node.label.clone(), sources: node.sources.iter().map(map).collect() });
        }
        let outputs = next.outputs.iter().map(map).collect();
        CausalityGraph::new(self.inputs, nodes, outputs)
    }

    /// Parallel composition; `self` occupies the leading ports.
    pub fn tensor(&self, other: &CausalityGraph) -> CausalityGraph {
        let (rename, _) = self.disjoint_copy(other);
        let shift = self.inputs;
        let map = |w: &Wire| match *w {
            Wire::Input(j) => Wire::Input(j + shift),
            Wire::Node(v) => Wire::Node(rename[&v]),
        };
        let mut nodes = self.nodes.clone();
        for (id, node) in &other.nodes {
            nodes.insert(rename[id], Node { label: node.label.clone(), sources: node.sources.iter().map(map).collect() });
        }
        let mut outputs = self.outputs.clone();
        outputs.extend(other.outputs.iter().map(map));
        CausalityGraph { inputs: self.inputs + other.inputs, nodes, outputs }
    }

    /// Kahn's algorithm, smallest ready id first. Shorter than the node
    /// count iff the graph has a cycle.
    pub fn topo_order(&self) -> Vec<NodeId> {
        topo_order_of(&self.nodes, |n| &n.sources)
    }

    pub fn pred(&self, v: NodeId) -> Result<BTreeSet<NodeId>> {
        Ok(self.node(v)?.sources.iter().filter_map(|w| w.node()).collect())
    }

    pub fn succ(&self, v: NodeId) -> Result<BTreeSet<NodeId>> {
        self.node(v)?;
        Ok(self
            .nodes
            .iter()
            .filter(|(_, n)| n.sources.contains(&Wire::Node(v)))
            .map(|(&id, _)| id)
            .collect())
    }

    /// Transitive predecessors of a set, excluding the set itself unless
    /// reached through a path.
    pub fn pred_star_of(&self, set: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeId> = Vec::new();
        for &v in set {
            stack.extend(self.pred(v)?);
        }
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.pred(v)?);
            }
        }
        Ok(seen)
    }

    fn succ_star_of(&self, v: NodeId) -> BTreeSet<NodeId> {
        let succ = successor_map(&self.nodes, |n| &n.sources);
        let mut seen = BTreeSet::new();
        let mut stack = succ.get(&v).cloned().unwrap_or_default();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(succ.get(&x).into_iter().flatten());
            }
        }
        seen
    }

    /// Nodes lying on some directed path from `v` to `w`, both ends included.
    pub fn path(&self, v: NodeId, w: NodeId) -> Result<BTreeSet<NodeId>> {
        self.node(v)?;
        self.node(w)?;
        if v == w {
            return Ok(BTreeSet::from([v]));
        }
        let mut down = self.succ_star_of(v);
        down.insert(v);
        let mut up = self.pred_star_of(&BTreeSet::from([w]))?;
        up.insert(w);
        if !down.contains(&w) {
            return Ok(BTreeSet::new());
        }
        Ok(down.intersection(&up).copied().collect())
    }

    pub fn query(&self, v: NodeId, kind: NodeQueryKind) -> Result<BTreeSet<NodeId>> {
        match kind {
            NodeQueryKind::Pred => self.pred(v),
            NodeQueryKind::Succ => self.succ(v),
            NodeQueryKind::PredStar => {
                self.node(v)?;
                self.pred_star_of(&BTreeSet::from([v]))
            }
            NodeQueryKind::Path(w) => self.path(v, w),
        }
    }

    /// No node outside `set` lies on a path between two members.
    pub fn is_path_closed(&self, set: &BTreeSet<NodeId>) -> Result<bool> {
        for &v in set {
            self.node(v)?;
        }
        let above = self.pred_star_of(set)?;
        for &v in set {
            if self.succ_star_of(v).iter().any(|x| !set.contains(x) && above.contains(x)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Cuts the graph around a path-closed set `part` into
    /// `b1 ; (id_k ⊗ b2) ; b3`, with `b2` holding exactly `part` and one
    /// output per member.
    pub fn decompose(&self, part: &BTreeSet<NodeId>) -> Result<Decomposition> {
        if !self.is_path_closed(part)? {
            return Err(Error::NotPathClosed);
        }
        let topo = self.topo_order();
        let above = self.pred_star_of(part)?;
        let v1: Vec<NodeId> = topo.iter().copied().filter(|v| above.contains(v) && !part.contains(v)).collect();
        let v2: Vec<NodeId> = topo.iter().copied().filter(|v| part.contains(v)).collect();
        let v3: Vec<NodeId> = topo.iter().copied().filter(|v| !above.contains(v) && !part.contains(v)).collect();
        let n = self.inputs;
        let k = n + v1.len();

        let mut feeds: Vec<Wire> = Vec::new();
        for v in &v2 {
            for w in &self.nodes[v].sources {
                let internal = matches!(w, Wire::Node(x) if part.contains(x));
                if !internal && !feeds.contains(w) {
                    feeds.push(*w);
                }
            }
        }

        let b1_nodes = v1.iter().map(|v| (*v, self.nodes[v].clone())).collect();
        let mut b1_out: Vec<Wire> = (0..n).map(Wire::Input).collect();
        b1_out.extend(v1.iter().map(|&v| Wire::Node(v)));
        b1_out.extend(feeds.iter().copied());
        let b1 = CausalityGraph::new(n, b1_nodes, b1_out)?;

        let to_b2 = |w: &Wire| match w {
            Wire::Node(x) if part.contains(x) => *w,
            _ => Wire::Input(feeds.iter().position(|f| f == w).expect("external feed")),
        };
        let b2_nodes = v2
            .iter()
            .map(|v| {
                let node = &self.nodes[v];
                (*v, Node { label: node.label.clone(), sources: node.sources.iter().map(to_b2).collect() })
            })
            .collect();
        let b2 = CausalityGraph::new(feeds.len(), b2_nodes, v2.iter().map(|&v| Wire::Node(v)).collect())?;

        let to_b3 = |w: &Wire| match *w {
            Wire::Input(j) => Wire::Input(j),
            Wire::Node(x) => {
                if let Some(i) = v1.iter().position(|&y| y == x) {
                    Wire::Input(n + i)
                } else if let Some(i) = v2.iter().position(|&y| y == x) {
                    Wire::Input(k + i)
                } else {
                    Wire::Node(x)
                }
            }
        };
        let b3_nodes = v3
            .iter()
            .map(|v| {
                let node = &self.nodes[v];
                (*v, Node { label: node.label.clone(), sources: node.sources.iter().map(to_b3).collect() })
            })
            .collect();
        let b3 = CausalityGraph::new(k + v2.len(), b3_nodes, self.outputs.iter().map(to_b3).collect())?;
        Ok(Decomposition { b1, k, b2, b3 })
    }

    /// A label-, source- and output-preserving bijection of nodes, if any.
    ///
    /// Nodes from which an output is reachable are forced by the ordered
    /// outputs and sources; the remaining nodes are matched by backtracking
    /// in topological order, which is exact.
    pub fn isomorphic(&self, other: &CausalityGraph) -> Option<BTreeMap<NodeId, NodeId>> {
        if self.inputs != other.inputs
            || self.outputs.len() != other.outputs.len()
            || self.nodes.len() != other.nodes.len()
        {
            return None;
        }
        let mut iso = Iso { a: self, b: other, fwd: BTreeMap::new(), back: BTreeMap::new() };
        let mut stack = Vec::new();
        for (x, y) in self.outputs.iter().zip(&other.outputs) {
            if !iso.match_wire(x, y, &mut stack) {
                return None;
            }
        }
        while let Some((x, y)) = stack.pop() {
            let (nx, ny) = (&self.nodes[&x], &other.nodes[&y]);
            if nx.label != ny.label || nx.sources.len() != ny.sources.len() {
                return None;
            }
            for (wx, wy) in nx.sources.iter().zip(&ny.sources) {
                if !iso.match_wire(wx, wy, &mut stack) {
                    return None;
                }
            }
        }
        let rest: Vec<NodeId> = self.topo_order().into_iter().filter(|v| !iso.fwd.contains_key(v)).collect();
        iso.extend(&rest).then_some(iso.fwd)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            inputs: self.inputs,
            out_wires: self.outputs.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|(&id, n)| NodeJson { id, gen: n.label.clone(), sources: n.sources.clone() })
                .collect(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for n in &json.nodes {
            if nodes.insert(n.id, Node { label: n.gen.clone(), sources: n.sources.clone() }).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
        }
        CausalityGraph::new(json.inputs, nodes, json.out_wires.clone())
    }
}

struct Iso<'a> {
    a: &'a CausalityGraph,
    b: &'a CausalityGraph,
    fwd: BTreeMap<NodeId, NodeId>,
    back: BTreeMap<NodeId, NodeId>,
}

impl Iso<'_> {
    fn bind(&mut self, x: NodeId, y: NodeId, stack: &mut Vec<(NodeId, NodeId)>) -> bool {
        match (self.fwd.get(&x), self.back.get(&y)) {
            (Some(&y0), _) => y0 == y,
            (None, Some(_)) => false,
            (None, None) => {
                self.fwd.insert(x, y);
                self.back.insert(y, x);
                stack.push((x, y));
                true
            }
        }
    }

    fn match_wire(&mut self, x: &Wire, y: &Wire, stack: &mut Vec<(NodeId, NodeId)>) -> bool {
        match (*x, *y) {
            (Wire::Input(i), Wire::Input(j)) => i == j,
            (Wire::Node(u), Wire::Node(v)) => self.bind(u, v, stack),
            _ => false,
        }
    }

    /// Matches the unforced nodes, each of whose sources is already mapped.
    fn extend(&mut self, rest: &[NodeId]) -> bool {
        let Some((&x, tail)) = rest.split_first() else {
            return true;
        };
        let nx = &self.a.nodes[&x];
        let candidates: Vec<NodeId> = self
            .b
            .nodes
            .iter()
            .filter(|(y, ny)| {
                !self.back.contains_key(y)
                    && ny.label == nx.label
                    && ny.sources.len() == nx.sources.len()
                    && nx.sources.iter().zip(&ny.sources).all(|(wx, wy)| match (*wx, *wy) {
                        (Wire::Input(i), Wire::Input(j)) => i == j,
                        (Wire::Node(u), Wire::Node(v)) => self.fwd.get(&u) == Some(&v),
                        _ => false,
                    })
            })
            .map(|(&y, _)| y)
            .collect();
        for y in candidates {
            self.fwd.insert(x, y);
            self.back.insert(y, x);
            if self.extend(tail) {
                return true;
            }
            self.fwd.remove(&x);
            self.back.remove(&y);
        }
        false
    }
}

pub(crate) fn topo_order_of<N>(nodes: &BTreeMap<NodeId, N>, sources: impl Fn(&N) -> &Vec<Wire>) -> Vec<NodeId> {
    let mut indegree: BTreeMap<NodeId, usize> = nodes.keys().map(|&v| (v, 0)).collect();
    let mut succ: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (&v, n) in nodes {
        for w in sources(n) {
            if let Wire::Node(x) = *w {
                if nodes.contains_key(&x) {
                    *indegree.get_mut(&v).unwrap() += 1;
                    succ.entry(x).or_default().push(v);
                }
            }
        }
    }
    let mut ready: BTreeSet<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &s in succ.get(&v).into_iter().flatten() {
            let d = indegree.get_mut(&s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    order
}

/// Distinct consumers of every node, in increasing id order.
pub(crate) fn successor_map<N>(
    nodes: &BTreeMap<NodeId, N>,
    sources: impl Fn(&N) -> &Vec<Wire>,
) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut succ: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (&v, n) in nodes {
        for w in sources(n) {
            if let Wire::Node(x) = *w {
                let list = succ.entry(x).or_default();
                if list.last() != Some(&v) {
                    list.push(v);
                }
            }
        }
    }
    succ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: NodeId,
    pub gen: String,
    pub sources: Vec<Wire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    #[serde(rename = "in")]
    pub inputs: usize,
    pub out_wires: Vec<Wire>,
    pub nodes: Vec<NodeJson>,
}
