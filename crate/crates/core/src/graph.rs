//! Signed weighted digraphs.
//!
//! Weights follow the convention `A[(i, j)] = weight of the edge j -> i`, so
//! row `i` of the weight matrix collects the synapses entering node `i`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

/// Excitatory (`+`) or inhibitory (`-`) edge class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Excitatory,
    #[serde(rename = "-")]
    Inhibitory,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Excitatory => 1.0,
            Sign::Inhibitory => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Excitatory => "+",
            Sign::Inhibitory => "-",
        })
    }
}

/// Box constraints on synaptic weights, one interval per sign class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub lower_pos: f64,
    pub upper_pos: f64,
    pub lower_neg: f64,
    pub upper_neg: f64,
}

impl WeightBounds {
    pub fn symmetric(lo: f64, hi: f64) -> Self {
        WeightBounds {
            lower_pos: lo,
            upper_pos: hi,
            lower_neg: -hi,
            upper_neg: -lo,
        }
    }

    pub fn interval(&self, sign: Sign) -> (f64, f64) {
        match sign {
            Sign::Excitatory => (self.lower_pos, self.upper_pos),
            Sign::Inhibitory => (self.lower_neg, self.upper_neg),
        }
    }

    /// `max{ā⁺, |a̲⁻|}`, the largest admissible synaptic magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.upper_pos.max(self.lower_neg.abs())
    }

    fn check(&self) -> Result<(), GraphError> {
        let ok = 0.0 < self.lower_pos
            && self.lower_pos <= self.upper_pos
            && self.lower_neg <= self.upper_neg
            && self.upper_neg < 0.0
            && [self.lower_pos, self.upper_pos, self.lower_neg, self.upper_neg]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(GraphError::InvalidBounds(*self))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub sign: Sign,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputNode {
    pub node: NodeId,
    pub gain: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate node label `{0}`")]
    DuplicateLabel(String),
    #[error("node index {0} out of range")]
    NodeOutOfRange(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("edge {src} -> {dst} has weight {weight} outside [{lo}, {hi}] for sign {sign}")]
    WeightOutOfBounds {
        src: String,
        dst: String,
        sign: Sign,
        weight: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid weight bounds {0:?}: need 0 < a+lo <= a+hi and a-lo <= a-hi < 0")]
    InvalidBounds(WeightBounds),
    #[error("node `{0}` declared as input more than once")]
    DuplicateInput(String),
    #[error("input gain for `{0}` must be finite and nonzero")]
    BadGain(String),
    #[error("edge {0} -> {1} does not exist")]
    MissingEdge(String, String),
}

/// Directed graph with signed, bounded edge weights and designated
/// input/output nodes. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDigraph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    bounds: WeightBounds,
    inputs: Vec<InputNode>,
    outputs: Vec<NodeId>,
}

/// Label-based description of a graph, the form stored in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    pub bounds: WeightBounds,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub src: String,
    pub dst: String,
    pub sign: Sign,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub node: String,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl GraphSpec {
    pub fn build(&self) -> Result<SignedDigraph, GraphError> {
        build_graph(self)
    }
}

/// Validate a label-based description and produce the graph.
pub fn build_graph(spec: &GraphSpec) -> Result<SignedDigraph, GraphError> {
    let mut index = HashMap::new();
    for (i, l) in spec.nodes.iter().enumerate() {
        if index.insert(l.as_str(), i).is_some() {
            return Err(GraphError::DuplicateLabel(l.clone()));
        }
    }
    let lookup = |l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| GraphError::UnknownLabel(l.to_string()))
    };
    let edges = spec
        .edges
        .iter()
        .map(|e| {
            Ok(Edge {
                src: lookup(&e.src)?,
                dst: lookup(&e.dst)?,
                sign: e.sign,
                weight: e.w,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;
    let inputs = spec
        .inputs
        .iter()
        .map(|i| {
            Ok(InputNode {
                node: lookup(&i.node)?,
                gain: i.gain,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;
    let outputs = spec
        .outputs
        .iter()
        .map(|o| lookup(o))
        .collect::<Result<Vec<_>, GraphError>>()?;
    SignedDigraph::new(spec.nodes.clone(), edges, spec.bounds, inputs, outputs)
}

impl SignedDigraph {
    pub fn new(
        labels: Vec<String>,
        edges: Vec<Edge>,
        bounds: WeightBounds,
        inputs: Vec<InputNode>,
        outputs: Vec<NodeId>,
    ) -> Result<Self, GraphError> {
        bounds.check()?;
        let n = labels.len();
        let mut seen_labels = BTreeSet::new();
        for l in &labels {
            if !seen_labels.insert(l.as_str()) {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            for v in [e.src, e.dst] {
                if v >= n {
                    return Err(GraphError::NodeOutOfRange(v));
                }
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(GraphError::DuplicateEdge(
                    labels[e.src].clone(),
                    labels[e.dst].clone(),
                ));
            }
            let (lo, hi) = bounds.interval(e.sign);
            if !(e.weight >= lo && e.weight <= hi) {
                return Err(GraphError::WeightOutOfBounds {
                    src: labels[e.src].clone(),
                    dst: labels[e.dst].clone(),
                    sign: e.sign,
                    weight: e.weight,
                    lo,
                    hi,
                });
            }
        }
        let mut seen_inputs = BTreeSet::new();
        for i in &inputs {
            if i.node >= n {
                return Err(GraphError::NodeOutOfRange(i.node));
            }
            if !seen_inputs.insert(i.node) {
                return Err(GraphError::DuplicateInput(labels[i.node].clone()));
            }
            if !i.gain.is_finite() || i.gain == 0.0 {
                return Err(GraphError::BadGain(labels[i.node].clone()));
            }
        }
        let mut out = Vec::new();
        for &o in &outputs {
            if o >= n {
                return Err(GraphError::NodeOutOfRange(o));
            }
            if !out.contains(&o) {
                out.push(o);
            }
        }
        Ok(SignedDigraph {
            labels,
            edges,
            bounds,
            inputs,
            outputs: out,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn require_node(&self, label: &str) -> Result<NodeId, GraphError> {
        self.node_id(label)
            .ok_or_else(|| GraphError::UnknownLabel(label.to_string()))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, src: NodeId, dst: NodeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.edge(src, dst).is_some()
    }

    pub fn bounds(&self) -> WeightBounds {
        self.bounds
    }

    pub fn inputs(&self) -> &[InputNode] {
        &self.inputs
    }

    pub fn input_nodes(&self) -> Vec<NodeId> {
        self.inputs.iter().map(|i| i.node).collect()
    }

    pub fn is_input(&self, v: NodeId) -> bool {
        self.inputs.iter().any(|i| i.node == v)
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.edges.iter().filter(|e| e.dst == v).count()
    }

    /// Successors of `v` in increasing index order.
    pub fn successors(&self, v: NodeId) -> Vec<NodeId> {
        let mut s: Vec<_> = self
            .edges
            .iter()
            .filter(|e| e.src == v)
            .map(|e| e.dst)
            .collect();
        s.sort_unstable();
        s
    }

    pub fn has_self_loops(&self) -> bool {
        self.edges.iter().any(|e| e.src == e.dst)
    }

    /// Initial weight matrix `A` with `A[(dst, src)] = w`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut a = DMatrix::zeros(n, n);
        for e in &self.edges {
            a[(e.dst, e.src)] = e.weight;
        }
        a
    }

    /// `sign(A)` as a matrix of -1/0/+1.
    pub fn sign_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut s = DMatrix::zeros(n, n);
        for e in &self.edges {
            s[(e.dst, e.src)] = e.sign.as_f64();
        }
        s
    }

    /// Entrywise lower and upper weight bounds; zero off the edge set.
    pub fn bound_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.node_count();
        let mut lo = DMatrix::zeros(n, n);
        let mut hi = DMatrix::zeros(n, n);
        for e in &self.edges {
            let (l, h) = self.bounds.interval(e.sign);
            lo[(e.dst, e.src)] = l;
            hi[(e.dst, e.src)] = h;
        }
        (lo, hi)
    }

    /// `B = [b_k e_k ...]`, one column per input node in declaration order.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.node_count(), self.inputs.len());
        for (c, i) in self.inputs.iter().enumerate() {
            b[(i.node, c)] = i.gain;
        }
        b
    }

    /// `C`, one row per output node.
    pub fn output_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.outputs.len(), self.node_count());
        for (r, &o) in self.outputs.iter().enumerate() {
            c[(r, o)] = 1.0;
        }
        c
    }

    /// Nodes reachable from any of `sources` (sources included).
    pub fn reachable_from(&self, sources: &[NodeId]) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = sources.iter().copied().collect();
        let mut queue: VecDeque<NodeId> = sources.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for w in self.successors(v) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Nodes not reachable from any input node.
    pub fn inaccessible_nodes(&self) -> Vec<NodeId> {
        let reach = self.reachable_from(&self.input_nodes());
        (0..self.node_count()).filter(|v| !reach.contains(v)).collect()
    }

    /// Same topology and designations with a different set of inputs.
    pub fn with_inputs(&self, inputs: Vec<InputNode>) -> Result<Self, GraphError> {
        SignedDigraph::new(
            self.labels.clone(),
            self.edges.clone(),
            self.bounds,
            inputs,
            self.outputs.clone(),
        )
    }

    /// Same graph with edge weights taken from `a` (`a[(dst, src)]`).
    pub fn with_weights(&self, a: &DMatrix<f64>) -> Result<Self, GraphError> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                weight: a[(e.dst, e.src)],
                ..*e
            })
            .collect();
        SignedDigraph::new(
            self.labels.clone(),
            edges,
            self.bounds,
            self.inputs.clone(),
            self.outputs.clone(),
        )
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            nodes: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    src: self.labels[e.src].clone(),
                    dst: self.labels[e.dst].clone(),
                    sign: e.sign,
                    w: e.weight,
                })
                .collect(),
            bounds: self.bounds,
            inputs: self
                .inputs
                .iter()
                .map(|i| InputSpec {
                    node: self.labels[i.node].clone(),
                    gain: i.gain,
                })
                .collect(),
            outputs: self
                .outputs
                .iter()
                .map(|&o| self.labels[o].clone())
                .collect(),
        }
    }
}

/// `d^in`, the largest number of edges entering any node.
pub fn max_in_degree(g: &SignedDigraph) -> usize {
    let mut deg = vec![0usize; g.node_count()];
    for e in g.edges() {
        deg[e.dst] += 1;
    }
    deg.into_iter().max().unwrap_or(0)
}

/// Result of removing nodes and edges from a graph.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: SignedDigraph,
    /// `node_map[old] = Some(new)` for surviving nodes.
    pub node_map: Vec<Option<NodeId>>,
    /// Input nodes (old indices) that were removed.
    pub dropped_inputs: Vec<NodeId>,
}

impl Subgraph {
    pub fn map(&self, old: NodeId) -> Option<NodeId> {
        self.node_map.get(old).copied().flatten()
    }
}

/// `(V - S, E - E')`: remove `nodes`, every edge touching them, and `edges`.
/// Input and output designations are kept for surviving nodes.
pub fn drop_elements(
    g: &SignedDigraph,
    nodes: &BTreeSet<NodeId>,
    edges: &BTreeSet<(NodeId, NodeId)>,
) -> Result<Subgraph, GraphError> {
    for &v in nodes {
        if v >= g.node_count() {
            return Err(GraphError::NodeOutOfRange(v));
        }
    }
    for &(s, d) in edges {
        if s >= g.node_count() || d >= g.node_count() {
            return Err(GraphError::NodeOutOfRange(s.max(d)));
        }
        if !g.has_edge(s, d) {
            return Err(GraphError::MissingEdge(
                g.label(s).to_string(),
                g.label(d).to_string(),
            ));
        }
    }
    let mut node_map = vec![None; g.node_count()];
    let mut labels = Vec::new();
    for v in 0..g.node_count() {
        if !nodes.contains(&v) {
            node_map[v] = Some(labels.len());
            labels.push(g.label(v).to_string());
        }
    }
    let new_edges = g
        .edges()
        .iter()
        .filter(|e| !edges.contains(&(e.src, e.dst)))
        .filter_map(|e| {
            Some(Edge {
                src: node_map[e.src]?,
                dst: node_map[e.dst]?,
                ..*e
            })
        })
        .collect();
    let inputs = g
        .inputs()
        .iter()
        .filter_map(|i| {
            Some(InputNode {
                node: node_map[i.node]?,
                gain: i.gain,
            })
        })
        .collect();
    let outputs = g.outputs().iter().filter_map(|&o| node_map[o]).collect();
    let dropped_inputs = g
        .inputs()
        .iter()
        .map(|i| i.node)
        .filter(|v| nodes.contains(v))
        .collect();
    Ok(Subgraph {
        graph: SignedDigraph::new(labels, new_edges, g.bounds(), inputs, outputs)?,
        node_map,
        dropped_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cycle3() -> SignedDigraph {
        let spec = GraphSpec {
            nodes: vec!["a".into(), "b".into(), "c".into()],
            edges: vec![
                EdgeSpec { src: "a".into(), dst: "b".into(), sign: Sign::Excitatory, w: 0.5 },
                EdgeSpec { src: "b".into(), dst: "c".into(), sign: Sign::Excitatory, w: 0.5 },
                EdgeSpec { src: "c".into(), dst: "a".into(), sign: Sign::Inhibitory, w: -0.5 },
            ],
            bounds: WeightBounds::symmetric(0.1, 1.2),
            inputs: vec![InputSpec { node: "a".into(), gain: 1.0 }],
            outputs: vec!["c".into()],
        };
        build_graph(&spec).unwrap()
    }

    #[test]
    fn three_cycle_has_unit_in_degree() {
        assert_eq!(max_in_degree(&cycle3()), 1);
    }

    #[test]
    fn trivial_graph() {
        let spec = GraphSpec {
            nodes: vec!["x".into()],
            edges: vec![],
            bounds: WeightBounds::symmetric(0.1, 1.2),
            inputs: vec![InputSpec { node: "x".into(), gain: 1.0 }],
            outputs: vec![],
        };
        let g = build_graph(&spec).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(max_in_degree(&g), 0);
        assert_eq!(g.input_matrix(), DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn rejects_out_of_bounds_weight() {
        let mut spec = cycle3().to_spec();
        spec.edges[0].w = 2.0;
        assert!(matches!(
            build_graph(&spec),
            Err(GraphError::WeightOutOfBounds { .. })
        ));
    }

    #[test]
    fn rejects_wrong_sign_class() {
        let mut spec = cycle3().to_spec();
        spec.edges[2].w = 0.5;
        assert!(build_graph(&spec).is_err());
    }

    #[test]
    fn rejects_duplicate_edge_and_unknown_label() {
        let mut spec = cycle3().to_spec();
        spec.edges.push(spec.edges[0].clone());
        assert!(matches!(build_graph(&spec), Err(GraphError::DuplicateEdge(..))));
        let mut spec = cycle3().to_spec();
        spec.edges[0].dst = "zz".into();
        assert_eq!(
            build_graph(&spec),
            Err(GraphError::UnknownLabel("zz".into()))
        );
    }

    #[test]
    fn weight_matrix_uses_dst_src_indexing() {
        let g = cycle3();
        let a = g.weight_matrix();
        assert_eq!(a[(1, 0)], 0.5);
        assert_eq!(a[(0, 2)], -0.5);
        assert_eq!(a[(0, 1)], 0.0);
    }

    #[test]
    fn dropping_nothing_is_identity() {
        let g = cycle3();
        let s = drop_elements(&g, &BTreeSet::new(), &BTreeSet::new()).unwrap();
        assert_eq!(s.graph, g);
    }

    #[test]
    fn dropping_node_removes_incident_edges() {
        let g = cycle3();
        let s = drop_elements(&g, &[1].into(), &BTreeSet::new()).unwrap();
        assert_eq!(s.graph.node_count(), 2);
        assert_eq!(s.graph.edges().len(), 1);
        assert_eq!(s.map(2), Some(1));
        assert_eq!(s.map(1), None);
    }

    #[test]
    fn dropping_input_is_reported() {
        let g = cycle3();
        let s = drop_elements(&g, &[0].into(), &BTreeSet::new()).unwrap();
        assert_eq!(s.dropped_inputs, vec![0]);
        assert!(s.graph.inputs().is_empty());
    }

    #[test]
    fn inaccessible_nodes_found() {
        let g = cycle3();
        assert!(g.inaccessible_nodes().is_empty());
        let s = drop_elements(&g, &BTreeSet::new(), &[(0, 1)].into()).unwrap();
        assert_eq!(s.graph.inaccessible_nodes(), vec![1, 2]);
    }
}
