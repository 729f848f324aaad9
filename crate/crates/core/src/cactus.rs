//! Cactus decompositions: declaration, validation and cascade composition.
//!
//! A decomposition is declared alongside the graph and checked here; the
//! crate never searches for one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, GraphError, InputNode, NodeId, Sign, SignedDigraph, Subgraph};

/// A directed cycle hung off the existing structure by one distinguished
/// edge `dangling -> attach`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bud {
    /// Cycle nodes in traversal order; the closing edge is `last -> first`.
    pub cycle: Vec<NodeId>,
    /// Node already in the structure (stem or an earlier bud).
    pub dangling: NodeId,
    /// Cycle node receiving the distinguished edge.
    pub attach: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cactus {
    pub stem: Vec<NodeId>,
    pub buds: Vec<Bud>,
}

impl Cactus {
    pub fn root(&self) -> Option<NodeId> {
        self.stem.first().copied()
    }

    pub fn extremity(&self) -> Option<NodeId> {
        self.stem.last().copied()
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut v = self.stem.clone();
        for b in &self.buds {
            v.extend(b.cycle.iter().copied());
        }
        v
    }

    /// Edges the cactus itself uses (stem, cycles, distinguished edges).
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out: Vec<_> = self.stem.windows(2).map(|w| (w[0], w[1])).collect();
        for b in &self.buds {
            out.push((b.dangling, b.attach));
            let k = b.cycle.len();
            for i in 0..k {
                out.push((b.cycle[i], b.cycle[(i + 1) % k]));
            }
        }
        out
    }
}

/// Disjoint union of cacti declared to span a graph, plus the extra edges
/// between them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CactusDecomposition {
    pub cacti: Vec<Cactus>,
    pub cross_links: Vec<(NodeId, NodeId)>,
}

impl CactusDecomposition {
    pub fn roots(&self) -> Vec<NodeId> {
        self.cacti.iter().filter_map(Cactus::root).collect()
    }

    pub fn extremities(&self) -> Vec<NodeId> {
        self.cacti.iter().filter_map(Cactus::extremity).collect()
    }

    pub fn stems(&self) -> Vec<&[NodeId]> {
        self.cacti.iter().map(|c| c.stem.as_slice()).collect()
    }

    pub fn buds(&self) -> impl Iterator<Item = &Bud> {
        self.cacti.iter().flat_map(|c| c.buds.iter())
    }

    /// Every extremity is an output node, the orientation needed for the
    /// observability half of the cactus criterion.
    pub fn terminates_at_outputs(&self, g: &SignedDigraph) -> bool {
        self.extremities().iter().all(|e| g.outputs().contains(e))
    }

    /// Carry the decomposition through a node/edge removal. Elements that no
    /// longer exist are dropped and reported as breakages; the result is
    /// meant to be re-validated against the subgraph.
    pub fn restrict(&self, sub: &Subgraph, dropped_edges: &BTreeSet<(NodeId, NodeId)>) -> Restricted {
        let mut breakages = Vec::new();
        let mut cacti = Vec::new();
        for (ci, c) in self.cacti.iter().enumerate() {
            let mut stem = Vec::new();
            for (k, &v) in c.stem.iter().enumerate() {
                match sub.map(v) {
                    Some(nv) => stem.push(nv),
                    None => {
                        breakages.push(Breakage::StemNodeDropped { cactus: ci, node: v });
                        break;
                    }
                }
                if k + 1 < c.stem.len() && dropped_edges.contains(&(v, c.stem[k + 1])) {
                    breakages.push(Breakage::StemEdgeDropped {
                        cactus: ci,
                        src: v,
                        dst: c.stem[k + 1],
                    });
                    break;
                }
            }
            let mut buds = Vec::new();
            for b in &c.buds {
                let cycle: Option<Vec<_>> = b.cycle.iter().map(|&v| sub.map(v)).collect();
                let k = b.cycle.len();
                let edge_lost = dropped_edges.contains(&(b.dangling, b.attach))
                    || (0..k).any(|i| dropped_edges.contains(&(b.cycle[i], b.cycle[(i + 1) % k])));
                match (cycle, sub.map(b.dangling), sub.map(b.attach)) {
                    (Some(cycle), Some(dangling), Some(attach)) if !edge_lost => buds.push(Bud {
                        cycle,
                        dangling,
                        attach,
                    }),
                    _ => breakages.push(Breakage::BudBroken {
                        cactus: ci,
                        dangling: b.dangling,
                    }),
                }
            }
            if !stem.is_empty() {
                cacti.push(Cactus { stem, buds });
            }
        }
        let cross_links = self
            .cross_links
            .iter()
            .filter(|l| !dropped_edges.contains(l))
            .filter_map(|&(s, d)| Some((sub.map(s)?, sub.map(d)?)))
            .collect();
        Restricted {
            decomposition: CactusDecomposition { cacti, cross_links },
            breakages,
        }
    }
}

/// Part of a declared decomposition destroyed by a removal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Breakage {
    StemNodeDropped { cactus: usize, node: NodeId },
    StemEdgeDropped { cactus: usize, src: NodeId, dst: NodeId },
    BudBroken { cactus: usize, dangling: NodeId },
}

#[derive(Clone, Debug)]
pub struct Restricted {
    pub decomposition: CactusDecomposition,
    pub breakages: Vec<Breakage>,
}

/// Why a decomposition fails to certify a generalized cactus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownNode { node: NodeId },
    EmptyStem { cactus: usize },
    RepeatedStemNode { cactus: usize, node: NodeId },
    MissingStemEdge { cactus: usize, src: NodeId, dst: NodeId },
    MissingCycleEdge { cactus: usize, src: NodeId, dst: NodeId },
    RepeatedCycleNode { cactus: usize, node: NodeId },
    AttachNotOnCycle { cactus: usize, attach: NodeId },
    MissingDistinguishedEdge { cactus: usize, src: NodeId, dst: NodeId },
    DanglingNotInStructure { cactus: usize, dangling: NodeId },
    BudOverlapsStructure { cactus: usize, node: NodeId },
    CactiOverlap { node: NodeId },
    NodeNotSpanned { node: NodeId },
    RootNotInput { root: NodeId },
    MissingCrossLink { src: NodeId, dst: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            UnknownNode { node } => write!(f, "node {node} does not exist"),
            EmptyStem { cactus } => write!(f, "cactus {cactus} has an empty stem"),
            RepeatedStemNode { cactus, node } => {
                write!(f, "cactus {cactus}: stem visits node {node} twice")
            }
            MissingStemEdge { cactus, src, dst } => {
                write!(f, "cactus {cactus}: stem edge {src} -> {dst} missing")
            }
            MissingCycleEdge { cactus, src, dst } => {
                write!(f, "cactus {cactus}: bud cycle edge {src} -> {dst} missing")
            }
            RepeatedCycleNode { cactus, node } => {
                write!(f, "cactus {cactus}: bud cycle visits node {node} twice")
            }
            AttachNotOnCycle { cactus, attach } => {
                write!(f, "cactus {cactus}: attach node {attach} is not on its cycle")
            }
            MissingDistinguishedEdge { cactus, src, dst } => {
                write!(f, "cactus {cactus}: distinguished edge {src} -> {dst} missing")
            }
            DanglingNotInStructure { cactus, dangling } => write!(
                f,
                "cactus {cactus}: dangling node {dangling} is not on the stem or an earlier bud"
            ),
            BudOverlapsStructure { cactus, node } => write!(
                f,
                "cactus {cactus}: bud cycle node {node} already belongs to the structure"
            ),
            CactiOverlap { node } => write!(f, "node {node} belongs to more than one cactus"),
            NodeNotSpanned { node } => write!(f, "node {node} not spanned"),
            RootNotInput { root } => write!(f, "root {root} is not an input node"),
            MissingCrossLink { src, dst } => write!(f, "cross link {src} -> {dst} is not an edge"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CactusVerdict {
    Accepted,
    Rejected(Vec<Violation>),
}

impl CactusVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, CactusVerdict::Accepted)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            CactusVerdict::Accepted => &[],
            CactusVerdict::Rejected(v) => v,
        }
    }
}

/// Check that `d` spans `g` with node-disjoint cacti rooted at input nodes.
pub fn validate_generalized_cactus(g: &SignedDigraph, d: &CactusDecomposition) -> CactusVerdict {
    let n = g.node_count();
    let mut out = Vec::new();
    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();

    for (ci, c) in d.cacti.iter().enumerate() {
        let unknown: Vec<_> = c
            .nodes()
            .into_iter()
            .chain(c.buds.iter().flat_map(|b| [b.dangling, b.attach]))
            .filter(|&v| v >= n)
            .collect();
        if !unknown.is_empty() {
            out.extend(unknown.into_iter().map(|node| Violation::UnknownNode { node }));
            continue;
        }
        if c.stem.is_empty() {
            out.push(Violation::EmptyStem { cactus: ci });
            continue;
        }
        let mut structure = BTreeSet::new();
        for &v in &c.stem {
            if !structure.insert(v) {
                out.push(Violation::RepeatedStemNode { cactus: ci, node: v });
            }
        }
        for w in c.stem.windows(2) {
            if !g.has_edge(w[0], w[1]) {
                out.push(Violation::MissingStemEdge {
                    cactus: ci,
                    src: w[0],
                    dst: w[1],
                });
            }
        }
        for b in &c.buds {
            if !structure.contains(&b.dangling) {
                out.push(Violation::DanglingNotInStructure {
                    cactus: ci,
                    dangling: b.dangling,
                });
            }
            if !b.cycle.contains(&b.attach) {
                out.push(Violation::AttachNotOnCycle {
                    cactus: ci,
                    attach: b.attach,
                });
            }
            if !g.has_edge(b.dangling, b.attach) {
                out.push(Violation::MissingDistinguishedEdge {
                    cactus: ci,
                    src: b.dangling,
                    dst: b.attach,
                });
            }
            let k = b.cycle.len();
            let mut local = BTreeSet::new();
            for i in 0..k {
                let (s, t) = (b.cycle[i], b.cycle[(i + 1) % k]);
                if !local.insert(s) {
                    out.push(Violation::RepeatedCycleNode { cactus: ci, node: s });
                }
                if !g.has_edge(s, t) {
                    out.push(Violation::MissingCycleEdge {
                        cactus: ci,
                        src: s,
                        dst: t,
                    });
                }
            }
            for &v in &b.cycle {
                if structure.contains(&v) {
                    out.push(Violation::BudOverlapsStructure { cactus: ci, node: v });
                }
            }
            structure.extend(b.cycle.iter().copied());
        }
        for v in structure {
            if owner.insert(v, ci).is_some_and(|prev| prev != ci) {
                out.push(Violation::CactiOverlap { node: v });
            }
        }
        let root = c.stem[0];
        if !g.is_input(root) {
            out.push(Violation::RootNotInput { root });
        }
    }
    for v in 0..n {
        if !owner.contains_key(&v) {
            out.push(Violation::NodeNotSpanned { node: v });
        }
    }
    for &(s, t) in &d.cross_links {
        if s >= n || t >= n || !g.has_edge(s, t) {
            out.push(Violation::MissingCrossLink { src: s, dst: t });
        }
    }
    if out.is_empty() {
        CactusVerdict::Accepted
    } else {
        CactusVerdict::Rejected(out)
    }
}

// ---------------------------------------------------------------------------
// Label-based form used in scenario files.

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    pub cacti: Vec<CactusSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cross_links: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CactusSpec {
    pub stem: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buds: Vec<BudSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudSpec {
    pub cycle: Vec<String>,
    pub dangling: String,
    pub attach: String,
}

impl DecompositionSpec {
    pub fn resolve(&self, g: &SignedDigraph) -> Result<CactusDecomposition, GraphError> {
        let id = |l: &String| g.require_node(l);
        let cacti = self
            .cacti
            .iter()
            .map(|c| {
                Ok(Cactus {
                    stem: c.stem.iter().map(id).collect::<Result<_, _>>()?,
                    buds: c
                        .buds
                        .iter()
                        .map(|b| {
                            Ok(Bud {
                                cycle: b.cycle.iter().map(id).collect::<Result<_, _>>()?,
                                dangling: id(&b.dangling)?,
                                attach: id(&b.attach)?,
                            })
                        })
                        .collect::<Result<_, GraphError>>()?,
                })
            })
            .collect::<Result<_, GraphError>>()?;
        let cross_links = self
            .cross_links
            .iter()
            .map(|(s, t)| Ok((id(s)?, id(t)?)))
            .collect::<Result<_, GraphError>>()?;
        Ok(CactusDecomposition { cacti, cross_links })
    }

    pub fn from_decomposition(g: &SignedDigraph, d: &CactusDecomposition) -> Self {
        let l = |v: &NodeId| g.label(*v).to_string();
        DecompositionSpec {
            cacti: d
                .cacti
                .iter()
                .map(|c| CactusSpec {
                    stem: c.stem.iter().map(l).collect(),
                    buds: c
                        .buds
                        .iter()
                        .map(|b| BudSpec {
                            cycle: b.cycle.iter().map(l).collect(),
                            dangling: l(&b.dangling),
                            attach: l(&b.attach),
                        })
                        .collect(),
                })
                .collect(),
            cross_links: d.cross_links.iter().map(|(s, t)| (l(s), l(t))).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Cascade composition.

/// One subsystem of a cascade: a graph and its declared cactus subgraphs.
/// Roots of cacti that will be fed by links need not be inputs here.
#[derive(Clone, Debug)]
pub struct CascadePart {
    pub graph: SignedDigraph,
    pub decomposition: CactusDecomposition,
}

/// Edge from an extremity of one part to a root of another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeLink {
    pub from_part: usize,
    pub from: NodeId,
    pub to_part: usize,
    pub to: NodeId,
    pub sign: Sign,
    pub weight: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("link references part {0}, but only {1} parts were given")]
    UnknownPart(usize, usize),
    #[error("link source `{0}` is not the extremity of a cactus subgraph")]
    NotExtremity(String),
    #[error("link target `{0}` is not the root of a cactus subgraph")]
    NotRoot(String),
    #[error("root `{0}` is linked more than once")]
    RootFedTwice(String),
    #[error("extremity `{0}` links to more than one root that is not a pure cycle")]
    FanOut(String),
    #[error("root `{0}` has neither an incoming link nor an external input")]
    RootUnfed(String),
    #[error("pure-cycle subgraph rooted at `{0}` is attached as a bud and cannot feed further links")]
    BudFeedsLink(String),
    #[error("parts use different weight bounds")]
    MixedBounds,
}

/// Merged cascade with its stitched decomposition.
#[derive(Clone, Debug)]
pub struct Composite {
    pub graph: SignedDigraph,
    pub decomposition: CactusDecomposition,
    /// Global index of each part's node 0.
    pub offsets: Vec<usize>,
}

/// A cactus subgraph that is nothing but a directed cycle through its stem.
fn is_pure_cycle(g: &SignedDigraph, c: &Cactus) -> bool {
    match (c.root(), c.extremity()) {
        (Some(r), Some(e)) => c.buds.is_empty() && g.has_edge(e, r),
        _ => false,
    }
}

/// Join subsystems by extremity-to-root links. Each link prolongs the stem
/// of the upstream cactus; links into pure cycles beyond the first become
/// buds on the extremity.
pub fn compose_cascade(parts: &[CascadePart], links: &[CascadeLink]) -> Result<Composite, CascadeError> {
    let Some(first) = parts.first() else {
        return Err(CascadeError::UnknownPart(0, 0));
    };
    let bounds = first.graph.bounds();
    if parts.iter().any(|p| p.graph.bounds() != bounds) {
        return Err(CascadeError::MixedBounds);
    }
    let mut offsets = Vec::with_capacity(parts.len());
    let mut labels = Vec::new();
    for p in parts {
        offsets.push(labels.len());
        labels.extend(p.graph.labels().iter().cloned());
    }
    let glob = |part: usize, v: NodeId| offsets[part] + v;

    // (part, cactus) keyed by global root / extremity
    let mut root_of = BTreeMap::new();
    let mut ext_of: BTreeMap<NodeId, Vec<(usize, usize)>> = BTreeMap::new();
    for (pi, p) in parts.iter().enumerate() {
        for (ci, c) in p.decomposition.cacti.iter().enumerate() {
            if let (Some(r), Some(e)) = (c.root(), c.extremity()) {
                root_of.insert(glob(pi, r), (pi, ci));
                ext_of.entry(glob(pi, e)).or_default().push((pi, ci));
            }
        }
    }

    let mut fed: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut by_source: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (li, l) in links.iter().enumerate() {
        for part in [l.from_part, l.to_part] {
            if part >= parts.len() {
                return Err(CascadeError::UnknownPart(part, parts.len()));
            }
        }
        let (s, t) = (glob(l.from_part, l.from), glob(l.to_part, l.to));
        if l.from >= parts[l.from_part].graph.node_count() || !ext_of.contains_key(&s) {
            return Err(CascadeError::NotExtremity(label_or_index(&labels, s)));
        }
        if l.to >= parts[l.to_part].graph.node_count() || !root_of.contains_key(&t) {
            return Err(CascadeError::NotRoot(label_or_index(&labels, t)));
        }
        if fed.insert(t, li).is_some() {
            return Err(CascadeError::RootFedTwice(labels[t].clone()));
        }
        by_source.entry(s).or_default().push(li);
    }
    let target_is_cycle = |li: usize| {
        let l = &links[li];
        let (pi, ci) = root_of[&glob(l.to_part, l.to)];
        is_pure_cycle(&parts[pi].graph, &parts[pi].decomposition.cacti[ci])
    };
    for (&s, ls) in &by_source {
        if ls.iter().filter(|&&li| !target_is_cycle(li)).count() > 1 {
            return Err(CascadeError::FanOut(labels[s].clone()));
        }
    }

    let mut edges = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (pi, p) in parts.iter().enumerate() {
        edges.extend(p.graph.edges().iter().map(|e| Edge {
            src: glob(pi, e.src),
            dst: glob(pi, e.dst),
            ..*e
        }));
        for i in p.graph.inputs() {
            let v = glob(pi, i.node);
            if !fed.contains_key(&v) {
                inputs.push(InputNode { node: v, gain: i.gain });
            }
        }
        outputs.extend(p.graph.outputs().iter().map(|&o| glob(pi, o)));
    }
    for l in links {
        edges.push(Edge {
            src: glob(l.from_part, l.from),
            dst: glob(l.to_part, l.to),
            sign: l.sign,
            weight: l.weight,
        });
    }
    for &r in root_of.keys() {
        if !fed.contains_key(&r) && !inputs.iter().any(|i| i.node == r) {
            return Err(CascadeError::RootUnfed(labels[r].clone()));
        }
    }
    let graph = SignedDigraph::new(labels.clone(), edges, bounds, inputs, outputs)?;

    // Stitch: walk from every externally fed cactus down its link chain.
    let globalize = |pi: usize, c: &Cactus| Cactus {
        stem: c.stem.iter().map(|&v| glob(pi, v)).collect(),
        buds: c
            .buds
            .iter()
            .map(|b| Bud {
                cycle: b.cycle.iter().map(|&v| glob(pi, v)).collect(),
                dangling: glob(pi, b.dangling),
                attach: glob(pi, b.attach),
            })
            .collect(),
    };
    let mut absorbed = BTreeSet::new();
    let mut cacti = Vec::new();
    for (&r, &(pi, ci)) in &root_of {
        if fed.contains_key(&r) {
            continue;
        }
        let mut merged = globalize(pi, &parts[pi].decomposition.cacti[ci]);
        absorbed.insert((pi, ci));
        loop {
            let ext = *merged.stem.last().expect("stems are nonempty");
            let Some(ls) = by_source.get(&ext) else { break };
            let mut prolong = ls.iter().copied().find(|&li| !target_is_cycle(li));
            if prolong.is_none() {
                prolong = ls.first().copied();
            }
            for &li in ls {
                if Some(li) == prolong {
                    continue;
                }
                let l = &links[li];
                let key = root_of[&glob(l.to_part, l.to)];
                let cyc = globalize(key.0, &parts[key.0].decomposition.cacti[key.1]);
                if by_source.contains_key(cyc.stem.last().expect("nonempty")) {
                    return Err(CascadeError::BudFeedsLink(labels[cyc.stem[0]].clone()));
                }
                absorbed.insert(key);
                merged.buds.push(Bud {
                    attach: cyc.stem[0],
                    cycle: cyc.stem,
                    dangling: ext,
                });
            }
            let Some(li) = prolong else { break };
            let l = &links[li];
            let key = root_of[&glob(l.to_part, l.to)];
            if !absorbed.insert(key) {
                break;
            }
            let next = globalize(key.0, &parts[key.0].decomposition.cacti[key.1]);
            merged.stem.extend(next.stem);
            merged.buds.extend(next.buds);
        }
        cacti.push(merged);
    }
    for (&r, key) in &root_of {
        if !absorbed.contains(key) {
            return Err(CascadeError::RootUnfed(labels[r].clone()));
        }
    }
    let mut cross_links = Vec::new();
    for (pi, p) in parts.iter().enumerate() {
        cross_links.extend(
            p.decomposition
                .cross_links
                .iter()
                .map(|&(s, t)| (glob(pi, s), glob(pi, t))),
        );
    }
    Ok(Composite {
        graph,
        decomposition: CactusDecomposition { cacti, cross_links },
        offsets,
    })
}

fn label_or_index(labels: &[String], v: NodeId) -> String {
    labels.get(v).cloned().unwrap_or_else(|| format!("#{v}"))
}
