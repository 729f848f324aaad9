//! Dropout resilience audits and cascade-composition checks.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cactus::{
    validate_generalized_cactus, Breakage, CactusDecomposition, CactusVerdict, Composite,
    DecompositionSpec, Violation,
};
use crate::control::{per_slot_rank_audit, structural_test, SlotRank, StructuralVerdict, StructurePattern};
use crate::dynamics::{
    hurwitz_check, simulate, stability_condition, DynamicsError, InputSignal, ModelParams,
    SimOptions, SlotMask, StabilityCondition, Trajectory,
};
use crate::graph::{drop_elements, max_in_degree, GraphError, NodeId, Sign, SignedDigraph, Subgraph};
use crate::paths::find_disjoint_input_paths;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResilienceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("dropout plan removes edge {0} -> {1}, which does not exist")]
    MissingEdge(String, String),
    #[error("not composable: no path from an upstream input reaches `{0}`")]
    NotComposable(String),
    #[error("invalid cascade: {0}")]
    InvalidCascade(String),
}

/// When dropped elements are unavailable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Permanent,
    /// Slot `p` loses the elements iff `active[p]`.
    Intermittent { active: Vec<bool> },
}

/// Label-based dropout plan as stored in files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutPlanSpec {
    #[serde(default)]
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    pub schedule: Schedule,
    /// Decomposition of the surviving graph, if the original one does not
    /// carry over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<DecompositionSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropoutPlan {
    pub nodes: BTreeSet<NodeId>,
    /// `(src, dst)` pairs.
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub schedule: Schedule,
    pub replacement: Option<DecompositionSpec>,
}

impl DropoutPlanSpec {
    pub fn resolve(&self, g: &SignedDigraph) -> Result<DropoutPlan, ResilienceError> {
        let nodes = self
            .nodes
            .iter()
            .map(|l| g.require_node(l))
            .collect::<Result<_, _>>()?;
        let mut edges = BTreeSet::new();
        for (s, d) in &self.edges {
            let (si, di) = (g.require_node(s)?, g.require_node(d)?);
            if !g.has_edge(si, di) {
                return Err(ResilienceError::MissingEdge(s.clone(), d.clone()));
            }
            edges.insert((si, di));
        }
        Ok(DropoutPlan {
            nodes,
            edges,
            schedule: self.schedule.clone(),
            replacement: self.replacement.clone(),
        })
    }
}

impl DropoutPlan {
    pub fn empty() -> Self {
        DropoutPlan {
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            schedule: Schedule::Permanent,
            replacement: None,
        }
    }

    pub fn to_spec(&self, g: &SignedDigraph) -> DropoutPlanSpec {
        DropoutPlanSpec {
            nodes: self.nodes.iter().map(|&v| g.label(v).to_string()).collect(),
            edges: self
                .edges
                .iter()
                .map(|&(s, d)| (g.label(s).to_string(), g.label(d).to_string()))
                .collect(),
            schedule: self.schedule.clone(),
            replacement: self.replacement.clone(),
        }
    }

    /// The surviving graph `(V − S, E − E')`.
    pub fn survivor(&self, g: &SignedDigraph) -> Result<Subgraph, GraphError> {
        drop_elements(g, &self.nodes, &self.edges)
    }

    /// Every edge silenced by the plan: the listed edges plus all edges
    /// touching a dropped node.
    pub fn silenced_edges(&self, g: &SignedDigraph) -> BTreeSet<(NodeId, NodeId)> {
        let mut out = self.edges.clone();
        for e in g.edges() {
            if self.nodes.contains(&e.src) || self.nodes.contains(&e.dst) {
                out.insert((e.src, e.dst));
            }
        }
        out
    }

    /// Flow mask for an intermittent schedule; `None` when permanent.
    pub fn slot_mask(&self, g: &SignedDigraph) -> Option<SlotMask> {
        match &self.schedule {
            Schedule::Permanent => None,
            Schedule::Intermittent { active } => Some(SlotMask {
                edges: self.silenced_edges(g),
                active: Some(active.clone()),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DropoutAudit {
    pub surviving_nodes: usize,
    pub surviving_edges: usize,
    /// Input nodes removed by the plan (old labels); any makes the
    /// cactus check fail.
    pub dropped_inputs: Vec<String>,
    pub breakages: Vec<Breakage>,
    pub used_replacement: bool,
    pub cactus_valid: bool,
    pub violations: Vec<Violation>,
    pub stability: StabilityCondition,
    pub structural: StructuralVerdict,
}

impl DropoutAudit {
    pub fn passes(&self) -> bool {
        self.cactus_valid && self.stability.holds && self.structural.is_controllable()
    }
}

/// Check that the graph left after a dropout is still a generalized cactus
/// on the same inputs, still meets the stability condition, and is still
/// structurally controllable.
pub fn dropout_audit(
    g: &SignedDigraph,
    d: &CactusDecomposition,
    plan: &DropoutPlan,
    params: &ModelParams,
    trials: usize,
    seed: u64,
) -> Result<DropoutAudit, ResilienceError> {
    let sub = plan.survivor(g)?;
    let restricted = d.restrict(&sub, &plan.edges);
    let (decomposition, used_replacement) = match &plan.replacement {
        Some(spec) => (spec.resolve(&sub.graph)?, true),
        None => (restricted.decomposition, false),
    };
    let verdict = validate_generalized_cactus(&sub.graph, &decomposition);
    let dropped_inputs: Vec<String> = sub
        .dropped_inputs
        .iter()
        .map(|&v| g.label(v).to_string())
        .collect();
    let structural = structural_test(&StructurePattern::from_graph(&sub.graph), trials, seed);
    Ok(DropoutAudit {
        surviving_nodes: sub.graph.node_count(),
        surviving_edges: sub.graph.edges().len(),
        cactus_valid: verdict.is_accepted() && dropped_inputs.is_empty(),
        dropped_inputs,
        breakages: restricted.breakages,
        used_replacement,
        violations: verdict.violations().to_vec(),
        stability: stability_condition(&sub.graph, params),
        structural,
    })
}

/// One row of a resilience sweep.
#[derive(Clone, Debug, Serialize)]
pub struct ResilienceRecord {
    pub plan: DropoutPlanSpec,
    pub stability: StabilityCondition,
    pub cactus_valid: bool,
    pub structural_verdict: StructuralVerdict,
    pub per_slot_ranks: Vec<SlotRank>,
    /// Every slot matrix `−c_n I + A_p` strictly diagonally dominant
    /// with eigenvalues in the open left half-plane.
    pub hurwitz: bool,
    #[serde(skip)]
    pub audit: DropoutAudit,
}

/// Simulation inputs shared by resilience and cascade runs.
#[derive(Clone, Debug)]
pub struct RunSetup<'a> {
    pub params: &'a ModelParams,
    /// Aligned with `g.inputs()`.
    pub signals: &'a [InputSignal],
    pub x0: &'a DVector<f64>,
    pub slots: usize,
    pub sample_stride: usize,
}

/// Hurwitz tolerance on eigenvalue real parts.
pub const HURWITZ_TOL: f64 = 1e-10;

pub fn slots_hurwitz(traj: &Trajectory, c_n: f64, mask: Option<&SlotMask>) -> bool {
    (0..traj.slot_count()).all(|p| hurwitz_check(&traj.effective_weights(p, mask), c_n).passes(HURWITZ_TOL))
}

/// Audit a plan and run the network under it: permanent plans run on the
/// surviving graph, intermittent plans mask the flow on the full graph.
pub fn resilience_run(
    g: &SignedDigraph,
    d: &CactusDecomposition,
    plan: &DropoutPlan,
    setup: &RunSetup<'_>,
    trials: usize,
    seed: u64,
) -> Result<(ResilienceRecord, Trajectory), ResilienceError> {
    let audit = dropout_audit(g, d, plan, setup.params, trials, seed)?;
    let (traj, ranks, hurwitz) = match plan.slot_mask(g) {
        None => {
            let sub = plan.survivor(g)?;
            let x0 = DVector::from_iterator(
                sub.graph.node_count(),
                (0..g.node_count()).filter(|&v| sub.map(v).is_some()).map(|v| setup.x0[v]),
            );
            let signals: Vec<InputSignal> = g
                .inputs()
                .iter()
                .zip(setup.signals)
                .filter(|(i, _)| sub.map(i.node).is_some())
                .map(|(_, s)| *s)
                .collect();
            let opts = SimOptions {
                sample_stride: setup.sample_stride,
                mask: None,
            };
            let traj = simulate(&sub.graph, setup.params, &signals, &x0, setup.slots, &opts)?;
            let ranks = per_slot_rank_audit(&traj, &sub.graph, setup.params.c_n, None);
            let hurwitz = slots_hurwitz(&traj, setup.params.c_n, None);
            (traj, ranks, hurwitz)
        }
        Some(mask) => {
            let opts = SimOptions {
                sample_stride: setup.sample_stride,
                mask: Some(mask.clone()),
            };
            let traj = simulate(g, setup.params, setup.signals, setup.x0, setup.slots, &opts)?;
            let ranks = per_slot_rank_audit(&traj, g, setup.params.c_n, Some(&mask));
            let hurwitz = slots_hurwitz(&traj, setup.params.c_n, Some(&mask));
            (traj, ranks, hurwitz)
        }
    };
    let record = ResilienceRecord {
        plan: plan.to_spec(g),
        stability: audit.stability,
        cactus_valid: audit.cactus_valid,
        structural_verdict: audit.structural.clone(),
        per_slot_ranks: ranks,
        hurwitz,
        audit,
    };
    Ok((record, traj))
}

// ---------------------------------------------------------------------------
// Cascades.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentStatus {
    KnownControllable,
    Unknown,
}

/// Edge from an upstream exit node into a downstream entry node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSpec {
    pub exit: NodeId,
    pub entry: NodeId,
    pub sign: Sign,
    pub weight: f64,
}

/// Upstream system driving a downstream one. The downstream input nodes
/// are its entry nodes; each must be fed by exactly one link.
#[derive(Clone, Debug)]
pub struct CascadeSpec {
    pub upstream: SignedDigraph,
    pub upstream_status: ComponentStatus,
    pub downstream: SignedDigraph,
    pub downstream_status: ComponentStatus,
    pub links: Vec<LinkSpec>,
}

/// Dense composite `(A, B)` with its node labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledSystem {
    pub labels: Vec<String>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl AssembledSystem {
    pub fn pattern(&self) -> StructurePattern {
        StructurePattern::from_matrices(&self.a, &self.b)
    }
}

impl CascadeSpec {
    pub fn entries(&self) -> Vec<NodeId> {
        self.downstream.input_nodes()
    }

    fn validate(&self) -> Result<(), ResilienceError> {
        let bad = |m: String| Err(ResilienceError::InvalidCascade(m));
        let entries = self.entries();
        if entries.is_empty() {
            return bad("downstream has no entry nodes".into());
        }
        for l in &self.links {
            if l.exit >= self.upstream.node_count() {
                return bad(format!("link exit {} is not an upstream node", l.exit));
            }
            if !entries.contains(&l.entry) {
                return bad(format!(
                    "link target `{}` is not a downstream entry",
                    self.downstream.label(l.entry)
                ));
            }
        }
        for &e in &entries {
            let fed = self.links.iter().filter(|l| l.entry == e).count();
            if fed != 1 {
                return bad(format!(
                    "entry `{}` is fed by {fed} links",
                    self.downstream.label(e)
                ));
            }
        }
        Ok(())
    }

    fn link_for(&self, entry: NodeId) -> &LinkSpec {
        self.links
            .iter()
            .find(|l| l.entry == entry)
            .expect("validated: every entry has a link")
    }

    /// Upstream nodes `keep` (all when `None`) followed by the downstream
    /// graph, joined by the links. Only upstream inputs stay inputs.
    pub fn assemble(&self, keep: Option<&BTreeSet<NodeId>>) -> AssembledSystem {
        let up = &self.upstream;
        let down = &self.downstream;
        let kept: Vec<NodeId> = (0..up.node_count())
            .filter(|v| keep.is_none_or(|k| k.contains(v)))
            .collect();
        let pos = |v: NodeId| kept.iter().position(|&k| k == v);
        let off = kept.len();
        let n = off + down.node_count();
        let mut a = DMatrix::zeros(n, n);
        for e in up.edges() {
            if let (Some(s), Some(d)) = (pos(e.src), pos(e.dst)) {
                a[(d, s)] = e.weight;
            }
        }
        for e in down.edges() {
            a[(off + e.dst, off + e.src)] = e.weight;
        }
        for l in &self.links {
            if let Some(s) = pos(l.exit) {
                a[(off + l.entry, s)] = l.weight;
            }
        }
        let ins: Vec<_> = up.inputs().iter().filter(|i| pos(i.node).is_some()).collect();
        let mut b = DMatrix::zeros(n, ins.len());
        for (k, i) in ins.iter().enumerate() {
            b[(pos(i.node).unwrap(), k)] = i.gain;
        }
        let labels = kept
            .iter()
            .map(|&v| up.label(v).to_string())
            .chain(down.labels().iter().cloned())
            .collect();
        AssembledSystem { labels, a, b }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SingleInputVerdict {
    /// Upstream nodes from an input to the link exit.
    pub path: Vec<NodeId>,
    /// Structural verdict on path + link + downstream.
    pub verdict: StructuralVerdict,
}

/// A downstream single-entry system driven through a path of an upstream
/// system of unknown controllability.
pub fn cascade_single_input_check(
    spec: &CascadeSpec,
    trials: usize,
    seed: u64,
) -> Result<SingleInputVerdict, ResilienceError> {
    spec.validate()?;
    let entries = spec.entries();
    if entries.len() != 1 {
        return Err(ResilienceError::InvalidCascade(format!(
            "single-input check needs one entry node, found {}",
            entries.len()
        )));
    }
    let link = spec.link_for(entries[0]);
    let up = &spec.upstream;
    let path = find_disjoint_input_paths(up, &up.input_nodes(), &[link.exit], None)
        .and_then(|mut p| p.pop())
        .ok_or_else(|| ResilienceError::NotComposable(up.label(link.exit).to_string()))?;
    let keep: BTreeSet<NodeId> = path.iter().copied().collect();
    let mut sys = spec.assemble(Some(&keep));
    // only the chain edges survive inside the upstream block
    let kept: Vec<NodeId> = keep.iter().copied().collect();
    for (i, &vi) in kept.iter().enumerate() {
        for (j, &vj) in kept.iter().enumerate() {
            let on_path = path.windows(2).any(|w| w[0] == vj && w[1] == vi);
            if !on_path {
                sys.a[(i, j)] = 0.0;
            }
        }
    }
    let mut b = DMatrix::zeros(sys.a.nrows(), 1);
    let start = kept.iter().position(|&v| v == path[0]).expect("path starts in kept set");
    b[(start, 0)] = 1.0;
    sys.b = b;
    Ok(SingleInputVerdict {
        verdict: structural_test(&sys.pattern(), trials, seed),
        path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiInputVerdict {
    /// Node-disjoint input-to-exit paths exist for every entry.
    pub sufficient_condition_met: bool,
    pub paths: Option<Vec<Vec<NodeId>>>,
    /// Structural verdict on the assembled composite (path union when the
    /// condition holds, full upstream otherwise).
    pub verdict: StructuralVerdict,
}

pub fn cascade_multi_input_check(spec: &CascadeSpec, trials: usize, seed: u64) -> Result<MultiInputVerdict, ResilienceError> {
    spec.validate()?;
    let up = &spec.upstream;
    let entries = spec.entries();
    let exits: Vec<NodeId> = entries.iter().map(|&e| spec.link_for(e).exit).collect();
    let distinct: BTreeSet<NodeId> = exits.iter().copied().collect();
    let paths = if distinct.len() == exits.len() {
        find_disjoint_input_paths(up, &up.input_nodes(), &exits, None)
    } else {
        None
    };
    let sys = match &paths {
        Some(ps) => {
            let keep: BTreeSet<NodeId> = ps.iter().flatten().copied().collect();
            spec.assemble(Some(&keep))
        }
        None => spec.assemble(None),
    };
    Ok(MultiInputVerdict {
        sufficient_condition_met: paths.is_some(),
        paths,
        verdict: structural_test(&sys.pattern(), trials, seed),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeDynamicsAudit {
    /// Largest in-degree over the parts before linking.
    pub parts_max_in_degree: usize,
    pub composite_max_in_degree: usize,
    pub in_degree_unchanged: bool,
    pub stability: StabilityCondition,
    /// Margin not positive after composition.
    pub flagged: bool,
    pub cactus_valid: bool,
    pub violations: Vec<Violation>,
    pub per_slot_full_rank: bool,
    pub hurwitz: bool,
    pub dropout: Vec<ResilienceRecord>,
}

impl CascadeDynamicsAudit {
    pub fn passes(&self) -> bool {
        !self.flagged
            && self.cactus_valid
            && self.per_slot_full_rank
            && self.hurwitz
            && self.dropout.iter().all(|r| {
                r.cactus_valid
                    && r.stability.holds
                    && r.structural_verdict.is_controllable()
                    && r.hurwitz
                    && r.per_slot_ranks.iter().all(|s| s.full)
            })
    }
}

/// Stability, cactus, rank and dropout audits on a composed cascade. The
/// simulation is skipped (and the audit flagged) when the margin is not
/// positive.
pub fn cascade_dynamics_audit(
    parts: &[&SignedDigraph],
    composite: &Composite,
    setup: &RunSetup<'_>,
    plans: &[DropoutPlan],
    trials: usize,
    seed: u64,
) -> Result<CascadeDynamicsAudit, ResilienceError> {
    let g = &composite.graph;
    let before = parts.iter().map(|p| max_in_degree(p)).max().unwrap_or(0);
    let after = max_in_degree(g);
    let stability = stability_condition(g, setup.params);
    let verdict: CactusVerdict = validate_generalized_cactus(g, &composite.decomposition);
    let mut audit = CascadeDynamicsAudit {
        parts_max_in_degree: before,
        composite_max_in_degree: after,
        in_degree_unchanged: before == after,
        stability,
        flagged: !stability.holds,
        cactus_valid: verdict.is_accepted(),
        violations: verdict.violations().to_vec(),
        per_slot_full_rank: false,
        hurwitz: false,
        dropout: Vec::new(),
    };
    if audit.flagged {
        return Ok(audit);
    }
    let opts = SimOptions {
        sample_stride: setup.sample_stride,
        mask: None,
    };
    let traj = simulate(g, setup.params, setup.signals, setup.x0, setup.slots, &opts)?;
    audit.per_slot_full_rank = per_slot_rank_audit(&traj, g, setup.params.c_n, None)
        .iter()
        .all(|s| s.full);
    audit.hurwitz = slots_hurwitz(&traj, setup.params.c_n, None);
    for (k, plan) in plans.iter().enumerate() {
        let (rec, _) = resilience_run(g, &composite.decomposition, plan, setup, trials, seed.wrapping_add(k as u64))?;
        audit.dropout.push(rec);
    }
    Ok(audit)
}
