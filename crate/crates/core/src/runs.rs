//! End-to-end runs of a scenario: simulation, analysis, steering energy,
//! dropout and clustering, each with a serializable report.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::cactus::{validate_generalized_cactus, Violation};
use crate::cluster::{run_clustering, ClusterError, ClusterResult};
use crate::control::{
    per_slot_rank_audit, structural_observability_test, structural_test, SlotRank, StructuralVerdict,
    StructurePattern,
};
use crate::dynamics::{
    hurwitz_check, invariant_bound, simulate, stability_condition, DynamicsError, SimOptions, StabilityCondition,
    Trajectory,
};
use crate::energy::{
    augment_inputs, augmentation_monotonicity, piecewise_energy, piecewise_steering, EnergyError, EnergyReport,
    Monotonicity, SteeringProblem, DEFAULT_PANELS,
};
use crate::graph::{GraphError, SignedDigraph};
use crate::resilience::{resilience_run, DropoutPlanSpec, ResilienceError, ResilienceRecord, RunSetup, HURWITZ_TOL};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{0}")]
    Input(String),
}

/// Entries outside their sign-class interval plus entries whose zero
/// pattern differs from the graph, summed over all matrices.
pub fn polytope_violations(weights: &[DMatrix<f64>], g: &SignedDigraph) -> usize {
    let (lo, hi) = g.bound_matrices();
    let pattern = g.weight_matrix();
    let mut bad = 0;
    for a in weights {
        for ((&w, &l), (&h, &p)) in a.iter().zip(lo.iter()).zip(hi.iter().zip(pattern.iter())) {
            if (p == 0.0) != (w == 0.0) || (p != 0.0 && !(w >= l && w <= h)) {
                bad += 1;
            }
        }
    }
    bad
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub slots: usize,
    pub horizon: f64,
    pub nodes: usize,
    pub dropout: Option<DropoutPlanSpec>,
    pub stability: StabilityCondition,
    /// `‖B‖∞ u_max / margin`, when the margin is positive.
    pub invariant_bound: Option<f64>,
    pub peak_abs: f64,
    pub polytope_violations: usize,
    pub hurwitz_all_slots: bool,
    pub final_state: Vec<f64>,
}

pub struct SimulationRun {
    /// The graph actually simulated (after any permanent dropout).
    pub graph: SignedDigraph,
    pub trajectory: Trajectory,
    pub report: SimulationReport,
}

pub fn run_simulation(s: &Scenario) -> Result<SimulationRun, RunError> {
    let eff = s.effective()?;
    let params = s.params();
    let mask = s.dropout.as_ref().and_then(|d| d.slot_mask(&s.graph));
    let opts = SimOptions {
        sample_stride: s.file.sample_stride,
        mask: mask.clone(),
    };
    let traj = simulate(&eff.graph, params, &eff.signals, &eff.x0, s.slots, &opts)?;
    let stability = stability_condition(&eff.graph, params);
    let hurwitz = (0..traj.slot_count())
        .all(|p| hurwitz_check(&traj.effective_weights(p, mask.as_ref()), params.c_n).passes(HURWITZ_TOL));
    let report = SimulationReport {
        scenario: s.name().to_string(),
        seed: s.seed(),
        slots: s.slots,
        horizon: s.file.horizon,
        nodes: eff.graph.node_count(),
        dropout: s.file.dropout.clone(),
        stability,
        invariant_bound: invariant_bound(&eff.graph, params).ok(),
        peak_abs: traj.peak_abs,
        polytope_violations: polytope_violations(&traj.weights, &eff.graph),
        hurwitz_all_slots: hurwitz,
        final_state: traj.final_state().iter().copied().collect(),
    };
    Ok(SimulationRun {
        graph: eff.graph,
        trajectory: traj,
        report,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub seed: u64,
    pub cactus_valid: Option<bool>,
    pub violations: Vec<Violation>,
    pub stability: StabilityCondition,
    pub structural: Option<StructuralVerdict>,
    pub structural_observability: Option<StructuralVerdict>,
    pub per_slot: Vec<SlotRank>,
    pub full_rank_all_slots: Option<bool>,
    pub hurwitz_all_slots: Option<bool>,
}

pub fn run_analysis(s: &Scenario) -> Result<AnalysisReport, RunError> {
    let audits = s.file.audits;
    let eff = s.effective()?;
    let g = &eff.graph;
    let params = s.params();
    let mut report = AnalysisReport {
        scenario: s.name().to_string(),
        seed: s.seed(),
        cactus_valid: None,
        violations: Vec::new(),
        stability: stability_condition(g, params),
        structural: None,
        structural_observability: None,
        per_slot: Vec::new(),
        full_rank_all_slots: None,
        hurwitz_all_slots: None,
    };
    if audits.cactus {
        let v = validate_generalized_cactus(g, &eff.decomposition);
        report.cactus_valid = Some(v.is_accepted());
        report.violations = v.violations().to_vec();
    }
    if audits.structural {
        let pattern = StructurePattern::from_graph(g);
        report.structural = Some(structural_test(&pattern, s.file.trials, s.seed()));
        if !g.outputs().is_empty() {
            report.structural_observability =
                Some(structural_observability_test(&pattern, s.file.trials, s.seed()));
        }
    }
    if audits.per_slot_rank || audits.hurwitz {
        let run = run_simulation(s)?;
        let mask = s.dropout.as_ref().and_then(|d| d.slot_mask(&s.graph));
        if audits.per_slot_rank {
            report.per_slot = per_slot_rank_audit(&run.trajectory, g, params.c_n, mask.as_ref());
            report.full_rank_all_slots = Some(report.per_slot.iter().all(|r| r.full));
        }
        if audits.hurwitz {
            report.hurwitz_all_slots = Some(run.report.hurwitz_all_slots);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRunReport {
    pub scenario: String,
    pub seed: u64,
    pub first_slot: usize,
    pub energy: EnergyReport,
    pub augmented_nodes: Vec<String>,
    pub monotonicity: Option<Monotonicity>,
}

pub struct EnergyRun {
    pub report: EnergyRunReport,
    /// Steering input samples `(t, u)` over the whole segmentation.
    pub input: Vec<(f64, DVector<f64>)>,
}

/// Input samples per slot in the steering output.
pub const INPUT_SAMPLES_PER_SLOT: usize = 200;

/// Minimum-energy steering through waypoints at consecutive slot
/// boundaries, frozen at the slot matrices of the scenario's own run.
pub fn run_energy(
    s: &Scenario,
    waypoints: &[(usize, DVector<f64>)],
    augment: &[String],
) -> Result<EnergyRun, RunError> {
    let run = run_simulation(s)?;
    let g = &run.graph;
    let params = s.params();
    let first = waypoints
        .first()
        .ok_or_else(|| RunError::Input("no waypoints".into()))?
        .0;
    for (k, (p, _)) in waypoints.iter().enumerate() {
        if *p != first + k {
            return Err(RunError::Input(format!(
                "waypoint slot indices must be consecutive; found {p} after {}",
                first + k - 1
            )));
        }
    }
    let last = first + waypoints.len() - 1;
    if waypoints.len() < 2 || last > run.trajectory.slot_count() {
        return Err(RunError::Input(format!(
            "waypoints must span at least one of the {} slots",
            run.trajectory.slot_count()
        )));
    }
    let n = g.node_count();
    let shift = DMatrix::<f64>::identity(n, n).scale(params.c_n);
    let prob = SteeringProblem {
        slot_matrices: run.trajectory.weights[first..last].iter().map(|a| a - &shift).collect(),
        b: g.input_matrix(),
        waypoints: waypoints.iter().map(|(_, x)| x.clone()).collect(),
        tau: params.tau,
    };
    prob.validate()?;
    let energy = piecewise_energy(&prob, DEFAULT_PANELS)?;
    let mut input = Vec::new();
    for (k, st) in piecewise_steering(&prob, DEFAULT_PANELS)?.iter().enumerate() {
        let t0 = (first + k) as f64 * params.tau;
        let samples = st.sample_input(INPUT_SAMPLES_PER_SLOT)?;
        let skip = usize::from(k > 0);
        input.extend(samples.into_iter().skip(skip).map(|(t, u)| (t0 + t, u)));
    }
    let nodes = augment
        .iter()
        .map(|l| g.require_node(l))
        .collect::<Result<Vec<_>, _>>()?;
    let monotonicity = if nodes.is_empty() {
        None
    } else {
        Some(augmentation_monotonicity(&prob, &augment_inputs(&prob.b, &nodes), DEFAULT_PANELS)?)
    };
    Ok(EnergyRun {
        report: EnergyRunReport {
            scenario: s.name().to_string(),
            seed: s.seed(),
            first_slot: first,
            energy,
            augmented_nodes: augment.to_vec(),
            monotonicity,
        },
        input,
    })
}

/// Audit and run one dropout plan against the scenario's base graph.
pub fn run_resilience(s: &Scenario, plan: &DropoutPlanSpec) -> Result<(ResilienceRecord, Trajectory), RunError> {
    let plan = plan.resolve(&s.graph)?;
    let setup = RunSetup {
        params: s.params(),
        signals: &s.signals,
        x0: &s.x0,
        slots: s.slots,
        sample_stride: s.file.sample_stride,
    };
    Ok(resilience_run(&s.graph, &s.decomposition, &plan, &setup, s.file.trials, s.seed())?)
}

/// Clustering on the scenario's own dataset, or on `points` when given.
pub fn run_cluster(
    s: &Scenario,
    points: Option<(Vec<[f64; 2]>, Option<Vec<usize>>)>,
) -> Result<ClusterResult, RunError> {
    let spec = s
        .file
        .cluster
        .as_ref()
        .ok_or_else(|| RunError::Input(format!("scenario `{}` has no cluster task", s.name())))?;
    let task = match points {
        Some((p, l)) => spec.resolve_with(&s.graph, p, l)?,
        None => spec.resolve(&s.graph)?,
    };
    Ok(run_clustering(&s.graph, s.params(), &task)?)
}
