//! Scenario files (JSON, schema 1) and the bundled experiments.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cactus::{CactusDecomposition, DecompositionSpec};
use crate::cluster::{ClusterError, ClusterSpec, ClusterTask};
use crate::dynamics::{DynamicsError, InputSignal, ModelParams};
use crate::graph::{GraphError, GraphSpec, SignedDigraph, Subgraph};
use crate::resilience::{DropoutPlan, DropoutPlanSpec, ResilienceError, Schedule};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the scenario seed.
pub const SEED_ENV: &str = "NEUROCACTUS_SEED";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("{SEED_ENV}={0} is not an unsigned integer")]
    BadSeed(String),
}

fn invalid(field: &'static str, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        message: e.to_string(),
    }
}

/// Initial state: one value for every node, or one per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Uniform(f64),
    PerNode(Vec<f64>),
}

fn yes() -> bool {
    true
}

/// Which analyses `analyze` runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Audits {
    #[serde(default = "yes")]
    pub cactus: bool,
    #[serde(default = "yes")]
    pub structural: bool,
    #[serde(default = "yes")]
    pub per_slot_rank: bool,
    #[serde(default = "yes")]
    pub hurwitz: bool,
}

impl Default for Audits {
    fn default() -> Self {
        Audits {
            cactus: true,
            structural: true,
            per_slot_rank: true,
            hurwitz: true,
        }
    }
}

fn default_stride() -> usize {
    10
}

fn default_trials() -> usize {
    20
}

/// On-disk form of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub graph: GraphSpec,
    pub decomposition: DecompositionSpec,
    pub params: ModelParams,
    /// Keyed by input node label; inputs not listed are held at zero.
    #[serde(default)]
    pub inputs: BTreeMap<String, InputSignal>,
    pub x0: InitialState,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    /// Random trials for the structural test.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub audits: Audits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<DropoutPlanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSpec>,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub graph: SignedDigraph,
    pub decomposition: CactusDecomposition,
    /// Aligned with `graph.inputs()`.
    pub signals: Vec<InputSignal>,
    pub x0: DVector<f64>,
    pub slots: usize,
    pub dropout: Option<DropoutPlan>,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Version(file.schema));
        }
        file.params.validate().map_err(|e| invalid("params", e))?;
        let graph = file.graph.build().map_err(|e| invalid("graph", e))?;
        let decomposition = file
            .decomposition
            .resolve(&graph)
            .map_err(|e| invalid("decomposition", e))?;
        for label in file.inputs.keys() {
            let v = graph.require_node(label).map_err(|e| invalid("inputs", e))?;
            if !graph.is_input(v) {
                return Err(invalid("inputs", format!("`{label}` is not an input node")));
            }
        }
        let signals: Vec<InputSignal> = graph
            .inputs()
            .iter()
            .map(|i| file.inputs.get(graph.label(i.node)).copied().unwrap_or(InputSignal::Zero))
            .collect();
        for s in &signals {
            if s.amplitude() > file.params.u_max * (1.0 + 1e-12) {
                return Err(invalid(
                    "inputs",
                    DynamicsError::InputExceedsBound {
                        amplitude: s.amplitude(),
                        u_max: file.params.u_max,
                    },
                ));
            }
        }
        let n = graph.node_count();
        let x0 = match &file.x0 {
            InitialState::Uniform(v) => DVector::from_element(n, *v),
            InitialState::PerNode(v) if v.len() == n => DVector::from_column_slice(v),
            InitialState::PerNode(v) => {
                return Err(invalid("x0", format!("{} values for {n} nodes", v.len())));
            }
        };
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x0", "non-finite value"));
        }
        let slots = file.params.slots_in(file.horizon).map_err(|e| invalid("horizon", e))?;
        let steps = file.params.steps_per_slot().map_err(|e| invalid("params", e))?;
        if file.sample_stride == 0 || steps % file.sample_stride != 0 {
            return Err(invalid(
                "sample_stride",
                format!("must divide the {steps} steps per slot"),
            ));
        }
        let dropout = match &file.dropout {
            Some(d) => {
                let plan = d.resolve(&graph).map_err(|e| invalid("dropout", e))?;
                if let Schedule::Intermittent { active } = &plan.schedule {
                    if active.len() != slots {
                        return Err(invalid(
                            "dropout",
                            format!("schedule has {} entries for {slots} slots", active.len()),
                        ));
                    }
                }
                Some(plan)
            }
            None => None,
        };
        if let Some(c) = &file.cluster {
            c.resolve_with(&graph, Vec::new(), None)
                .map_err(|e| invalid("cluster", e))?;
        }
        Ok(Scenario {
            file,
            graph,
            decomposition,
            signals,
            x0,
            slots,
            dropout,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn params(&self) -> &ModelParams {
        &self.file.params
    }

    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn to_json(&self) -> String {
        write_scenario(&self.file)
    }

    /// Graph, decomposition, signals and state after a permanent dropout;
    /// the scenario itself when there is none or it is intermittent.
    pub fn effective(&self) -> Result<EffectiveSystem, ScenarioError> {
        let plan = match &self.dropout {
            Some(p) if p.schedule == Schedule::Permanent => p,
            _ => {
                return Ok(EffectiveSystem {
                    graph: self.graph.clone(),
                    decomposition: self.decomposition.clone(),
                    signals: self.signals.clone(),
                    x0: self.x0.clone(),
                })
            }
        };
        let sub: Subgraph = plan.survivor(&self.graph).map_err(|e| invalid("dropout", e))?;
        let decomposition = match &plan.replacement {
            Some(r) => r.resolve(&sub.graph).map_err(|e| invalid("dropout", e))?,
            None => {
                self.decomposition
                    .restrict(&sub, &plan.edges)
                    .decomposition
            }
        };
        let keep: Vec<usize> = (0..self.graph.node_count())
            .filter(|&v| sub.map(v).is_some())
            .collect();
        let x0 = DVector::from_iterator(keep.len(), keep.iter().map(|&v| self.x0[v]));
        let signals = self
            .graph
            .inputs()
            .iter()
            .zip(&self.signals)
            .filter(|(i, _)| sub.map(i.node).is_some())
            .map(|(_, s)| *s)
            .collect();
        Ok(EffectiveSystem {
            graph: sub.graph,
            decomposition,
            signals,
            x0,
        })
    }

    pub fn cluster_task(&self) -> Result<Option<ClusterTask>, ClusterError> {
        self.file
            .cluster
            .as_ref()
            .map(|c| c.resolve(&self.graph))
            .transpose()
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveSystem {
    pub graph: SignedDigraph,
    pub decomposition: CactusDecomposition,
    pub signals: Vec<InputSignal>,
    pub x0: DVector<f64>,
}

impl From<GraphError> for ScenarioError {
    fn from(e: GraphError) -> Self {
        invalid("graph", e)
    }
}

impl From<ResilienceError> for ScenarioError {
    fn from(e: ResilienceError) -> Self {
        invalid("dropout", e)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Scenario::from_file(file)
}

pub fn write_scenario(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

const BUILTINS: [(&str, &str); 4] = [
    ("sixteen_node", include_str!("../scenarios/sixteen_node.json")),
    ("macaque", include_str!("../scenarios/macaque.json")),
    ("macaque_lesioned", include_str!("../scenarios/macaque_lesioned.json")),
    ("clustering", include_str!("../scenarios/clustering.json")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::Unknown(name.to_string()))?;
    parse_scenario(text)
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    BUILTINS
        .iter()
        .map(|(n, t)| parse_scenario(t).unwrap_or_else(|e| panic!("bundled scenario {n}: {e}")))
        .collect()
}

/// A path to a scenario file, or the name of a bundled one.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: name_or_path.to_string(),
            source,
        })?;
        return parse_scenario(&text);
    }
    builtin_scenario(name_or_path)
}

/// Parse a seed override value.
pub fn parse_seed(value: &str) -> Result<u64, ScenarioError> {
    value
        .trim()
        .parse()
        .map_err(|_| ScenarioError::BadSeed(value.to_string()))
}

/// Replace the scenario seed with `NEUROCACTUS_SEED` when set.
pub fn apply_seed_env(s: &mut Scenario) -> Result<(), ScenarioError> {
    if let Ok(v) = std::env::var(SEED_ENV) {
        s.file.seed = parse_seed(&v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 4);
        let s = &all[0];
        assert_eq!(s.graph.node_count(), 16);
        assert_eq!(s.graph.inputs().len(), 2);
        assert_eq!(s.slots, 200);
        let p = s.params();
        assert_eq!((p.c_n, p.tau, p.theta, p.c_a_plus), (5.0, 0.2, 0.1, 0.98));
        let b = s.graph.bounds();
        assert_eq!((b.lower_pos, b.upper_pos, b.lower_neg, b.upper_neg), (0.1, 1.2, -1.2, -0.1));
        assert_eq!(s.signals[0].eval(1.0), 5.0 * 1f64.sin());
        assert_eq!(s.signals[1].eval(1.0), -5.0 * 1f64.cos());
    }

    #[test]
    fn macaque_regions_and_weights() {
        let s = builtin_scenario("macaque").unwrap();
        for r in ["SC", "MD", "FEF", "PF", "IT", "TEO", "LGN", "V1", "V2", "V3", "V4", "PL", "MT/MST", "PMd"] {
            assert!(s.graph.node_id(r).is_some(), "{r}");
        }
        assert!(s.graph.labels().iter().any(|l| l.contains("AIP") || l.contains("LIP")));
        assert!(s.graph.edges().iter().all(|e| [0.5, 0.2].contains(&e.weight.abs())));
        assert!(s.signals.iter().all(|u| u.eval(0.3) == 1.0));
    }

    #[test]
    fn lesion_removes_two_edges() {
        let base = builtin_scenario("macaque").unwrap();
        let les = builtin_scenario("macaque_lesioned").unwrap();
        assert_eq!(base.file.graph, les.file.graph);
        let eff = les.effective().unwrap();
        assert_eq!(eff.graph.edges().len() + 2, base.graph.edges().len());
        let v1 = eff.graph.node_id("V1").unwrap();
        let v3 = eff.graph.node_id("V3").unwrap();
        assert!(!eff.graph.has_edge(v1, v3) && !eff.graph.has_edge(v3, v1));
    }

    #[test]
    fn round_trip() {
        for s in builtin_scenarios() {
            let again = parse_scenario(&s.to_json()).unwrap();
            assert_eq!(again.file, s.file);
        }
    }

    #[test]
    fn malformed_sign_is_a_schema_error() {
        let text = builtin_scenario("sixteen_node")
            .unwrap()
            .to_json()
            .replacen("\"sign\": \"+\"", "\"sign\": \"*\"", 1);
        match parse_scenario(&text) {
            Err(ScenarioError::Schema { line, message, .. }) => {
                assert!(line > 1);
                assert!(message.contains('*'), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn horizon_must_be_whole_slots() {
        let mut f = builtin_scenario("sixteen_node").unwrap().file;
        f.horizon = 1.05;
        assert!(matches!(
            Scenario::from_file(f),
            Err(ScenarioError::Invalid { field: "horizon", .. })
        ));
    }

    #[test]
    fn unknown_input_label_rejected() {
        let mut f = builtin_scenario("sixteen_node").unwrap().file;
        f.inputs.insert("3".into(), InputSignal::Zero);
        assert!(matches!(
            Scenario::from_file(f),
            Err(ScenarioError::Invalid { field: "inputs", .. })
        ));
    }

    #[test]
    fn missing_inputs_are_zero_and_scalar_x0_expands() {
        let mut f = builtin_scenario("sixteen_node").unwrap().file;
        f.inputs.clear();
        f.x0 = InitialState::Uniform(0.25);
        let s = Scenario::from_file(f).unwrap();
        assert!(s.signals.iter().all(|u| *u == InputSignal::Zero));
        assert!(s.x0.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn seed_values() {
        assert_eq!(parse_seed(" 42 ").unwrap(), 42);
        assert!(parse_seed("-1").is_err());
    }
}
