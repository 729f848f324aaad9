//! Browser bindings: simulate a bundled scenario, audit per-slot ranks
//! under an edge dropout, and compute minimum steering energy on a chain.
//!
//! Every export returns a JSON string; the plain-Rust `*_json` functions do
//! the work so they can be tested natively.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use neurocactus::control::per_slot_rank_audit;
use neurocactus::dynamics::{simulate, SimOptions, SlotMask};
use neurocactus::energy::{min_energy_steering, DEFAULT_PANELS};
use neurocactus::scenario::{builtin_names, builtin_scenario};

/// Plot points kept per series.
const MAX_POINTS: usize = 400;

#[derive(Serialize)]
struct SimulationView {
    labels: Vec<String>,
    times: Vec<f64>,
    /// `states[i]` is the series of node `i`.
    states: Vec<Vec<f64>>,
    peak_abs: f64,
    slots: usize,
}

pub fn scenario_names_json() -> String {
    serde_json::to_string(&builtin_names()).unwrap()
}

/// Run a bundled scenario for `horizon` seconds (rounded down to whole
/// slots) with both plasticity decay factors set to `c_a`.
pub fn simulate_json(name: &str, horizon: f64, c_a: f64) -> Result<String, String> {
    let s = builtin_scenario(name).map_err(|e| e.to_string())?;
    let eff = s.effective().map_err(|e| e.to_string())?;
    let mut params = *s.params();
    params.c_a_plus = c_a;
    params.c_a_minus = c_a;
    let slots = ((horizon / params.tau).floor() as usize).max(1);
    let opts = SimOptions {
        sample_stride: s.file.sample_stride,
        mask: None,
    };
    let traj = simulate(&eff.graph, &params, &eff.signals, &eff.x0, slots, &opts).map_err(|e| e.to_string())?;
    let step = traj.times.len().div_ceil(MAX_POINTS).max(1);
    let idx: Vec<usize> = (0..traj.times.len()).step_by(step).collect();
    let view = SimulationView {
        labels: eff.graph.labels().to_vec(),
        times: idx.iter().map(|&k| traj.times[k]).collect(),
        states: (0..eff.graph.node_count())
            .map(|i| idx.iter().map(|&k| traj.states[k][i]).collect())
            .collect(),
        peak_abs: traj.peak_abs,
        slots,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EdgeView {
    src: String,
    dst: String,
}

#[derive(Serialize)]
struct RankView {
    edges: Vec<EdgeView>,
    dropped: Vec<usize>,
    ranks: Vec<usize>,
    full: Vec<bool>,
    n: usize,
}

/// Per-slot controllability rank of a bundled scenario with the listed
/// edges (indices into the scenario's edge list) removed from the flow.
pub fn rank_audit_json(name: &str, dropped: &[usize]) -> Result<String, String> {
    let s = builtin_scenario(name).map_err(|e| e.to_string())?;
    let eff = s.effective().map_err(|e| e.to_string())?;
    let g = &eff.graph;
    let mut edges = std::collections::BTreeSet::new();
    for &k in dropped {
        let e = g.edges().get(k).ok_or_else(|| format!("no edge {k}"))?;
        edges.insert((e.src, e.dst));
    }
    let mask = SlotMask { edges, active: None };
    let opts = SimOptions {
        sample_stride: s.file.sample_stride,
        mask: Some(mask.clone()),
    };
    let traj = simulate(g, s.params(), &eff.signals, &eff.x0, s.slots, &opts).map_err(|e| e.to_string())?;
    let audit = per_slot_rank_audit(&traj, g, s.params().c_n, Some(&mask));
    let view = RankView {
        edges: g
            .edges()
            .iter()
            .map(|e| EdgeView {
                src: g.label(e.src).to_string(),
                dst: g.label(e.dst).to_string(),
            })
            .collect(),
        dropped: dropped.to_vec(),
        ranks: audit.iter().map(|r| r.rank).collect(),
        full: audit.iter().map(|r| r.full).collect(),
        n: g.node_count(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SteeringView {
    eta: f64,
    condition: f64,
    endpoint_error: f64,
    times: Vec<f64>,
    input: Vec<f64>,
}

/// Steer the leaky chain `x1 → x2 → … → xn` (leak 1, unit links, input at
/// `x1`) from rest to `target` in `tf` seconds.
pub fn chain_steering_json(target: &[f64], tf: f64) -> Result<String, String> {
    let n = target.len();
    if n == 0 {
        return Err("empty target".into());
    }
    let mut a = DMatrix::<f64>::identity(n, n).scale(-1.0);
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(0, 0)] = 1.0;
    let st = min_energy_steering(&a, &b, &DVector::zeros(n), &DVector::from_column_slice(target), tf, DEFAULT_PANELS)
        .map_err(|e| e.to_string())?;
    let (_, endpoint_error) = st.verify(1000).map_err(|e| e.to_string())?;
    let samples = st.sample_input(200).map_err(|e| e.to_string())?;
    let view = SteeringView {
        eta: st.eta,
        condition: st.condition,
        endpoint_error,
        times: samples.iter().map(|(t, _)| *t).collect(),
        input: samples.iter().map(|(_, u)| u[0]).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn scenario_names() -> String {
    scenario_names_json()
}

#[wasm_bindgen]
pub fn simulate_scenario(name: &str, horizon: f64, c_a: f64) -> Result<String, JsValue> {
    simulate_json(name, horizon, c_a).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rank_audit(name: &str, dropped: Vec<u32>) -> Result<String, JsValue> {
    let d: Vec<usize> = dropped.into_iter().map(|k| k as usize).collect();
    rank_audit_json(name, &d).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn chain_steering(target: Vec<f64>, tf: f64) -> Result<String, JsValue> {
    chain_steering_json(&target, tf).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn names_list_builtins() {
        let v: Value = serde_json::from_str(&scenario_names_json()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 4);
    }

    #[test]
    fn simulation_is_downsampled() {
        let v: Value = serde_json::from_str(&simulate_json("macaque", 2.0, 0.98).unwrap()).unwrap();
        assert_eq!(v["slots"], 10);
        let states = v["states"].as_array().unwrap();
        assert_eq!(states.len(), 16);
        assert!(states[0].as_array().unwrap().len() <= MAX_POINTS);
        assert!(simulate_json("macaque", 2.0, 1.5).is_err());
    }

    #[test]
    fn cutting_the_only_stem_link_loses_rank() {
        let base: Value = serde_json::from_str(&rank_audit_json("macaque", &[]).unwrap()).unwrap();
        assert!(base["full"].as_array().unwrap().iter().all(|f| f == true));
        let edges = base["edges"].as_array().unwrap();
        let k = edges
            .iter()
            .position(|e| e["src"] == "SC" && e["dst"] == "MD")
            .unwrap();
        let cut: Value = serde_json::from_str(&rank_audit_json("macaque", &[k]).unwrap()).unwrap();
        assert!(cut["ranks"].as_array().unwrap().iter().all(|r| r.as_u64().unwrap() < 16));
        assert!(rank_audit_json("macaque", &[999]).is_err());
    }

    #[test]
    fn chain_energy_shrinks_with_time() {
        let e = |tf: f64| -> f64 {
            let v: Value = serde_json::from_str(&chain_steering_json(&[1.0, 0.5, 0.2], tf).unwrap()).unwrap();
            assert!(v["endpoint_error"].as_f64().unwrap() < 1e-4);
            v["eta"].as_f64().unwrap()
        };
        assert!(e(3.0) < e(1.0));
    }
}
