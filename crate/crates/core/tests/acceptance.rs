//! Acceptance criteria, one line per criterion. Exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use neurocactus::cactus::{compose_cascade, validate_generalized_cactus};
use neurocactus::cluster::ClusterResult;
use neurocactus::control::{controllability_rank, pbh_left_eigentest};
use neurocactus::dynamics::{hurwitz_check, InputSignal, Trajectory};
use neurocactus::energy::{augment_inputs, augmentation_monotonicity, gramian, EnergyError, SteeringProblem, DEFAULT_PANELS};
use neurocactus::output::write_trajectory_csv;
use neurocactus::resilience::{
    cascade_dynamics_audit, cascade_single_input_check, DropoutPlan, RunSetup, Schedule, HURWITZ_TOL,
};
use neurocactus::runs::{polytope_violations, run_analysis, run_cluster, run_simulation, SimulationRun};
use neurocactus::scenario::{builtin_scenario, builtin_scenarios, InitialState, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sixteen() -> Scenario {
    builtin_scenario("sixteen_node").unwrap()
}

fn unforced(s: &Scenario) -> Scenario {
    let mut f = s.file.clone();
    f.inputs.clear();
    f.x0 = InitialState::Uniform(1.0);
    Scenario::from_file(f).unwrap()
}

fn hurwitz_all(traj: &Trajectory, c_n: f64) -> (bool, usize) {
    let bad = traj
        .weights
        .iter()
        .filter(|a| !hurwitz_check(a, c_n).passes(HURWITZ_TOL))
        .count();
    (bad == 0, bad)
}

fn boundedness(forced: &SimulationRun, elapsed: Duration) -> Outcome {
    let bound = forced.report.invariant_bound.unwrap_or(f64::NAN);
    let sampled = forced
        .trajectory
        .states
        .iter()
        .map(|x| x.amax())
        .fold(0.0, f64::max);
    let peak = forced.trajectory.peak_abs.max(sampled);
    let pass = (bound - 25.0).abs() < 1e-9 && peak <= bound && bound / peak >= 10.0 && elapsed.as_secs_f64() < 5.0;
    outcome(
        pass,
        format!(
            "bound {bound:.6}, peak |x| {peak:.6}, slack {:.1}x, {:.2} s",
            bound / peak,
            elapsed.as_secs_f64()
        ),
    )
}

fn stability(free: &SimulationRun, tau: f64) -> Outcome {
    let traj = &free.trajectory;
    let final_norm = traj.final_state().amax();
    let after: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= tau - 1e-12)
        .map(|(_, x)| x.amax())
        .collect();
    let rises = after.windows(2).filter(|w| w[1] > w[0]).count();
    outcome(
        final_norm < 1e-3 && rises == 0,
        format!("|x(40)|_inf = {final_norm:.3e}, increases after first slot: {rises}"),
    )
}

fn polytope(runs: &[(String, SimulationRun)], cluster: &ClusterResult, cluster_graph: &Scenario) -> Outcome {
    let mut total = 0;
    let mut parts = Vec::new();
    for (name, r) in runs {
        let v = polytope_violations(&r.trajectory.weights, &r.graph);
        total += v;
        parts.push(format!("{name} {v}"));
    }
    let v = polytope_violations(&cluster.weights, &cluster_graph.graph);
    total += v;
    parts.push(format!("clustering snapshots {v}"));
    outcome(total == 0, format!("violations: {}", parts.join(", ")))
}

fn hurwitz(forced: &SimulationRun, free: &SimulationRun, c_n: f64) -> Outcome {
    let (a, na) = hurwitz_all(&forced.trajectory, c_n);
    let (b, nb) = hurwitz_all(&free.trajectory, c_n);
    let slots = forced.trajectory.slot_count() + free.trajectory.slot_count();
    outcome(a && b, format!("{} of {slots} slot matrices fail", na + nb))
}

fn full_rank() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["sixteen_node", "macaque", "macaque_lesioned"] {
        let r = run_analysis(&builtin_scenario(name).unwrap()).unwrap();
        let ok = r.per_slot.iter().filter(|s| s.rank == 16 && s.full).count();
        pass &= ok == r.per_slot.len() && !r.per_slot.is_empty();
        parts.push(format!("{name} {ok}/{}", r.per_slot.len()));
    }
    outcome(pass, format!("slots at rank 16: {}", parts.join(", ")))
}

fn counterexample() -> Outcome {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0, 0.0, 0.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, 1.0, 0.0,
    ]);
    let b = DMatrix::from_column_slice(5, 1, &[1.0, 0.0, 0.0, 0.0, 0.0]);
    let unit = controllability_rank(&a, &b).rank;
    let mut r = common::rng(6);
    let mut hits = 0;
    for _ in 0..100 {
        let mut ar = a.clone();
        ar.iter_mut().filter(|v| **v != 0.0).for_each(|v| *v = common::random_weight(&mut r) * 1.5);
        let br = b.scale(r.random_range(0.5..1.5));
        if controllability_rank(&ar, &br).rank == 5 {
            hits += 1;
        }
    }
    outcome(unit == 5 && hits == 100, format!("unit weights rank {unit}, random re-weightings at rank 5: {hits}/100"))
}

fn oracle_equivalence() -> Outcome {
    let total = 500;
    let mut agree = 0;
    let mut unexplained = 0;
    let mut controllable = 0;
    for seed in 0..total {
        let (a, b) = common::random_system(seed);
        let svd = controllability_rank(&a, &b);
        let full = svd.rank == a.nrows();
        let pbh = pbh_left_eigentest(&a, &b);
        controllable += usize::from(full);
        if full == pbh.controllable {
            agree += 1;
            continue;
        }
        let near = |s: f64, tol: f64| s <= 10.0 * tol && s >= tol / 10.0;
        let sigma = svd.critical_singular_value(a.nrows()).unwrap_or(0.0);
        if !(near(sigma, svd.tolerance) || near(pbh.min_singular_value, pbh.tolerance)) {
            unexplained += 1;
        }
        println!(
            "    seed {seed}: svd rank {} (sigma {sigma:.3e}, tol {:.3e}), pbh {} (sigma {:.3e}, tol {:.3e})",
            svd.rank, svd.tolerance, pbh.controllable, pbh.min_singular_value, pbh.tolerance
        );
    }
    let rate = agree as f64 / total as f64;
    outcome(
        rate >= 0.995 && unexplained == 0,
        format!(
            "agreement {agree}/{total} ({:.1}%), {controllable} controllable, unexplained disagreements {unexplained}",
            100.0 * rate
        ),
    )
}

fn energy_monotonicity(forced: &SimulationRun) -> Outcome {
    let s = sixteen();
    let g = &forced.graph;
    let n = g.node_count();
    let mut r = common::rng(8);
    let candidates: Vec<usize> = (0..n).filter(|v| !g.is_input(*v)).collect();
    let (mut ok, mut refused, mut bad) = (0, 0, 0);
    let mut best_condition = f64::INFINITY;
    let mut max_err = 0.0f64;
    for _ in 0..100 {
        let p0 = r.random_range(0..forced.trajectory.slot_count() - 3);
        let wps: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0)))
            .collect();
        let extra = candidates[r.random_range(0..candidates.len())];
        let shift = DMatrix::<f64>::identity(n, n).scale(s.params().c_n);
        let prob = SteeringProblem {
            slot_matrices: forced.trajectory.weights[p0..p0 + 3].iter().map(|a| a - &shift).collect(),
            b: g.input_matrix(),
            waypoints: wps,
            tau: s.params().tau,
        };
        match augmentation_monotonicity(&prob, &augment_inputs(&prob.b, &[extra]), DEFAULT_PANELS) {
            Ok(m) => {
                let err = m.base.max_endpoint_error().max(m.augmented.max_endpoint_error());
                max_err = max_err.max(err);
                if m.satisfied && err <= 1e-4 {
                    ok += 1;
                } else {
                    bad += 1;
                }
            }
            Err(e) => {
                refused += 1;
                let mut e = &e;
                while let EnergyError::Slot { source, .. } = e {
                    e = source;
                }
                if let EnergyError::NotSteerable { condition } = e {
                    best_condition = best_condition.min(*condition);
                }
            }
        }
    }
    outcome(
        ok == 100,
        format!(
            "{ok}/100 satisfied, {bad} violated, {refused} refused as not steerable (smallest slot Gramian condition {best_condition:.2e}, refusal above 1e12), max endpoint error {max_err:.2e}"
        ),
    )
}

fn scalar_gramian() -> Outcome {
    let w = gramian(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 1.0), 1.0, DEFAULT_PANELS).unwrap()
        [(0, 0)];
    let exact = (1.0 - (-2.0f64).exp()) / 2.0;
    outcome(
        (w - exact).abs() <= 1e-8 && (w - 0.4323323584).abs() <= 1e-8,
        format!("W(1) = {w:.12}, |error| {:.2e}", (w - exact).abs()),
    )
}

fn cascades() -> Outcome {
    let mut controllable = 0;
    for seed in 0..200 {
        let spec = common::random_single_input_cascade(seed);
        if cascade_single_input_check(&spec, 20, seed).is_ok_and(|v| v.verdict.is_controllable()) {
            controllable += 1;
        }
    }
    let (parts, links) = common::five_part_cascade();
    let composite = compose_cascade(&parts, &links).unwrap();
    let cactus_ok = validate_generalized_cactus(&composite.graph, &composite.decomposition).is_accepted();
    let g = &composite.graph;
    let signals = [
        InputSignal::Sine {
            amp: 2.0,
            freq: 1.0,
            phase: 0.0,
        },
        InputSignal::Cosine {
            amp: -2.0,
            freq: 1.0,
            phase: 0.0,
        },
    ];
    let x0 = DVector::from_element(g.node_count(), 0.5);
    let slots = 50;
    let setup = RunSetup {
        params: &common::params(),
        signals: &signals,
        x0: &x0,
        slots,
        sample_stride: 10,
    };
    let d0 = g.node_id("d0").unwrap();
    let d3 = g.node_id("d3").unwrap();
    let plan = DropoutPlan {
        edges: [(d0, d3)].into(),
        schedule: Schedule::Intermittent {
            active: (0..slots).map(|p| p % 2 == 1).collect(),
        },
        ..DropoutPlan::empty()
    };
    let parts_ref: Vec<_> = parts.iter().map(|p| &p.graph).collect();
    let audit = cascade_dynamics_audit(&parts_ref, &composite, &setup, &[plan], 20, 10).unwrap();
    outcome(
        controllable == 200 && cactus_ok && audit.passes(),
        format!(
            "random single-input cascades controllable {controllable}/200; five-part composite ({} nodes) cactus {}, audits {}",
            g.node_count(),
            if cactus_ok { "valid" } else { "invalid" },
            if audit.passes() { "pass" } else { "fail" }
        ),
    )
}

fn clustering(result: &ClusterResult, elapsed: Duration) -> Outcome {
    let agreement = result.agreement.unwrap_or(0.0);
    outcome(
        agreement >= 0.95 && elapsed.as_secs_f64() < 60.0,
        format!(
            "{} points, Rand index {agreement:.4}, {} unsettled, {:.2} s",
            result.readouts.len(),
            result.unsettled.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn csv_bytes(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trajectory_csv(traj, &mut buf).unwrap();
    buf
}

fn determinism(first_cluster: &ClusterResult) -> Outcome {
    let mut same = true;
    let mut checked = Vec::new();
    for s in builtin_scenarios() {
        let (a, b) = (run_simulation(&s).unwrap(), run_simulation(&s).unwrap());
        same &= csv_bytes(&a.trajectory) == csv_bytes(&b.trajectory);
        same &= serde_json::to_string(&a.report).unwrap() == serde_json::to_string(&b.report).unwrap();
        checked.push(s.name().to_string());
    }
    for name in ["sixteen_node", "macaque_lesioned"] {
        let s = builtin_scenario(name).unwrap();
        let a = serde_json::to_string(&run_analysis(&s).unwrap()).unwrap();
        same &= a == serde_json::to_string(&run_analysis(&s).unwrap()).unwrap();
    }
    let again = run_cluster(&builtin_scenario("clustering").unwrap(), None).unwrap();
    same &= serde_json::to_string(first_cluster).unwrap() == serde_json::to_string(&again).unwrap();
    let verdicts = |seed| serde_json::to_string(&cascade_single_input_check(&common::random_single_input_cascade(seed), 20, seed).unwrap()).unwrap();
    same &= (0..20).all(|seed| verdicts(seed) == verdicts(seed));
    outcome(
        same,
        format!(
            "repeated runs bit-identical: simulation CSV/JSON for {}, analysis JSON, clustering JSON, cascade verdicts",
            checked.join(", ")
        ),
    )
}

fn main() {
    let s16 = sixteen();
    let c_n = s16.params().c_n;
    let t = Instant::now();
    let forced = run_simulation(&s16).unwrap();
    let forced_time = t.elapsed();
    let free = run_simulation(&unforced(&s16)).unwrap();
    let mut runs = vec![("sixteen_node".to_string(), run_simulation(&s16).unwrap())];
    for name in ["macaque", "macaque_lesioned", "clustering"] {
        runs.push((name.to_string(), run_simulation(&builtin_scenario(name).unwrap()).unwrap()));
    }
    let clus_scenario = builtin_scenario("clustering").unwrap();
    let t = Instant::now();
    let cluster = run_cluster(&clus_scenario, None).unwrap();
    let cluster_time = t.elapsed();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("boundedness", Box::new(|| boundedness(&forced, forced_time))),
        ("stability", Box::new(|| stability(&free, s16.params().tau))),
        ("weight polytope and sign pattern", Box::new(|| polytope(&runs, &cluster, &clus_scenario))),
        ("Hurwitz audit", Box::new(|| hurwitz(&forced, &free, c_n))),
        ("per-slot full rank", Box::new(full_rank)),
        ("shared-node cascade counterexample", Box::new(counterexample)),
        ("PBH and SVD rank agreement", Box::new(oracle_equivalence)),
        ("energy monotonicity under input augmentation", Box::new(|| energy_monotonicity(&forced))),
        ("scalar Gramian", Box::new(scalar_gramian)),
        ("cascade composition", Box::new(cascades)),
        ("clustering", Box::new(|| clustering(&cluster, cluster_time))),
        ("determinism", Box::new(|| determinism(&cluster))),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {:>2} {}: {} ({})",
            k + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}

