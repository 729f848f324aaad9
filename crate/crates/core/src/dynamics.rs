//! Hybrid neural dynamics: a fast membrane-potential flow under a weight
//! matrix that is frozen within each plasticity slot of length `tau` and
//! updated by a clipped Hebbian/anti-Hebbian rule at slot boundaries.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{max_in_degree, NodeId, Sign, SignedDigraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("dt = {dt} does not divide tau = {tau} into an integer number of steps")]
    StepMismatch { dt: f64, tau: f64 },
    #[error("horizon {horizon} is not a positive multiple of tau = {tau}")]
    HorizonMismatch { horizon: f64, tau: f64 },
    #[error("self-loop on node {0}; the weight matrix must have a zero diagonal")]
    SelfLoop(NodeId),
    #[error("weight matrix has a nonzero diagonal entry at node {0}")]
    NonzeroDiagonal(NodeId),
    #[error("state diverged at t = {time:.6} (node {node} is not finite)")]
    Divergence { time: f64, node: NodeId },
    #[error("invariant set undefined: stability margin {margin} is not positive")]
    InvariantUndefined { margin: f64 },
    #[error("expected {expected} input signals, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("input signal amplitude {amplitude} exceeds u_max = {u_max}")]
    InputExceedsBound { amplitude: f64, u_max: f64 },
    #[error("initial state has length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("dropout schedule covers {got} slots, expected {expected}")]
    MaskLength { expected: usize, got: usize },
}

/// Plasticity nonlinearity `φ`: odd, bounded by one, `φ(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plasticity {
    #[default]
    Tanh,
    /// `gain · tanh(z)`; `gain = 0` freezes the Hebbian drive.
    ScaledTanh { gain: f64 },
}

impl Plasticity {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Plasticity::Tanh => z.tanh(),
            Plasticity::ScaledTanh { gain } => gain * z.tanh(),
        }
    }
}

/// Default plasticity function.
pub fn phi_eval(z: f64) -> f64 {
    Plasticity::Tanh.eval(z)
}

/// Dead-zone activation: `v` when `|v| > theta`, else 0.
pub fn gamma_theta(v: f64, theta: f64) -> f64 {
    if v.abs() > theta {
        v
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Leak rate.
    pub c_n: f64,
    /// Synaptic decay on excitatory edges, in (0, 1).
    pub c_a_plus: f64,
    /// Synaptic decay on inhibitory edges, in (0, 1).
    pub c_a_minus: f64,
    /// Activation threshold.
    pub theta: f64,
    /// Plasticity slot length (seconds).
    pub tau: f64,
    /// Integrator step; must divide `tau`.
    pub dt: f64,
    #[serde(default)]
    pub plasticity: Plasticity,
    /// Bound on every `|u_i(t)|`.
    pub u_max: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        if !(self.c_n > 0.0 && self.c_n.is_finite()) {
            return bad("c_n must be positive");
        }
        // c_a = 1 is admitted so plasticity can be frozen for experiments.
        for (name, c) in [("c_a_plus", self.c_a_plus), ("c_a_minus", self.c_a_minus)] {
            if !(c > 0.0 && c <= 1.0) {
                return bad(&format!("{name} must lie in (0, 1]"));
            }
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad("theta must be non-negative");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.u_max >= 0.0 && self.u_max.is_finite()) {
            return bad("u_max must be non-negative");
        }
        if let Plasticity::ScaledTanh { gain } = self.plasticity {
            if !gain.is_finite() {
                return bad("plasticity gain must be finite");
            }
        }
        self.steps_per_slot().map(|_| ())
    }

    /// Integrator steps per plasticity slot.
    pub fn steps_per_slot(&self) -> Result<usize, DynamicsError> {
        let k = (self.tau / self.dt).round();
        if k < 1.0 || (k * self.dt - self.tau).abs() > 1e-9 * self.tau {
            return Err(DynamicsError::StepMismatch {
                dt: self.dt,
                tau: self.tau,
            });
        }
        Ok(k as usize)
    }

    /// Number of whole slots in `horizon`.
    pub fn slots_in(&self, horizon: f64) -> Result<usize, DynamicsError> {
        let k = (horizon / self.tau).round();
        if !(horizon > 0.0) || k < 1.0 || (k * self.tau - horizon).abs() > 1e-9 * horizon {
            return Err(DynamicsError::HorizonMismatch {
                horizon,
                tau: self.tau,
            });
        }
        Ok(k as usize)
    }

    fn decay(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Excitatory => self.c_a_plus,
            Sign::Inhibitory => self.c_a_minus,
        }
    }
}

/// Waveform driving one input node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Zero,
    Constant { value: f64 },
    /// `amp · sin(freq · t + phase)`
    Sine {
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp · cos(freq · t + phase)`
    Cosine {
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InputSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            InputSignal::Zero => 0.0,
            InputSignal::Constant { value } => value,
            InputSignal::Sine { amp, freq, phase } => amp * (freq * t + phase).sin(),
            InputSignal::Cosine { amp, freq, phase } => amp * (freq * t + phase).cos(),
        }
    }

    /// `sup_t |u(t)|`.
    pub fn amplitude(&self) -> f64 {
        match *self {
            InputSignal::Zero => 0.0,
            InputSignal::Constant { value } => value.abs(),
            InputSignal::Sine { amp, .. } | InputSignal::Cosine { amp, .. } => amp.abs(),
        }
    }
}

/// Edges (as `(src, dst)`) removed from the flow during selected slots.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotMask {
    pub edges: BTreeSet<(NodeId, NodeId)>,
    /// `None`: every slot. `Some(v)`: slot `p` is masked iff `v[p]`.
    pub active: Option<Vec<bool>>,
}

impl SlotMask {
    pub fn is_active(&self, slot: usize) -> bool {
        self.active
            .as_ref()
            .is_none_or(|v| v.get(slot).copied().unwrap_or(false))
    }

    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = a.clone();
        for &(s, d) in &self.edges {
            m[(d, s)] = 0.0;
        }
        m
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimOptions {
    /// Record every `sample_stride`-th integrator step; must divide the
    /// steps per slot. 0 is treated as 1.
    pub sample_stride: usize,
    pub mask: Option<SlotMask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `y = C x` at each sample.
    pub outputs: Vec<DVector<f64>>,
    /// `A_p`, the weights in force during slot `p`.
    pub weights: Vec<DMatrix<f64>>,
    /// Sample index of each slot start `t = p·tau`, plus the final sample.
    pub slot_boundaries: Vec<usize>,
    /// Whether the dropout mask was applied in slot `p`.
    pub masked: Vec<bool>,
    /// `max_i |x_i|` over every integrator step, not only recorded samples.
    pub peak_abs: f64,
}

impl Trajectory {
    pub fn slot_count(&self) -> usize {
        self.weights.len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories hold at least one sample")
    }

    /// Weights actually used by the flow in slot `p` (mask applied).
    pub fn effective_weights(&self, p: usize, mask: Option<&SlotMask>) -> DMatrix<f64> {
        match mask {
            Some(m) if self.masked[p] => m.apply(&self.weights[p]),
            _ => self.weights[p].clone(),
        }
    }

    /// State at the start of each slot and at the horizon.
    pub fn boundary_states(&self) -> Vec<DVector<f64>> {
        self.slot_boundaries
            .iter()
            .map(|&i| self.states[i].clone())
            .collect()
    }
}

/// `B u(t)` for signals aligned with `g.inputs()`.
pub fn drive(g: &SignedDigraph, signals: &[InputSignal], t: f64, out: &mut DVector<f64>) {
    out.fill(0.0);
    for (inp, s) in g.inputs().iter().zip(signals) {
        out[inp.node] += inp.gain * s.eval(t);
    }
}

/// Hebbian/anti-Hebbian update at a slot boundary:
/// excitatory `clip(c⁺ a + φ(x_i x_j))`, inhibitory `clip(c⁻ a − φ(x_i x_j))`.
/// Entries off the edge set stay zero, so the sign pattern never changes.
pub fn weight_update(
    a_p: &DMatrix<f64>,
    x: &DVector<f64>,
    g: &SignedDigraph,
    params: &ModelParams,
) -> Result<DMatrix<f64>, DynamicsError> {
    let n = g.node_count();
    for i in 0..n {
        if a_p[(i, i)] != 0.0 {
            return Err(DynamicsError::NonzeroDiagonal(i));
        }
    }
    let bounds = g.bounds();
    let mut next = DMatrix::zeros(n, n);
    for e in g.edges() {
        let (i, j) = (e.dst, e.src);
        let hebb = params.plasticity.eval(x[i] * x[j]);
        let raw = params.decay(e.sign) * a_p[(i, j)] + e.sign.as_f64() * hebb;
        let (lo, hi) = bounds.interval(e.sign);
        next[(i, j)] = raw.clamp(lo, hi);
    }
    Ok(next)
}

/// Output of one integration slot.
#[derive(Clone, Debug)]
pub struct SlotRun {
    pub end: DVector<f64>,
    /// `(t, x)` every `stride` steps, excluding the start and including the end.
    pub samples: Vec<(f64, DVector<f64>)>,
    pub peak_abs: f64,
}

fn vector_field(
    x: &DVector<f64>,
    a: &DMatrix<f64>,
    bu: &DVector<f64>,
    c_n: f64,
    theta: f64,
    out: &mut DVector<f64>,
) {
    a.mul_to(x, out);
    for i in 0..x.len() {
        out[i] = -c_n * x[i] + gamma_theta(out[i], theta) + bu[i];
    }
}

/// Integrate `ẋ = −c_n x + Γ_θ(A x) + B u(t)` over one slot with `A` frozen,
/// using classical RK4 at step `params.dt`.
pub fn step_slot(
    x0: &DVector<f64>,
    a: &DMatrix<f64>,
    g: &SignedDigraph,
    signals: &[InputSignal],
    params: &ModelParams,
    t_start: f64,
    stride: usize,
) -> Result<SlotRun, DynamicsError> {
    let steps = params.steps_per_slot()?;
    let stride = stride.max(1);
    let n = x0.len();
    let h = params.dt;
    let mut x = x0.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
        DVector::zeros(n),
    );
    let mut tmp = DVector::zeros(n);
    let (mut bu0, mut bu_mid, mut bu1) = (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    let mut samples = Vec::with_capacity(steps / stride + 1);
    let mut peak = x.amax();
    for k in 0..steps {
        let t = t_start + k as f64 * h;
        drive(g, signals, t, &mut bu0);
        drive(g, signals, t + 0.5 * h, &mut bu_mid);
        drive(g, signals, t + h, &mut bu1);
        vector_field(&x, a, &bu0, params.c_n, params.theta, &mut k1);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k1, 1.0);
        vector_field(&tmp, a, &bu_mid, params.c_n, params.theta, &mut k2);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k2, 1.0);
        vector_field(&tmp, a, &bu_mid, params.c_n, params.theta, &mut k3);
        tmp.copy_from(&x);
        tmp.axpy(h, &k3, 1.0);
        vector_field(&tmp, a, &bu1, params.c_n, params.theta, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(node) = x.iter().position(|v| !v.is_finite()) {
            return Err(DynamicsError::Divergence { time: t + h, node });
        }
        peak = peak.max(x.amax());
        if (k + 1) % stride == 0 || k + 1 == steps {
            samples.push((t_start + (k + 1) as f64 * h, x.clone()));
        }
    }
    Ok(SlotRun {
        end: x,
        samples,
        peak_abs: peak,
    })
}

/// Run the hybrid model for `slots` plasticity slots from `x0`, starting
/// from the graph's own weights.
pub fn simulate(
    g: &SignedDigraph,
    params: &ModelParams,
    signals: &[InputSignal],
    x0: &DVector<f64>,
    slots: usize,
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    if let Some(e) = g.edges().iter().find(|e| e.src == e.dst) {
        return Err(DynamicsError::SelfLoop(e.src));
    }
    if signals.len() != g.inputs().len() {
        return Err(DynamicsError::InputCount {
            expected: g.inputs().len(),
            got: signals.len(),
        });
    }
    for s in signals {
        if s.amplitude() > params.u_max * (1.0 + 1e-12) {
            return Err(DynamicsError::InputExceedsBound {
                amplitude: s.amplitude(),
                u_max: params.u_max,
            });
        }
    }
    if x0.len() != g.node_count() {
        return Err(DynamicsError::StateLength {
            expected: g.node_count(),
            got: x0.len(),
        });
    }
    if let Some(SlotMask { active: Some(v), .. }) = &opts.mask {
        if v.len() != slots {
            return Err(DynamicsError::MaskLength {
                expected: slots,
                got: v.len(),
            });
        }
    }
    let steps = params.steps_per_slot()?;
    let stride = opts.sample_stride.max(1);
    if steps % stride != 0 {
        return Err(DynamicsError::InvalidParams(format!(
            "sample stride {stride} does not divide {steps} steps per slot"
        )));
    }
    let c = g.output_matrix();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        outputs: vec![&c * x0],
        weights: Vec::with_capacity(slots),
        slot_boundaries: vec![0],
        masked: Vec::with_capacity(slots),
        peak_abs: x0.amax(),
    };
    let mut a = g.weight_matrix();
    let mut x = x0.clone();
    for p in 0..slots {
        if p > 0 {
            a = weight_update(&a, &x, g, params)?;
        }
        let masked = opts.mask.as_ref().is_some_and(|m| m.is_active(p));
        let eff = match &opts.mask {
            Some(m) if masked => m.apply(&a),
            _ => a.clone(),
        };
        let t0 = p as f64 * params.tau;
        let run = step_slot(&x, &eff, g, signals, params, t0, stride)?;
        traj.peak_abs = traj.peak_abs.max(run.peak_abs);
        for (t, s) in run.samples {
            traj.outputs.push(&c * &s);
            traj.times.push(t);
            traj.states.push(s);
        }
        traj.slot_boundaries.push(traj.times.len() - 1);
        traj.weights.push(a.clone());
        traj.masked.push(masked);
        x = run.end;
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityCondition {
    pub holds: bool,
    /// `c_n − d^in · max{ā⁺, |a̲⁻|}`.
    pub margin: f64,
    pub max_in_degree: usize,
}

/// Leak-dominance condition under which the bounded invariant set exists
/// and the unforced flow is asymptotically stable.
pub fn stability_condition(g: &SignedDigraph, params: &ModelParams) -> StabilityCondition {
    let d = max_in_degree(g);
    let margin = params.c_n - d as f64 * g.bounds().max_magnitude();
    StabilityCondition {
        holds: margin > 0.0,
        margin,
        max_in_degree: d,
    }
}

/// `x_max = ‖B u‖∞ / margin`, the half-width of the invariant box.
pub fn invariant_bound(g: &SignedDigraph, params: &ModelParams) -> Result<f64, DynamicsError> {
    let cond = stability_condition(g, params);
    if !cond.holds {
        return Err(DynamicsError::InvariantUndefined {
            margin: cond.margin,
        });
    }
    let bu_inf = g
        .inputs()
        .iter()
        .map(|i| i.gain.abs() * params.u_max)
        .fold(0.0, f64::max);
    Ok(bu_inf / cond.margin)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HurwitzCheck {
    /// Strict diagonal dominance of `−c_n I + A` with negative diagonal.
    pub diagonally_dominant: bool,
    /// `min_i (c_n − Σ_j |a_ij|)`.
    pub dominance_margin: f64,
    pub max_real_eigenvalue: f64,
}

impl HurwitzCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.diagonally_dominant && self.max_real_eigenvalue < -tol
    }
}

pub fn hurwitz_check(a: &DMatrix<f64>, c_n: f64) -> HurwitzCheck {
    let n = a.nrows();
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        let diag = -c_n + a[(i, i)];
        margin = margin.min(-diag - off);
    }
    let h = a - DMatrix::identity(n, n).scale(c_n);
    let max_re = h
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    HurwitzCheck {
        diagonally_dominant: n == 0 || margin > 0.0,
        dominance_margin: margin,
        max_real_eigenvalue: max_re,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, InputNode, WeightBounds};
    use nalgebra::dvector;

    fn params() -> ModelParams {
        ModelParams {
            c_n: 5.0,
            c_a_plus: 0.98,
            c_a_minus: 0.98,
            theta: 0.1,
            tau: 0.2,
            dt: 1e-3,
            plasticity: Plasticity::Tanh,
            u_max: 5.0,
        }
    }

    fn pair() -> SignedDigraph {
        SignedDigraph::new(
            vec!["a".into(), "b".into()],
            vec![
                Edge { src: 0, dst: 1, sign: Sign::Excitatory, weight: 1.2 },
                Edge { src: 1, dst: 0, sign: Sign::Inhibitory, weight: -0.5 },
            ],
            WeightBounds::symmetric(0.1, 1.2),
            vec![InputNode { node: 0, gain: 1.0 }],
            vec![1],
        )
        .unwrap()
    }

    #[test]
    fn gamma_dead_zone() {
        assert_eq!(gamma_theta(0.05, 0.1), 0.0);
        assert_eq!(gamma_theta(0.5, 0.1), 0.5);
        assert_eq!(gamma_theta(-0.5, 0.1), -0.5);
        assert_eq!(gamma_theta(0.1, 0.1), 0.0);
        assert_eq!(gamma_theta(-0.1, 0.1), 0.0);
    }

    #[test]
    fn phi_is_odd_and_bounded() {
        assert_eq!(phi_eval(0.0), 0.0);
        assert!((phi_eval(50.0) - 1.0).abs() < 1e-15);
        for z in [0.1, 0.7, 2.0, 9.0] {
            assert_eq!(phi_eval(-z), -phi_eval(z));
            assert!(phi_eval(z) < 1.0);
        }
    }

    #[test]
    fn zero_state_update_is_pure_decay() {
        let g = pair();
        let a = g.weight_matrix();
        let next = weight_update(&a, &DVector::zeros(2), &g, &params()).unwrap();
        assert!((next[(1, 0)] - 0.98 * 1.2).abs() < 1e-15);
        assert!((next[(0, 1)] - 0.98 * -0.5).abs() < 1e-15);
    }

    #[test]
    fn upper_clip_holds() {
        let g = pair();
        let mut p = params();
        p.c_a_plus = 1.0;
        let next = weight_update(&g.weight_matrix(), &dvector![10.0, 10.0], &g, &p).unwrap();
        assert_eq!(next[(1, 0)], 1.2);
        assert_eq!(next[(0, 1)], -1.2);
    }

    #[test]
    fn update_rejects_nonzero_diagonal() {
        let g = pair();
        let mut a = g.weight_matrix();
        a[(0, 0)] = 0.3;
        assert_eq!(
            weight_update(&a, &DVector::zeros(2), &g, &params()),
            Err(DynamicsError::NonzeroDiagonal(0))
        );
    }

    #[test]
    fn isolated_node_reaches_closed_form_steady_state() {
        let g = SignedDigraph::new(
            vec!["x".into()],
            vec![],
            WeightBounds::symmetric(0.1, 1.2),
            vec![InputNode { node: 0, gain: 1.0 }],
            vec![],
        )
        .unwrap();
        let mut p = params();
        p.theta = 0.0;
        let sig = [InputSignal::Constant { value: 5.0 }];
        let traj = simulate(&g, &p, &sig, &dvector![0.0], 20, &SimOptions::default()).unwrap();
        // x(t) = 1 - e^{-5t}; at t = 4 the gap is e^{-20}
        assert!((traj.final_state()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stability_margins() {
        let g = pair();
        let s = stability_condition(&g, &params());
        assert!(s.holds);
        assert!((s.margin - 3.8).abs() < 1e-12);
        let edgeless = SignedDigraph::new(
            vec!["x".into()],
            vec![],
            WeightBounds::symmetric(0.1, 1.2),
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(stability_condition(&edgeless, &params()).margin, 5.0);
        let mut p = params();
        p.c_n = 1.2;
        assert!(!stability_condition(&g, &p).holds);
        assert!(matches!(
            invariant_bound(&g, &p),
            Err(DynamicsError::InvariantUndefined { .. })
        ));
    }

    #[test]
    fn invariant_bound_scales_with_input() {
        let g = pair();
        let mut p = params();
        assert!((invariant_bound(&g, &p).unwrap() - 5.0 / 3.8).abs() < 1e-12);
        p.u_max = 0.0;
        assert_eq!(invariant_bound(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn rejects_dt_not_dividing_tau() {
        let mut p = params();
        p.dt = 0.003;
        assert!(matches!(p.validate(), Err(DynamicsError::StepMismatch { .. })));
    }

    #[test]
    fn rejects_self_loop() {
        let g = SignedDigraph::new(
            vec!["x".into()],
            vec![Edge { src: 0, dst: 0, sign: Sign::Excitatory, weight: 0.5 }],
            WeightBounds::symmetric(0.1, 1.2),
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(
            simulate(&g, &params(), &[], &dvector![1.0], 1, &SimOptions::default()),
            Err(DynamicsError::SelfLoop(0))
        );
    }

    #[test]
    fn rejects_input_above_bound() {
        let g = pair();
        let sig = [InputSignal::Sine { amp: 6.0, freq: 1.0, phase: 0.0 }];
        assert!(matches!(
            simulate(&g, &params(), &sig, &dvector![0.0, 0.0], 1, &SimOptions::default()),
            Err(DynamicsError::InputExceedsBound { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let g = pair();
        // the leak term overflows on the first stage
        let x0 = dvector![1.7e308, 1.7e308];
        let err = simulate(&g, &params(), &[InputSignal::Zero], &x0, 1, &SimOptions::default());
        assert!(matches!(err, Err(DynamicsError::Divergence { .. })));
    }

    #[test]
    fn hurwitz_check_on_dominant_matrix() {
        let g = pair();
        let h = hurwitz_check(&g.weight_matrix(), 5.0);
        assert!(h.diagonally_dominant);
        assert!(h.passes(1e-10));
        let h = hurwitz_check(&g.weight_matrix(), 1.0);
        assert!(!h.diagonally_dominant);
    }
}
