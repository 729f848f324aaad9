//! Finite-horizon controllability Gramians and minimum-energy steering.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::graph::SignedDigraph;
use crate::linalg::{matrix_exponential, symmetrize, LinalgError};

/// Simpson panels per slot unless the caller asks otherwise.
pub const DEFAULT_PANELS: usize = 400;
/// Gramians with a larger 2-norm condition number are refused.
pub const MAX_CONDITION: f64 = 1e12;
/// RK4 steps used to re-integrate a steering input.
pub const VERIFY_STEPS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("not steerable with these inputs (Gramian condition {condition:.3e})")]
    NotSteerable { condition: f64 },
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<EnergyError>,
    },
}

/// `W(t_f) = ∫₀^{t_f} e^{As} B Bᵀ e^{Aᵀs} ds` by composite Simpson with
/// `panels` panels, symmetrized.
pub fn gramian(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tf: f64,
    panels: usize,
) -> Result<DMatrix<f64>, EnergyError> {
    if !(tf > 0.0 && tf.is_finite()) {
        return Err(EnergyError::InvalidHorizon(tf));
    }
    check_pair(a, b)?;
    let n = a.nrows();
    let nodes = 2 * panels.max(1);
    let h = tf / nodes as f64;
    let step = matrix_exponential(&a.scale(h))?;
    let mut g = b.clone();
    let mut w = DMatrix::zeros(n, n);
    for k in 0..=nodes {
        let c = if k == 0 || k == nodes {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w.gemm(c * h / 3.0, &g, &g.transpose(), 1.0);
        if k < nodes {
            g = &step * &g;
        }
    }
    symmetrize(&mut w);
    Ok(w)
}

fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(), EnergyError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()).into());
    }
    if b.nrows() != a.nrows() {
        return Err(EnergyError::Dimension(format!(
            "B has {} rows, A is {}x{}",
            b.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// 2-norm condition number of a symmetric matrix; infinite unless it is
/// positive definite.
pub fn spd_condition(w: &DMatrix<f64>) -> f64 {
    if w.nrows() == 0 {
        return 1.0;
    }
    let ev = w.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Minimum-energy transfer `x0 → xf` in time `tf` for `ẋ = Ax + Bu`.
#[derive(Clone, Debug)]
pub struct Steering {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub tf: f64,
    pub x0: DVector<f64>,
    pub xf: DVector<f64>,
    /// `W⁻¹ (xf − e^{A tf} x0)`.
    pub lambda: DVector<f64>,
    pub eta: f64,
    pub condition: f64,
}

pub fn min_energy_steering(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    xf: &DVector<f64>,
    tf: f64,
    panels: usize,
) -> Result<Steering, EnergyError> {
    let n = a.nrows();
    if x0.len() != n || xf.len() != n {
        return Err(EnergyError::Dimension(format!(
            "states must have length {n}, got {} and {}",
            x0.len(),
            xf.len()
        )));
    }
    let w = gramian(a, b, tf, panels)?;
    let condition = spd_condition(&w);
    if !(condition <= MAX_CONDITION) {
        return Err(EnergyError::NotSteerable { condition });
    }
    let chol = w
        .clone()
        .cholesky()
        .ok_or(EnergyError::NotSteerable { condition })?;
    let drift = matrix_exponential(&a.scale(tf))? * x0;
    let d = xf - drift;
    let lambda = chol.solve(&d);
    let eta = d.dot(&lambda).max(0.0);
    Ok(Steering {
        a: a.clone(),
        b: b.clone(),
        tf,
        x0: x0.clone(),
        xf: xf.clone(),
        lambda,
        eta,
        condition,
    })
}

impl Steering {
    /// `u*(t) = Bᵀ e^{Aᵀ(tf−t)} λ` on `2·steps + 1` equally spaced times
    /// from 0 to `tf`.
    pub fn sample_input(&self, steps: usize) -> Result<Vec<(f64, DVector<f64>)>, EnergyError> {
        let nodes = 2 * steps.max(1);
        let h = self.tf / nodes as f64;
        let back = matrix_exponential(&self.a.transpose().scale(h))?;
        let bt = self.b.transpose();
        let mut mu = self.lambda.clone();
        let mut out = vec![(self.tf, &bt * &mu)];
        for k in (0..nodes).rev() {
            mu = &back * &mu;
            out.push((k as f64 * h, &bt * &mu));
        }
        out.reverse();
        Ok(out)
    }

    /// Integrate `ẋ = Ax + Bu*` from `x0` with RK4 and return the final
    /// state and its error relative to `max(‖xf‖, ‖x0‖)`.
    pub fn verify(&self, steps: usize) -> Result<(DVector<f64>, f64), EnergyError> {
        let steps = steps.max(1);
        let samples = self.sample_input(steps)?;
        let h = self.tf / steps as f64;
        let bu: Vec<DVector<f64>> = samples.iter().map(|(_, u)| &self.b * u).collect();
        let f = |x: &DVector<f64>, k: usize| &self.a * x + &bu[k];
        let mut x = self.x0.clone();
        for s in 0..steps {
            let (i0, im, i1) = (2 * s, 2 * s + 1, 2 * s + 2);
            let k1 = f(&x, i0);
            let k2 = f(&(&x + k1.scale(0.5 * h)), im);
            let k3 = f(&(&x + k2.scale(0.5 * h)), im);
            let k4 = f(&(&x + k3.scale(h)), i1);
            x += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        }
        let scale = self.xf.norm().max(self.x0.norm()).max(f64::MIN_POSITIVE);
        let err = (&x - &self.xf).norm() / scale;
        Ok((x, err))
    }

    /// `∫ ‖u*(t)‖² dt` by Simpson over the sampled input.
    pub fn quadrature_energy(&self, steps: usize) -> Result<f64, EnergyError> {
        let samples = self.sample_input(steps)?;
        let nodes = samples.len() - 1;
        let h = self.tf / nodes as f64;
        let total: f64 = samples
            .iter()
            .enumerate()
            .map(|(k, (_, u))| {
                let c = if k == 0 || k == nodes {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * u.norm_squared()
            })
            .sum();
        Ok(total * h / 3.0)
    }
}

/// A path segmentation: waypoint `x_p` at each slot boundary and the frozen
/// slot matrix `H_p = −c_n I + A_p` in between.
#[derive(Clone, Debug)]
pub struct SteeringProblem {
    pub slot_matrices: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub waypoints: Vec<DVector<f64>>,
    pub tau: f64,
}

impl SteeringProblem {
    /// Slot matrices of the first `waypoints.len() − 1` slots of a run.
    pub fn from_trajectory(
        traj: &Trajectory,
        g: &SignedDigraph,
        c_n: f64,
        tau: f64,
        waypoints: Vec<DVector<f64>>,
    ) -> Result<Self, EnergyError> {
        let slots = waypoints.len().saturating_sub(1);
        if slots == 0 || slots > traj.slot_count() {
            return Err(EnergyError::Dimension(format!(
                "{} waypoints need between 1 and {} slots",
                waypoints.len(),
                traj.slot_count()
            )));
        }
        let n = g.node_count();
        let shift = DMatrix::<f64>::identity(n, n).scale(c_n);
        let p = SteeringProblem {
            slot_matrices: traj.weights[..slots].iter().map(|a| a - &shift).collect(),
            b: g.input_matrix(),
            waypoints,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.waypoints.len() != self.slot_matrices.len() + 1 {
            return Err(EnergyError::Dimension(format!(
                "{} waypoints for {} slots",
                self.waypoints.len(),
                self.slot_matrices.len()
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(EnergyError::InvalidHorizon(self.tau));
        }
        let n = self.b.nrows();
        if self.slot_matrices.iter().any(|h| h.shape() != (n, n))
            || self.waypoints.iter().any(|x| x.len() != n)
        {
            return Err(EnergyError::Dimension(format!(
                "slot matrices and waypoints must be {n}-dimensional"
            )));
        }
        Ok(())
    }

    pub fn with_inputs(&self, b: DMatrix<f64>) -> Self {
        SteeringProblem {
            b,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotEnergy {
    pub slot: usize,
    pub eta: f64,
    pub condition: f64,
    /// Relative endpoint error of the re-integrated steering input.
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub per_slot: Vec<SlotEnergy>,
    pub total: f64,
}

impl EnergyReport {
    pub fn max_endpoint_error(&self) -> f64 {
        self.per_slot
            .iter()
            .map(|s| s.endpoint_error)
            .fold(0.0, f64::max)
    }
}

/// Steer between consecutive waypoints slot by slot.
pub fn piecewise_steering(prob: &SteeringProblem, panels: usize) -> Result<Vec<Steering>, EnergyError> {
    prob.validate()?;
    prob.slot_matrices
        .iter()
        .enumerate()
        .map(|(p, h)| {
            min_energy_steering(h, &prob.b, &prob.waypoints[p], &prob.waypoints[p + 1], prob.tau, panels)
                .map_err(|e| EnergyError::Slot {
                    slot: p,
                    source: Box::new(e),
                })
        })
        .collect()
}

pub fn piecewise_energy(prob: &SteeringProblem, panels: usize) -> Result<EnergyReport, EnergyError> {
    let runs = piecewise_steering(prob, panels)?;
    let mut per_slot = Vec::with_capacity(runs.len());
    for (p, s) in runs.iter().enumerate() {
        let (_, endpoint_error) = s.verify(VERIFY_STEPS)?;
        per_slot.push(SlotEnergy {
            slot: p,
            eta: s.eta,
            condition: s.condition,
            endpoint_error,
        });
    }
    let total = per_slot.iter().map(|s| s.eta).sum();
    Ok(EnergyReport { per_slot, total })
}

/// `B` with canonical-vector columns appended for `nodes`.
pub fn augment_inputs(b: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    let (n, m) = b.shape();
    let mut out = DMatrix::zeros(n, m + nodes.len());
    out.columns_mut(0, m).copy_from(b);
    for (k, &v) in nodes.iter().enumerate() {
        out[(v, m + k)] = 1.0;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monotonicity {
    pub base: EnergyReport,
    pub augmented: EnergyReport,
    pub eta: f64,
    pub eta_hat: f64,
    pub satisfied: bool,
}

/// Absolute slack allowed in `η̂ ≤ η`.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

/// Compare the piecewise energy of `prob` with the same segmentation under
/// the extended input matrix `b_aug`, whose leading columns must equal
/// `prob.b`.
pub fn augmentation_monotonicity(
    prob: &SteeringProblem,
    b_aug: &DMatrix<f64>,
    panels: usize,
) -> Result<Monotonicity, EnergyError> {
    let (n, m) = prob.b.shape();
    if b_aug.nrows() != n || b_aug.ncols() < m || b_aug.columns(0, m) != prob.b.columns(0, m) {
        return Err(EnergyError::Dimension(
            "augmented input matrix must extend the original one".into(),
        ));
    }
    let base = piecewise_energy(prob, panels)?;
    let augmented = piecewise_energy(&prob.with_inputs(b_aug.clone()), panels)?;
    let (eta, eta_hat) = (base.total, augmented.total);
    Ok(Monotonicity {
        satisfied: eta_hat <= eta + MONOTONICITY_SLACK,
        base,
        augmented,
        eta,
        eta_hat,
    })
}
