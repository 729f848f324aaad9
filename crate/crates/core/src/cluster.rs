//! Sequential clustering: points presented one by one as constant stimuli,
//! labelled by 1-D k-means on a single readout node.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate, weight_update, DynamicsError, InputSignal, ModelParams, SimOptions};
use crate::graph::{GraphError, NodeId, SignedDigraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("stimulus node `{0}` is not an input node")]
    NotAnInput(String),
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("dwell {0} s is not a positive multiple of tau")]
    BadDwell(f64),
    #[error("{0} labels given for {1} points")]
    LabelCount(usize, usize),
    #[error("invalid dataset: {0}")]
    BadDataset(&'static str),
}

/// Default readout tolerance: the tail of the dwell may move by at most
/// this much (relative to `max(1, |mean|)`) for the point to count as
/// settled.
pub const DEFAULT_STEADY_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTask {
    pub points: Vec<[f64; 2]>,
    pub stimulus_nodes: [NodeId; 2],
    pub readout_node: NodeId,
    /// Seconds per point.
    pub dwell: f64,
    pub k: usize,
    /// Generation labels, when known.
    pub labels: Option<Vec<usize>>,
    pub steady_tol: f64,
}

/// Synthetic isotropic Gaussian mixture; point `i` comes from centre
/// `i mod centers.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixture {
    pub n: usize,
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub seed: u64,
}

impl GaussianMixture {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.centers.is_empty() {
            return Err(ClusterError::BadDataset("no centers"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ClusterError::BadDataset("sigma must be finite and non-negative"));
        }
        Ok(())
    }

    /// Panics unless `validate` passes.
    pub fn sample(&self) -> (Vec<[f64; 2]>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated as finite and non-negative");
        (0..self.n)
            .map(|i| {
                let l = i % self.centers.len();
                let c = self.centers[l];
                ([c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)], l)
            })
            .unzip()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dataset {
    Synthetic(GaussianMixture),
    Points {
        points: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<usize>>,
    },
}

fn default_dwell() -> f64 {
    6.0
}

fn default_k() -> usize {
    3
}

fn default_tol() -> f64 {
    DEFAULT_STEADY_TOL
}

/// Label-based clustering task as stored in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub stimulus_nodes: [String; 2],
    pub readout_node: String,
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub steady_tol: f64,
    pub dataset: Dataset,
}

impl ClusterSpec {
    pub fn resolve(&self, g: &SignedDigraph) -> Result<ClusterTask, ClusterError> {
        let (points, labels) = match &self.dataset {
            Dataset::Synthetic(m) => {
                m.validate()?;
                let (p, l) = m.sample();
                (p, Some(l))
            }
            Dataset::Points { points, labels } => (points.clone(), labels.clone()),
        };
        self.resolve_with(g, points, labels)
    }

    /// Same task on caller-supplied points.
    pub fn resolve_with(
        &self,
        g: &SignedDigraph,
        points: Vec<[f64; 2]>,
        labels: Option<Vec<usize>>,
    ) -> Result<ClusterTask, ClusterError> {
        let s0 = g.require_node(&self.stimulus_nodes[0])?;
        let s1 = g.require_node(&self.stimulus_nodes[1])?;
        let task = ClusterTask {
            points,
            stimulus_nodes: [s0, s1],
            readout_node: g.require_node(&self.readout_node)?,
            dwell: self.dwell,
            k: self.k,
            labels,
            steady_tol: self.steady_tol,
        };
        Ok(task)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub readouts: Vec<f64>,
    /// Indices of points whose readout had not settled by the end of the
    /// dwell.
    pub unsettled: Vec<usize>,
    pub centers: Vec<f64>,
    /// Rand index against `task.labels`, when given.
    pub agreement: Option<f64>,
    #[serde(skip)]
    pub weights: Vec<DMatrix<f64>>,
}

/// Present every point from `x = 0` with constant stimuli for `dwell`
/// seconds, carrying the weights (including the boundary update at the
/// end of each dwell) to the next point.
pub fn run_clustering(
    g: &SignedDigraph,
    params: &ModelParams,
    task: &ClusterTask,
) -> Result<ClusterResult, ClusterError> {
    if task.k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if let Some(l) = &task.labels {
        if l.len() != task.points.len() {
            return Err(ClusterError::LabelCount(l.len(), task.points.len()));
        }
    }
    let slots = params
        .slots_in(task.dwell)
        .map_err(|_| ClusterError::BadDwell(task.dwell))?;
    let slot_of = |node: NodeId| {
        g.inputs()
            .iter()
            .position(|i| i.node == node)
            .ok_or_else(|| ClusterError::NotAnInput(g.label(node).to_string()))
    };
    let stim = [slot_of(task.stimulus_nodes[0])?, slot_of(task.stimulus_nodes[1])?];
    let opts = SimOptions {
        sample_stride: 10,
        mask: None,
    };
    let x0 = DVector::zeros(g.node_count());
    let mut graph = g.clone();
    let mut readouts = Vec::with_capacity(task.points.len());
    let mut unsettled = Vec::new();
    let mut weights = Vec::with_capacity(task.points.len());
    for (idx, p) in task.points.iter().enumerate() {
        let mut signals = vec![InputSignal::Zero; g.inputs().len()];
        signals[stim[0]] = InputSignal::Constant { value: p[0] };
        signals[stim[1]] = InputSignal::Constant { value: p[1] };
        let traj = simulate(&graph, params, &signals, &x0, slots, &opts)?;
        let n = traj.states.len();
        let tail: Vec<f64> = traj.states[n - (n / 10).max(1)..]
            .iter()
            .map(|s| s[task.readout_node])
            .collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo > task.steady_tol * mean.abs().max(1.0) {
            unsettled.push(idx);
        }
        readouts.push(mean);
        let last = traj.weights.last().expect("at least one slot");
        let next = weight_update(last, traj.final_state(), &graph, params)?;
        graph = graph.with_weights(&next)?;
        weights.push(next);
    }
    let (labels, centers) = kmeans_1d(&readouts, task.k);
    let agreement = task.labels.as_ref().map(|l| rand_index(&labels, l));
    Ok(ClusterResult {
        labels,
        readouts,
        unsettled,
        centers,
        agreement,
        weights,
    })
}

/// Optimal 1-D k-means (dynamic programming over sorted values). Centres
/// are returned in ascending order; each value takes the nearest centre,
/// ties to the lower index. Fewer than `k` distinct values give fewer
/// centres.
pub fn kmeans_1d(values: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    if values.is_empty() || k == 0 {
        return (vec![0; values.len()], Vec::new());
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let distinct = 1 + v.windows(2).filter(|w| w[0] != w[1]).count();
    let k = k.min(distinct);
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + v[i];
        s2[i + 1] = s2[i] + v[i] * v[i];
    }
    // within-cluster sum of squares of v[i..j]
    let cost = |i: usize, j: usize| {
        let m = (j - i) as f64;
        let s = s1[j] - s1[i];
        (s2[j] - s2[i] - s * s / m).max(0.0)
    };
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; n + 1]; k + 1];
    let mut cut = vec![vec![0usize; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=n {
            for i in (c - 1)..j {
                // never split a run of equal values
                if i > 0 && v[i - 1] == v[i] || dp[c - 1][i] == inf {
                    continue;
                }
                let t = dp[c - 1][i] + cost(i, j);
                if t < dp[c][j] {
                    dp[c][j] = t;
                    cut[c][j] = i;
                }
            }
        }
    }
    let mut centers = vec![0.0; k];
    let mut j = n;
    for c in (1..=k).rev() {
        let i = cut[c][j];
        centers[c - 1] = (s1[j] - s1[i]) / (j - i) as f64;
        j = i;
    }
    let labels = values
        .iter()
        .map(|&x| {
            let mut best = 0;
            for (c, &m) in centers.iter().enumerate() {
                if (x - m).abs() < (x - centers[best]).abs() {
                    best = c;
                }
            }
            best
        })
        .collect();
    (labels, centers)
}

/// Fraction of point pairs on which two labelings agree (same/different).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}
