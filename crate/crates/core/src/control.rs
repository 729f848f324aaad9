//! Numeric and structural controllability / observability tests.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{SlotMask, Trajectory};
use crate::graph::SignedDigraph;
use crate::linalg::{numerical_rank, RankInfo};

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut k = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        k.columns_mut(i * m, m).copy_from(&block);
        if i + 1 < n {
            block = a * &block;
        }
    }
    k
}

pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> RankInfo {
    numerical_rank(&controllability_matrix(a, b))
}

/// Rank of `[C; CA; …; CA^{n−1}]`, computed on the dual pair `(Aᵀ, Cᵀ)`.
pub fn observability_rank(a: &DMatrix<f64>, c: &DMatrix<f64>) -> RankInfo {
    controllability_rank(&a.transpose(), &c.transpose())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbhResult {
    pub controllable: bool,
    pub offending_eigenvalue: Option<Complex<f64>>,
    /// Smallest `σ_n([ωI − A | B])` over the eigenvalues tested.
    pub min_singular_value: f64,
    /// Tolerance used at that eigenvalue.
    pub tolerance: f64,
}

/// Popov–Belevitch–Hautus test: `(A, B)` is controllable iff
/// `rank [ωI − A | B] = n` at every eigenvalue `ω` of `A`.
pub fn pbh_left_eigentest(a: &DMatrix<f64>, b: &DMatrix<f64>) -> PbhResult {
    let n = a.nrows();
    let m = b.ncols();
    let mut result = PbhResult {
        controllable: true,
        offending_eigenvalue: None,
        min_singular_value: f64::INFINITY,
        tolerance: 0.0,
    };
    if n == 0 {
        return result;
    }
    let eig: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
    let mut tested: Vec<Complex<f64>> = Vec::new();
    for w in eig.iter().copied().chain(cluster_means(&eig)) {
        let scale = 1.0 + w.norm();
        if tested.iter().any(|t| (t - w).norm() <= 1e-12 * scale) {
            continue;
        }
        tested.push(w);
        let mut mat = DMatrix::<Complex<f64>>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] = Complex::new(-a[(i, j)], 0.0);
            }
            mat[(i, i)] += w;
            for j in 0..m {
                mat[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
            }
        }
        let info = numerical_rank(&mat);
        let sn = info.critical_singular_value(n).unwrap_or(0.0);
        if sn < result.min_singular_value {
            result.min_singular_value = sn;
            result.tolerance = info.tolerance;
        }
        if info.rank < n && result.controllable {
            result.controllable = false;
            result.offending_eigenvalue = Some(w);
        }
    }
    result
}

/// Means of groups of nearly coincident eigenvalues. A defective eigenvalue
/// of multiplicity `k` comes back from the eigensolver smeared over a
/// radius of order `ε^(1/k)`, while the mean of the group stays accurate to
/// working precision.
fn cluster_means(eig: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = eig.len();
    if n < 2 {
        return Vec::new();
    }
    let scale = 1.0 + eig.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let radius = 10.0 * f64::EPSILON.powf(1.0 / n as f64) * scale;
    let mut group: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (eig[i] - eig[j]).norm() <= radius && group[i] != group[j] {
                let (from, to) = (group[i], group[j]);
                group.iter_mut().filter(|g| **g == from).for_each(|g| *g = to);
            }
        }
    }
    let mut means = Vec::new();
    for g in 0..n {
        let members: Vec<Complex<f64>> = (0..n).filter(|&i| group[i] == g).map(|i| eig[i]).collect();
        if members.len() > 1 {
            means.push(members.iter().sum::<Complex<f64>>() / members.len() as f64);
        }
    }
    means
}

/// Zero/nonzero masks of `(A, B)` and optionally `C`. Entries are
/// `-1`, `0` or `+1`; when `signed` is false every nonzero is treated as a
/// free parameter of either sign (drawn positive).
#[derive(Clone, Debug, PartialEq)]
pub struct StructurePattern {
    pub a: DMatrix<i8>,
    pub b: DMatrix<i8>,
    pub c: Option<DMatrix<i8>>,
    pub signed: bool,
}

fn sign_mask(m: &DMatrix<f64>) -> DMatrix<i8> {
    m.map(|v| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    })
}

impl StructurePattern {
    pub fn new(a: DMatrix<i8>, b: DMatrix<i8>) -> Self {
        assert!(a.is_square(), "A pattern must be square");
        assert_eq!(a.nrows(), b.nrows(), "B pattern rows must match A");
        StructurePattern {
            a,
            b,
            c: None,
            signed: false,
        }
    }

    /// Pattern of concrete matrices, with their signs as overlay.
    pub fn from_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        let mut p = StructurePattern::new(sign_mask(a), sign_mask(b));
        p.signed = true;
        p
    }

    /// Pattern of a graph's `(A, B, C)`, signs from the edge classes.
    pub fn from_graph(g: &SignedDigraph) -> Self {
        StructurePattern {
            a: sign_mask(&g.sign_matrix()),
            b: sign_mask(&g.input_matrix()),
            c: Some(sign_mask(&g.output_matrix())),
            signed: true,
        }
    }

    pub fn with_output(mut self, c: DMatrix<i8>) -> Self {
        assert_eq!(c.ncols(), self.a.ncols(), "C pattern columns must match A");
        self.c = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Swap roles: `(Aᵀ, Cᵀ)` as a controllability pattern.
    pub fn dual(&self) -> Option<StructurePattern> {
        let c = self.c.as_ref()?;
        Some(StructurePattern {
            a: self.a.transpose(),
            b: c.transpose(),
            c: Some(self.b.transpose()),
            signed: self.signed,
        })
    }

    /// Nodes no input can reach through the `A` pattern (`A[(i, j)] ≠ 0`
    /// is an edge `j → i`). Any such node makes every instance uncontrollable.
    pub fn inaccessible_nodes(&self) -> Vec<usize> {
        let n = self.dim();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n)
            .filter(|&i| (0..self.b.ncols()).any(|k| self.b[(i, k)] != 0))
            .collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(j) = stack.pop() {
            for i in 0..n {
                if self.a[(i, j)] != 0 && !seen[i] {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
        (0..n).filter(|&v| !seen[v]).collect()
    }

    /// Draw nonzero magnitudes i.i.d. uniform on [0.5, 1.5].
    pub fn instantiate<R: Rng>(&self, rng: &mut R) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut draw = |s: i8| -> f64 {
            if s == 0 {
                0.0
            } else {
                let mag = rng.random_range(0.5..=1.5);
                if self.signed && s < 0 {
                    -mag
                } else {
                    mag
                }
            }
        };
        let a = self.a.map(&mut draw);
        let b = self.b.map(&mut draw);
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralStatus {
    Controllable,
    LikelyUncontrollable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Witness {
    fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        let rows = |m: &DMatrix<f64>| {
            m.row_iter()
                .map(|r| r.iter().copied().collect())
                .collect::<Vec<Vec<f64>>>()
        };
        Witness { a: rows(a), b: rows(b) }
    }

    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let build = |rows: &Vec<Vec<f64>>, ncols: usize| {
            DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
        };
        let n = self.a.len();
        let m = self.b.first().map_or(0, Vec::len);
        (build(&self.a, n), build(&self.b, m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructuralVerdict {
    pub status: StructuralStatus,
    /// A full-rank instance when `status` is controllable.
    pub witness: Option<Witness>,
    /// Trials drawn before deciding.
    pub trials: usize,
    pub seed: u64,
    pub rank_tolerance: f64,
    pub best_rank: usize,
    /// Nodes unreachable from every input. Nonempty means the negative
    /// verdict is certain rather than probabilistic.
    pub inaccessible: Vec<usize>,
}

impl StructuralVerdict {
    pub fn is_controllable(&self) -> bool {
        self.status == StructuralStatus::Controllable
    }

    pub fn certified_negative(&self) -> bool {
        !self.inaccessible.is_empty()
    }
}

/// RNG for trial `k` of a seeded experiment; trials are independent.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Randomized structural controllability: the pattern is structurally
/// controllable iff some instance is controllable, and then almost every
/// instance is, so the first full-rank draw decides.
pub fn structural_test(p: &StructurePattern, trials: usize, seed: u64) -> StructuralVerdict {
    let n = p.dim();
    let inaccessible = p.inaccessible_nodes();
    let mut best_rank = 0;
    let mut tol = 0.0;
    let trials = trials.max(1);
    for k in 0..trials {
        let mut rng = trial_rng(seed, k as u64);
        let (a, b) = p.instantiate(&mut rng);
        let info = controllability_rank(&a, &b);
        tol = info.tolerance;
        best_rank = best_rank.max(info.rank);
        if info.rank == n {
            return StructuralVerdict {
                status: StructuralStatus::Controllable,
                witness: Some(Witness::new(&a, &b)),
                trials: k + 1,
                seed,
                rank_tolerance: tol,
                best_rank,
                inaccessible,
            };
        }
    }
    StructuralVerdict {
        status: StructuralStatus::LikelyUncontrollable,
        witness: None,
        trials,
        seed,
        rank_tolerance: tol,
        best_rank,
        inaccessible,
    }
}

/// Structural observability through the dual pattern. The witness is
/// reported in primal form `(A, Cᵀ)`.
///
/// # Panics
/// If the pattern carries no output mask.
pub fn structural_observability_test(p: &StructurePattern, trials: usize, seed: u64) -> StructuralVerdict {
    let dual = p.dual().expect("observability needs an output pattern");
    let mut v = structural_test(&dual, trials, seed);
    if let Some(w) = &v.witness {
        let (at, ct) = w.matrices();
        v.witness = Some(Witness::new(&at.transpose(), &ct));
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotRank {
    pub slot: usize,
    pub rank: usize,
    pub full: bool,
    /// `σ_n` of the controllability matrix and the threshold it faced.
    pub critical_singular_value: f64,
    pub tolerance: f64,
    /// Independent PBH verdict on `(−c_n I + A_p, B)`.
    pub pbh_controllable: bool,
}

/// Controllability of `(−c_n I + A_p, B)` for every slot of a run.
///
/// The Krylov matrix is formed from `A_p` itself: `A − cI` and `A` span the
/// same Krylov subspaces, and the shifted powers are dominated by `c_n^k`,
/// which buries the weak directions below the SVD tolerance.
pub fn per_slot_rank_audit(
    traj: &Trajectory,
    g: &SignedDigraph,
    c_n: f64,
    mask: Option<&SlotMask>,
) -> Vec<SlotRank> {
    let n = g.node_count();
    let b = g.input_matrix();
    let shift = DMatrix::<f64>::identity(n, n).scale(c_n);
    (0..traj.slot_count())
        .map(|p| {
            let a = traj.effective_weights(p, mask);
            let info = controllability_rank(&a, &b);
            SlotRank {
                slot: p,
                rank: info.rank,
                full: info.rank == n,
                critical_singular_value: info.critical_singular_value(n).unwrap_or(0.0),
                tolerance: info.tolerance,
                pbh_controllable: pbh_left_eigentest(&(a - &shift), &b).controllable,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn chain(k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(k, k);
        for i in 1..k {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(k, 1);
        b[(0, 0)] = 1.0;
        (a, b)
    }

    #[test]
    fn chain_controllability_matrix_is_identity() {
        for k in 1..=8 {
            let (a, b) = chain(k);
            assert_eq!(controllability_matrix(&a, &b), DMatrix::identity(k, k));
            assert_eq!(controllability_rank(&a, &b).rank, k);
        }
    }

    #[test]
    fn equal_diagonal_with_ones_has_rank_one() {
        let a = DMatrix::identity(4, 4).scale(0.7);
        let b = DMatrix::from_element(4, 1, 1.0);
        assert_eq!(controllability_rank(&a, &b).rank, 1);
    }

    #[test]
    fn observability_duals() {
        let (a, _) = chain(5);
        let mut c = DMatrix::zeros(1, 5);
        c[(0, 4)] = 1.0;
        assert_eq!(observability_rank(&a, &c).rank, 5);
        assert_eq!(observability_rank(&a, &DMatrix::zeros(1, 5)).rank, 0);
        assert_eq!(observability_rank(&a, &DMatrix::identity(5, 5)).rank, 5);
    }

    #[test]
    fn pbh_on_chain_and_scalar() {
        let (a, b) = chain(4);
        assert!(pbh_left_eigentest(&a, &b).controllable);
        assert!(pbh_left_eigentest(&dmatrix![-1.0], &dmatrix![1.0]).controllable);
    }

    #[test]
    fn pbh_reports_duplicated_block() {
        // two identical decoupled 2x2 blocks driven by one shared input pattern
        let a = dmatrix![
            -1.0, 0.0, 0.0, 0.0;
            1.0, -2.0, 0.0, 0.0;
            0.0, 0.0, -1.0, 0.0;
            0.0, 0.0, 1.0, -2.0
        ];
        let b = dmatrix![1.0; 0.0; 1.0; 0.0];
        let r = pbh_left_eigentest(&a, &b);
        assert!(!r.controllable);
        let w = r.offending_eigenvalue.unwrap();
        assert!((w.re + 1.0).abs() < 1e-9 || (w.re + 2.0).abs() < 1e-9);
        assert!(controllability_rank(&a, &b).rank < 4);
    }

    #[test]
    fn pbh_sees_through_split_jordan_block() {
        // 3x3 Jordan block at -1 beside a chain driven from its middle, so
        // the block's head is unreachable
        let a = dmatrix![
            -1.0, 1.0, 0.0, 0.0;
            0.0, -1.0, 1.0, 0.0;
            0.0, 0.0, -1.0, 0.0;
            0.0, 0.0, 0.5, -3.0
        ];
        let b = dmatrix![0.0; 1.0; 0.0; 0.0];
        let r = pbh_left_eigentest(&a, &b);
        assert_eq!(controllability_rank(&a, &b).rank < 4, !r.controllable);
        assert!(!r.controllable);
    }

    fn example_pattern() -> StructurePattern {
        // nonzeros at (1,1), (1,2), (2,3), (3,1); input at node 2
        let a = dmatrix![1, 1, 0; 0, 0, 1; 1, 0, 0];
        let b = dmatrix![0i8; 1; 0];
        StructurePattern::new(a, b)
    }

    #[test]
    fn example_pattern_is_structurally_controllable() {
        let v = structural_test(&example_pattern(), 20, 7);
        assert!(v.is_controllable());
        let (a, b) = v.witness.unwrap().matrices();
        assert_eq!(controllability_rank(&a, &b).rank, 3);
    }

    #[test]
    fn unreachable_node_is_certified_negative() {
        let a = dmatrix![0i8, 0, 0; 1, 0, 0; 0, 0, 0];
        let b = dmatrix![1i8; 0; 0];
        let v = structural_test(&StructurePattern::new(a, b), 50, 1);
        assert_eq!(v.status, StructuralStatus::LikelyUncontrollable);
        assert_eq!(v.inaccessible, vec![2]);
        assert!(v.certified_negative());
    }

    #[test]
    fn observability_via_dual() {
        let (a, _) = chain(4);
        let mut c = DMatrix::zeros(1, 4);
        c[(0, 3)] = 1i8;
        let p = StructurePattern::new(a.map(|v| v as i8), DMatrix::zeros(4, 0)).with_output(c);
        let v = structural_observability_test(&p, 10, 3);
        assert!(v.is_controllable());
        let (wa, wct) = v.witness.unwrap().matrices();
        assert_eq!(observability_rank(&wa, &wct.transpose()).rank, 4);
        // observing the chain head sees nothing downstream
        let mut c0 = DMatrix::zeros(1, 4);
        c0[(0, 0)] = 1i8;
        let p = StructurePattern::new(a.map(|v| v as i8), DMatrix::zeros(4, 0)).with_output(c0);
        assert!(!structural_observability_test(&p, 10, 3).is_controllable());
    }

    #[test]
    fn trials_are_reproducible() {
        let p = example_pattern();
        assert_eq!(structural_test(&p, 5, 11), structural_test(&p, 5, 11));
    }
}
