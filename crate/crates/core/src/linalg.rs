//! Dense numerical kernels: matrix exponential and SVD rank.

use nalgebra::{ComplexField, DMatrix, RealField};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("singular Padé denominator")]
    Singular,
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// 1-norm thresholds below which each Padé degree meets unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^M` by scaling and squaring around a diagonal Padé approximant of
/// degree 3, 5, 7, 9 or 13, chosen from the 1-norm of `M`.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let (r, c) = m.shape();
    if r != c {
        return Err(LinalgError::NotSquare(r, c));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = r;
    let ident = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return Ok(ident);
    }
    let nrm = norm1(m);
    let a2 = m * m;

    for &(deg, theta) in &THETA {
        if nrm <= theta {
            let coef: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            // odd part U = M * sum b_{2k+1} M^{2k}, even part V = sum b_{2k} M^{2k}
            let mut u = ident.scale(coef[1]);
            let mut v = ident.scale(coef[0]);
            let mut pow = ident.clone();
            for k in 1..=deg / 2 {
                pow = &pow * &a2;
                u += pow.scale(coef[2 * k + 1]);
                v += pow.scale(coef[2 * k]);
            }
            let u = m * u;
            return solve_pade(&u, &v);
        }
    }

    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 2f64.powi(-s);
    let a = m.scale(scale);
    let a2 = a2.scale(scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]));
    let u = &a
        * (u_inner + a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + ident.scale(b[1]));
    let v = &a6 * (a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]))
        + a6.scale(b[6])
        + a4.scale(b[4])
        + a2.scale(b[2])
        + ident.scale(b[0]);
    let mut e = solve_pade(&u, &v)?;
    for _ in 0..s {
        e = &e * &e;
    }
    if e.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(e)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).ok_or(LinalgError::Singular)
}

/// Singular values and the numerical rank at tolerance
/// `rows · ε · σ_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

impl RankInfo {
    /// Smallest singular value that would have to be nonzero for full row
    /// rank, if it exists.
    pub fn critical_singular_value(&self, full: usize) -> Option<f64> {
        self.singular_values.get(full.checked_sub(1)?).copied()
    }
}

pub fn numerical_rank<T>(m: &DMatrix<T>) -> RankInfo
where
    T: ComplexField<RealField = f64>,
{
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RankInfo {
            rank: 0,
            singular_values: vec![],
            tolerance: 0.0,
        };
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sv.first().copied().unwrap_or(0.0);
    let tolerance = rows as f64 * f64::EPSILON * smax;
    let rank = sv.iter().filter(|&&s| s > tolerance).count();
    RankInfo {
        rank,
        singular_values: sv,
        tolerance,
    }
}

/// Symmetrize in place: `(M + Mᵀ) / 2`.
pub fn symmetrize<T: RealField + Copy>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::one() / (T::one() + T::one());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
