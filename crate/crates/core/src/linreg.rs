//! Nested-projection residuals for an ordered design matrix.
//!
//! For each order `k` the residual is the observation minus its projection
//! onto the span of the first `k` design columns. The profile of squared
//! residual norms is computed once by incremental orthogonalization
//! (modified Gram-Schmidt with one reorthogonalization pass, columns taken
//! strictly in index order), giving all `p+1` norms in `O(n p^2)`. The
//! successive ratios of those norms are the statistic everything else in
//! this crate is built on.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

// A column whose orthogonal component has squared norm below this fraction
// of its original squared norm is declared linearly dependent.
const RANK_TOL: f64 = 1e-20;

// Residual floors below 1e-12 * ||y||^2 count as exact fits; ratios past
// an exact fit are defined as 1 so that a noiseless problem selects its
// true order and nothing later.
const EXACT_FIT_REL: f64 = 1e-12;

/// Ground truth attached to a synthetic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub beta: Array1<f64>,
    pub k0: usize,
    pub sigma2: f64,
}

/// A regression problem `y = X beta + w` with fixed column ordering.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: Array2<f64>,
    y: Array1<f64>,
    truth: Option<Truth>,
}

impl RegressionProblem {
    /// Validates dimensions (`n > p >= 1`) and, when truth is attached,
    /// that `k0` is the last nonzero coefficient index and `k0 >= 1`.
    /// Full column rank is checked later, during orthogonalization.
    pub fn new(x: Array2<f64>, y: Array1<f64>, truth: Option<Truth>) -> Result<Self> {
        let (n, p) = x.dim();
        if p < 1 || n <= p {
            return Err(Error::Domain(format!(
                "design must satisfy n > p >= 1, got n={n}, p={p}"
            )));
        }
        if y.len() != n {
            return Err(Error::Domain(format!(
                "observation length {} does not match n={n}",
                y.len()
            )));
        }
        if let Some(t) = &truth {
            if t.beta.len() != p {
                return Err(Error::Domain(format!(
                    "truth coefficient length {} does not match p={p}",
                    t.beta.len()
                )));
            }
            let last_nonzero = t.beta.iter().rposition(|&b| b != 0.0).map(|i| i + 1);
            if last_nonzero != Some(t.k0) || t.k0 < 1 {
                return Err(Error::Domain(format!(
                    "truth order k0={} does not match last nonzero coefficient {:?}",
                    t.k0, last_nonzero
                )));
            }
            if !(t.sigma2.is_finite() && t.sigma2 >= 0.0) {
                return Err(Error::Domain(format!(
                    "noise variance must be finite and nonnegative, got {}",
                    t.sigma2
                )));
            }
        }
        Ok(Self { x, y, truth })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn observation(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }
}

/// Squared residual norms `||r^k||^2` for `k = 0..p` and the successive
/// ratios `||r^k||^2 / ||r^{k-1}||^2` for `k = 1..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProfile {
    pub sq_norms: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl ResidualProfile {
    /// Maximum-likelihood noise variance at order `k`: `||r^k||^2 / n`.
    pub fn sigma2_at(&self, k: usize, n: usize) -> f64 {
        self.sq_norms[k] / n as f64
    }
}

// Four independent accumulators break the add-latency chain while keeping
// a fixed summation order, so results stay identical run to run.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let j = 4 * i;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in (4 * chunks)..n {
        tail += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Computes the residual profile of a problem.
pub fn residual_profile(problem: &RegressionProblem) -> Result<ResidualProfile> {
    residual_profile_of(problem.design(), problem.observation())
}

/// Residual profile from raw parts, without constructing a problem.
pub fn residual_profile_of(x: &Array2<f64>, y: &Array1<f64>) -> Result<ResidualProfile> {
    let (n, p) = x.dim();
    if p < 1 || n <= p || y.len() != n {
        return Err(Error::Domain(format!(
            "residual profile requires n > p >= 1 and matching y, got n={n}, p={p}, |y|={}",
            y.len()
        )));
    }
    let basis = orthonormal_columns(x)?;
    let mut r: Vec<f64> = y.to_vec();
    let mut sq_norms = Vec::with_capacity(p + 1);
    sq_norms.push(dot(&r, &r));
    for q in &basis {
        let c = dot(q, &r);
        axpy(-c, q, &mut r);
        sq_norms.push(dot(&r, &r));
    }
    let ratios = ratios_from_norms(&sq_norms);
    Ok(ResidualProfile { sq_norms, ratios })
}

fn ratios_from_norms(sq_norms: &[f64]) -> Vec<f64> {
    let eps_zero = EXACT_FIT_REL * sq_norms[0];
    sq_norms
        .windows(2)
        .map(|w| {
            if w[0] > eps_zero {
                (w[1] / w[0]).min(1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Ratios field of a profile, under the exact-fit convention.
pub fn residual_ratios(profile: &ResidualProfile) -> &[f64] {
    &profile.ratios
}

// Modified Gram-Schmidt with one reorthogonalization pass, columns in
// index order. Errors on the first column that is numerically dependent.
pub(crate) fn orthonormal_columns(x: &Array2<f64>) -> Result<Vec<Vec<f64>>> {
    let p = x.ncols();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v: Vec<f64> = x.column(j).iter().copied().collect();
        let orig_norm2 = dot(&v, &v);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let norm2 = dot(&v, &v);
        if norm2 <= RANK_TOL * orig_norm2 || norm2 == 0.0 {
            return Err(Error::RankDeficient { col: j + 1 });
        }
        let inv = 1.0 / norm2.sqrt();
        for vi in &mut v {
            *vi *= inv;
        }
        basis.push(v);
    }
    Ok(basis)
}

/// Squared residual norm `||(I - P_k) y||^2` by explicit solution of the
/// `k x k` normal equations. Deliberately shares no code with
/// [`residual_profile`]; it exists to check it.
pub fn projector_oracle(x: &Array2<f64>, k: usize, y: &Array1<f64>) -> Result<f64> {
    let (n, p) = x.dim();
    if k < 1 || k > p {
        return Err(Error::Domain(format!(
            "projector oracle requires 1 <= k <= p, got k={k}, p={p}"
        )));
    }
    if y.len() != n {
        return Err(Error::Domain(format!(
            "observation length {} does not match n={n}",
            y.len()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| x.column(j).iter().copied().collect()).collect();
    let yv = y.to_vec();
    // Gram matrix and right-hand side of the normal equations.
    let mut g = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let v = dot(&cols[i], &cols[j]);
            g[i * k + j] = v;
            g[j * k + i] = v;
        }
        c[i] = dot(&cols[i], &yv);
    }
    let b = solve_dense(&mut g, &mut c, k)?;
    let mut r = yv;
    for (col, bj) in cols.iter().zip(&b) {
        axpy(-bj, col, &mut r);
    }
    Ok(dot(&r, &r))
}

// Gaussian elimination with partial pivoting on a dense k x k system.
fn solve_dense(g: &mut [f64], c: &mut [f64], k: usize) -> Result<Vec<f64>> {
    let scale = g
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..k {
        let (pivot_row, pivot) = (col..k)
            .map(|r| (r, g[r * k + col]))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        if pivot.abs() <= 1e-13 * scale {
            return Err(Error::SingularSystem { k });
        }
        if pivot_row != col {
            for j in 0..k {
                g.swap(pivot_row * k + j, col * k + j);
            }
            c.swap(pivot_row, col);
        }
        for r in (col + 1)..k {
            let f = g[r * k + col] / g[col * k + col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                g[r * k + j] -= f * g[col * k + j];
            }
            c[r] -= f * c[col];
        }
    }
    let mut b = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = c[row];
        for j in (row + 1)..k {
            acc -= g[row * k + j] * b[j];
        }
        b[row] = acc / g[row * k + row];
    }
    Ok(b)
}
