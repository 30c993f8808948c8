//! Test-only oracles, independent of the library's evaluation paths.
//!
//! The Beta CDF oracle integrates the density by adaptive Simpson
//! quadrature after the substitution `t = 1 - u^2`, which removes the
//! `(1-t)^{-1/2}` endpoint singularity for the `b = 1/2` laws used
//! throughout. The quantile oracle inverts it by plain bisection.

use ndarray::{Array1, Array2};

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    recurse(&f, a, b, simpson(&f, a, m, b), tol, 60)
}

/// `B(a, 1/2)` by quadrature: `2 * int_0^1 (1 - u^2)^(a-1) du`.
pub fn beta_function_oracle_half(a: f64) -> f64 {
    2.0 * adaptive_simpson(|u| (1.0 - u * u).powf(a - 1.0), 0.0, 1.0, 1e-14)
}

/// CDF of `Beta(a, 1/2)` by quadrature (requires `a >= 1` so the density
/// is bounded at the origin).
pub fn beta_cdf_oracle_half(a: f64, x: f64) -> f64 {
    assert!(a >= 1.0, "quadrature oracle requires a >= 1");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let lower = (1.0 - x).sqrt();
    let partial = 2.0 * adaptive_simpson(|u| (1.0 - u * u).powf(a - 1.0), lower, 1.0, 1e-14);
    partial / beta_function_oracle_half(a)
}

/// Quantile of `Beta(a, 1/2)` by bisecting the quadrature CDF.
pub fn beta_quantile_oracle_half(a: f64, q: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if beta_cdf_oracle_half(a, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares fit `P_k y` through explicit normal equations; shares no
/// code with the incremental path.
pub fn fit_vector_oracle(x: &Array2<f64>, k: usize, y: &Array1<f64>) -> Array1<f64> {
    let n = x.nrows();
    let mut g = vec![0.0; k * k];
    let mut c = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = x.column(i).dot(&x.column(j));
        }
        c[i] = x.column(i).dot(y);
    }
    // Gaussian elimination without pivoting; test designs are
    // well-conditioned Gaussian draws.
    for col in 0..k {
        for r in (col + 1)..k {
            let f = g[r * k + col] / g[col * k + col];
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
    let mut fit = Array1::zeros(n);
    for (j, bj) in b.iter().enumerate() {
        for i in 0..n {
            fit[i] += bj * x[(i, j)];
        }
    }
    fit
}
