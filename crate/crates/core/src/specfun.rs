//! Special functions for the Beta law behind residual ratio thresholds.
//!
//! Everything here serves one quantile: the `alpha/p` lower quantile of a
//! `Beta((n-k)/2, 1/2)` distribution. The forward CDF is the regularized
//! incomplete beta function, evaluated by a continued fraction with the
//! usual symmetry switch so both tails keep full accuracy. The inverse is
//! a bracketed Newton iteration with bisection fallback. A log-domain
//! variant of both directions covers significance levels far below the
//! smallest positive `f64`, which arise when `alpha` shrinks like
//! `exp(-n)` with growing sample size.

use crate::error::{Error, Result};

/// Shape pair `(a, b)` of a Beta distribution, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!(
                "beta shape parameters must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Shapes of the residual-ratio law at order `k`: `((n-k)/2, 1/2)`.
    pub fn residual_ratio(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::Domain(format!(
                "residual ratio law requires k < n, got k={k}, n={n}"
            )));
        }
        Self::new((n - k) as f64 / 2.0, 0.5)
    }
}

/// Limiting regime of the threshold sequence as the sample size grows:
/// `alpha_lim = lim log(alpha)/n` and `k_lim = lim k0/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRegime {
    pub alpha_lim: f64,
    pub k_lim: f64,
}

impl AsymptoticRegime {
    pub fn new(alpha_lim: f64, k_lim: f64) -> Result<Self> {
        if alpha_lim > 0.0 || alpha_lim.is_nan() {
            return Err(Error::Domain(format!(
                "alpha_lim must lie in [-inf, 0], got {alpha_lim}"
            )));
        }
        if !(0.0..1.0).contains(&k_lim) {
            return Err(Error::Domain(format!(
                "k_lim must lie in [0, 1), got {k_lim}"
            )));
        }
        Ok(Self { alpha_lim, k_lim })
    }

    /// Closed-form limit of the threshold at the true order: 1 when
    /// `alpha_lim = 0`, `exp(2 alpha_lim / (1 - k_lim))` when finite and
    /// negative, and 0 when `alpha_lim = -inf`.
    pub fn threshold_limit(&self) -> f64 {
        if self.alpha_lim == 0.0 {
            1.0
        } else if self.alpha_lim == f64::NEG_INFINITY {
            0.0
        } else {
            (2.0 * self.alpha_lim / (1.0 - self.k_lim)).exp()
        }
    }
}

// Lanczos approximation, 14-coefficient rational form with g = 5.2421875.
// Relative accuracy is a few 1e-16 across the positive axis, comfortably
// inside the 1e-12 contract on [1e-3, 1e8].
const LANCZOS_G_PLUS_HALF: f64 = 5.242_187_5;
const LANCZOS_SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS_COF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    let tmp = x + LANCZOS_G_PLUS_HALF;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COF {
        y += 1.0;
        ser += c / y;
    }
    Ok(tmp + (LANCZOS_SQRT_2PI * ser / x).ln())
}

/// Natural logarithm of the Beta function `B(a, b)`.
pub fn log_beta(params: BetaParams) -> f64 {
    let BetaParams { a, b } = params;
    // Constructor guarantees the domain, so the unwraps cannot fail.
    log_gamma(a).unwrap() + log_gamma(b).unwrap() - log_gamma(a + b).unwrap()
}

const CF_MAX_ITER: usize = 2_000;
const CF_EPS: f64 = 1e-16;
const CF_FPMIN: f64 = 1e-300;

// Continued fraction for the regularized incomplete beta, evaluated by the
// modified Lentz scheme. Valid (and fast) for x below the symmetry switch
// (a+1)/(a+b+2).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_FPMIN {
        d = CF_FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_FPMIN {
            d = CF_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_FPMIN {
            c = CF_FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_FPMIN {
            d = CF_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_FPMIN {
            c = CF_FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Convergence(format!(
        "incomplete beta continued fraction stalled at a={a}, b={b}, x={x}"
    )))
}

fn cf_switch(a: f64, b: f64) -> f64 {
    (a + 1.0) / (a + b + 2.0)
}

// Regularized incomplete beta I_x(a, b) on the linear scale.
fn inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    if x < cf_switch(a, b) {
        let ln_front = a * x.ln() + b * (-x).ln_1p() - log_beta(BetaParams { a, b });
        Ok((ln_front.exp() * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        let y = 1.0 - x;
        let ln_front = b * y.ln() + a * (-y).ln_1p() - log_beta(BetaParams { a, b });
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, y)? / b).clamp(0.0, 1.0))
    }
}

// ln I_x(a, b). Stays finite and accurate arbitrarily deep into the lower
// tail, where the linear-scale value underflows.
fn ln_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x >= 1.0 {
        return Ok(0.0);
    }
    if x < cf_switch(a, b) {
        let ln_front = a * x.ln() + b * (-x).ln_1p() - log_beta(BetaParams { a, b });
        Ok(ln_front + (beta_cf(a, b, x)? / a).ln())
    } else {
        let upper = inc_beta(b, a, 1.0 - x)?;
        Ok((-upper).ln_1p())
    }
}

// ln of the Beta(a, b) density at x, for Newton steps.
fn ln_beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - log_beta(BetaParams { a, b })
}

/// CDF of the `Beta(a, b)` distribution at `x` in `[0, 1]`.
pub fn beta_cdf(params: BetaParams, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "beta_cdf requires x in [0, 1], got {x}"
        )));
    }
    inc_beta(params.a, params.b, x)
}

/// Natural logarithm of the Beta CDF. Unlike [`beta_cdf`] this keeps full
/// relative accuracy in the far lower tail.
pub fn beta_log_cdf(params: BetaParams, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "beta_log_cdf requires x in [0, 1], got {x}"
        )));
    }
    ln_inc_beta(params.a, params.b, x)
}

const INV_MAX_ITER: usize = 200;
const INV_CDF_TOL: f64 = 1e-12;
// Residual tolerance on the log scale; corresponds to relative CDF error,
// which is far tighter than the absolute contract whenever q < 1.
const INV_LN_TOL: f64 = 1e-11;
// Below this probability the linear-scale residual loses resolution, so
// the inversion switches to the log-domain solver.
const INV_LOG_SWITCH: f64 = 1e-3;

/// Quantile function of the `Beta(a, b)` distribution.
///
/// Returns `x` with `|beta_cdf(params, x) - q| <= 1e-12`, by safeguarded
/// Newton iteration on the CDF residual with bisection fallback. Where
/// the CDF is so steep that no representable `x` meets the absolute
/// residual (its value moves by more than the tolerance per ulp), the
/// bracket collapses to machine resolution and the correctly rounded
/// quantile is returned instead.
pub fn beta_inv_cdf(params: BetaParams, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "beta_inv_cdf requires q in [0, 1], got {q}"
        )));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    if q < INV_LOG_SWITCH {
        return beta_inv_cdf_ln(params, q.ln());
    }
    let BetaParams { a, b } = params;
    let x0 = (a / (a + b)).clamp(1e-3, 1.0 - 1e-3);
    solve_monotone(
        x0,
        INV_CDF_TOL,
        |x| inc_beta(a, b, x).map(|v| v - q),
        |x, _| ln_beta_pdf(a, b, x).exp(),
    )
    .ok_or_else(|| {
        Error::Convergence(format!(
            "beta_inv_cdf did not reach {INV_CDF_TOL:e} for a={a}, b={b}, q={q}"
        ))
    })
}

// Safeguarded Newton on a monotone residual over (0, 1): a step is taken
// only if it stays inside the bracket and would at least halve the
// previous step, otherwise the bracket is bisected. Terminates on the
// residual tolerance or on a machine-resolution bracket (returning the
// side with the smaller residual).
fn solve_monotone<F, D>(x0: f64, tol: f64, mut residual: F, mut slope: D) -> Option<f64>
where
    F: FnMut(f64) -> Result<f64>,
    D: FnMut(f64, f64) -> f64,
{
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = x0;
    let mut step_old = 1.0_f64;
    for _ in 0..INV_MAX_ITER {
        let f = residual(x).ok()?;
        if f.abs() <= tol {
            return Some(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            let f_lo = residual(lo).ok()?.abs();
            let f_hi = residual(hi).ok()?.abs();
            return Some(if f_lo <= f_hi { lo } else { hi });
        }
        let df = slope(x, f);
        let newton = x - f / df;
        let next = if df > 0.0
            && newton > lo
            && newton < hi
            && (2.0 * f).abs() <= step_old * df
        {
            newton
        } else {
            0.5 * (lo + hi)
        };
        step_old = (next - x).abs();
        x = next;
    }
    None
}

/// Quantile function with the target probability supplied as `ln(q)`.
///
/// Handles levels far below the underflow limit of `f64`; such quantiles
/// arise for `alpha` decaying exponentially in the sample size. Solves
/// `ln F(x) = ln_q` to a 1e-11 log-residual (relative CDF accuracy).
pub fn beta_inv_cdf_ln(params: BetaParams, ln_q: f64) -> Result<f64> {
    if ln_q.is_nan() || ln_q > 0.0 {
        return Err(Error::Domain(format!(
            "beta_inv_cdf_ln requires ln_q <= 0, got {ln_q}"
        )));
    }
    if ln_q == 0.0 {
        return Ok(1.0);
    }
    if ln_q == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let BetaParams { a, b } = params;
    // Leading order of the small-z quantile expansion, used both as the
    // underflow guard and as the Newton starting point.
    let ln_rho1 = (a.ln() + ln_q + log_beta(params)) / a;
    if ln_rho1 < -708.0 {
        // The quantile is below the smallest positive f64.
        return Ok(0.0);
    }
    let mut x0 = beta_inv_expansion(params, ln_q);
    if !(x0 > 0.0 && x0 < 1.0) {
        x0 = 0.5;
    }
    solve_monotone(
        x0,
        INV_LN_TOL,
        |x| ln_inc_beta(a, b, x).map(|v| v - ln_q),
        // d/dx ln F = f / F = exp(ln f - ln F), and ln F = g + ln_q.
        |x, g| (ln_beta_pdf(a, b, x) - (g + ln_q)).exp(),
    )
    .ok_or_else(|| {
        Error::Convergence(format!(
            "beta_inv_cdf_ln did not reach {INV_LN_TOL:e} for a={a}, b={b}, ln_q={ln_q}"
        ))
    })
}

// Three-term small-z expansion of the Beta quantile around z = 0:
//   F^{-1}(z) = rho + (b-1)/(a+1) rho^2
//             + (b-1)(a^2+3ab-a+5b-4)/(2(a+1)^2(a+2)) rho^3 + O(z^{4/a}),
// with rho = (a z B(a, b))^{1/a}, evaluated in logs.
fn beta_inv_expansion(params: BetaParams, ln_z: f64) -> f64 {
    let BetaParams { a, b } = params;
    let ln_rho = (a.ln() + ln_z + log_beta(params)) / a;
    if ln_rho >= 0.0 {
        return 1.0;
    }
    let rho1 = ln_rho.exp();
    let rho2 = (2.0 * ln_rho).exp();
    let rho3 = (3.0 * ln_rho).exp();
    let c2 = (b - 1.0) / (a + 1.0);
    let c3 = (b - 1.0) * (a * a + 3.0 * a * b - a + 5.0 * b - 4.0)
        / (2.0 * (a + 1.0) * (a + 1.0) * (a + 2.0));
    (rho1 + c2 * rho2 + c3 * rho3).clamp(0.0, 1.0)
}

fn check_threshold_domain(n: usize, p: usize, k: usize) -> Result<()> {
    if k < 1 || k > p || p >= n {
        return Err(Error::Domain(format!(
            "threshold requires 1 <= k <= p < n, got n={n}, p={p}, k={k}"
        )));
    }
    Ok(())
}

/// Residual ratio threshold at order `k`: the `alpha/p` lower quantile of
/// `Beta((n-k)/2, 1/2)`. Saturates at 1 once `alpha/p >= 1`; `alpha = 0`
/// gives 0.
pub fn rrt_threshold(n: usize, p: usize, k: usize, alpha: f64) -> Result<f64> {
    check_threshold_domain(n, p, k)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!(
            "threshold level must be finite and nonnegative, got {alpha}"
        )));
    }
    let q = alpha / p as f64;
    if q >= 1.0 {
        return Ok(1.0);
    }
    beta_inv_cdf(BetaParams::residual_ratio(n, k)?, q)
}

/// [`rrt_threshold`] with the level supplied as `ln(alpha)`, for levels
/// that underflow `f64` (e.g. `alpha = exp(-n)` at large `n`).
pub fn rrt_threshold_ln_alpha(n: usize, p: usize, k: usize, ln_alpha: f64) -> Result<f64> {
    check_threshold_domain(n, p, k)?;
    if ln_alpha.is_nan() {
        return Err(Error::Domain("ln_alpha must not be NaN".into()));
    }
    let ln_q = ln_alpha - (p as f64).ln();
    if ln_q >= 0.0 {
        return Ok(1.0);
    }
    beta_inv_cdf_ln(BetaParams::residual_ratio(n, k)?, ln_q)
}

/// Large-`n` closed-form approximation of [`rrt_threshold`]: the quantile
/// expansion truncated after its cubic term, with `a = (n-k0)/2`,
/// `b = 1/2`, `z = alpha/p`. The beta function inside the expansion is
/// evaluated exactly via [`log_beta`].
pub fn rrt_threshold_asymptotic(n: usize, p: usize, k0: usize, alpha: f64) -> Result<f64> {
    check_threshold_domain(n, p, k0)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!(
            "threshold level must be finite and nonnegative, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    rrt_threshold_asymptotic_ln_alpha(n, p, k0, alpha.ln())
}

/// [`rrt_threshold_asymptotic`] with the level supplied as `ln(alpha)`.
pub fn rrt_threshold_asymptotic_ln_alpha(
    n: usize,
    p: usize,
    k0: usize,
    ln_alpha: f64,
) -> Result<f64> {
    check_threshold_domain(n, p, k0)?;
    if ln_alpha.is_nan() {
        return Err(Error::Domain("ln_alpha must not be NaN".into()));
    }
    let ln_z = ln_alpha - (p as f64).ln();
    if ln_z >= 0.0 {
        return Ok(1.0);
    }
    if ln_z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok(beta_inv_expansion(
        BetaParams::residual_ratio(n, k0)?,
        ln_z,
    ))
}
