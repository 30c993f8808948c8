//! Order estimators: residual ratio thresholding and penalized criteria.
//!
//! The thresholding estimator picks the largest order whose residual ratio
//! falls at or below a per-order Beta quantile. When no order qualifies
//! (very low SNR), the level is enlarged along a fixed grid until some
//! order does; the enlarged level is reported alongside the estimate.
//!
//! The penalized family minimizes `n log(sigma2_k) + h(k, sigma2_k)` over
//! `k = 1..p` for a pluggable penalty `h`.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linreg::{residual_profile_of, ResidualProfile};
use crate::simulate::{stream_rng, StreamDomain};
use crate::specfun::rrt_threshold;

/// Default number of enlarged levels spanned by the fallback grid.
pub const DEFAULT_FALLBACK_GRID: usize = 100;

/// Precomputed thresholds `gamma[k-1]` for `k = 1..p` at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub gamma: Vec<f64>,
}

impl ThresholdTable {
    pub fn new(n: usize, p: usize, alpha: f64) -> Result<Self> {
        let gamma = (1..=p)
            .map(|k| rrt_threshold(n, p, k, alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, p, alpha, gamma })
    }
}

/// Thresholds precomputed on a grid of enlarged levels over `(alpha, p]`,
/// geometrically spaced so small enlargements are resolved finely. The
/// last level is exactly `p`, where every threshold saturates at 1.
#[derive(Debug, Clone)]
pub struct FallbackGrid {
    pub levels: Vec<f64>,
    tables: Vec<Vec<f64>>,
    p: usize,
}

impl FallbackGrid {
    pub fn new(n: usize, p: usize, alpha: f64, grid_size: usize) -> Result<Self> {
        if grid_size < 1 {
            return Err(Error::Domain("fallback grid needs at least one level".into()));
        }
        let levels = fallback_levels(alpha, p, grid_size);
        let tables = levels
            .iter()
            .map(|&a| {
                (1..=p)
                    .map(|k| rrt_threshold(n, p, k, a))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, tables, p })
    }
}

/// Geometric grid of `grid_size` levels spanning `(alpha, p]`.
pub fn fallback_levels(alpha: f64, p: usize, grid_size: usize) -> Vec<f64> {
    let p = p as f64;
    let ratio = p / alpha;
    let mut levels: Vec<f64> = (1..=grid_size)
        .map(|i| alpha * ratio.powf(i as f64 / grid_size as f64))
        .collect();
    if let Some(last) = levels.last_mut() {
        *last = p;
    }
    levels
}

/// Penalty `h(k, sigma2_k)` of a penalized criterion.
#[derive(Clone)]
pub enum PenaltyRule {
    /// `h = 2k`.
    Aic,
    /// `h = k log n`.
    Bic,
    /// `h = max(k log n, 2k log(1/sigma2_k))`; consistent as the noise
    /// variance goes to zero.
    Hsc,
    /// `h = v k` with `v` calibrated by [`calibrate_design_penalty`] so the
    /// high-SNR overestimation probability stays at or below `level`.
    Design { level: f64, v: f64 },
    /// Caller-supplied penalty, e.g. for criteria whose formula lives
    /// outside this crate.
    Plugin {
        name: String,
        h: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    },
}

impl PenaltyRule {
    pub fn label(&self) -> String {
        match self {
            PenaltyRule::Aic => "aic".into(),
            PenaltyRule::Bic => "bic".into(),
            PenaltyRule::Hsc => "hsc".into(),
            PenaltyRule::Design { level, .. } => format!("design({level})"),
            PenaltyRule::Plugin { name, .. } => name.clone(),
        }
    }

    fn evaluate(&self, k: usize, n: usize, sigma2_k: f64) -> f64 {
        let kf = k as f64;
        match self {
            PenaltyRule::Aic => 2.0 * kf,
            PenaltyRule::Bic => kf * (n as f64).ln(),
            PenaltyRule::Hsc => (kf * (n as f64).ln()).max(2.0 * kf * (1.0 / sigma2_k).ln()),
            PenaltyRule::Design { v, .. } => v * kf,
            PenaltyRule::Plugin { h, .. } => h(k, sigma2_k),
        }
    }
}

impl fmt::Debug for PenaltyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltyRule::Design { level, v } => {
                write!(f, "Design {{ level: {level}, v: {v} }}")
            }
            PenaltyRule::Plugin { name, .. } => write!(f, "Plugin({name})"),
            other => f.write_str(&other.label()),
        }
    }
}

/// Outcome of a selection, including the per-order score trace.
///
/// For the thresholding estimator the trace holds `RR(k) - gamma(k)` at
/// the level actually used; for penalized criteria it holds the score
/// `n log(sigma2_k) + h(k, sigma2_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub k_hat: usize,
    pub criterion: String,
    pub alpha_used: Option<f64>,
    pub fallback: bool,
    pub trace: Vec<f64>,
}

fn max_qualifying(ratios: &[f64], gamma: &[f64]) -> Option<usize> {
    (1..=ratios.len())
        .rev()
        .find(|&k| ratios[k - 1] <= gamma[k - 1])
}

fn rrt_outcome(ratios: &[f64], gamma: &[f64], alpha0: f64, level: f64, fallback: bool) -> SelectionOutcome {
    let k_hat = match max_qualifying(ratios, gamma) {
        // At a saturated level (level >= p) every threshold is 1 and every
        // order qualifies vacuously; the data carry no evidence for any
        // order, so report the smallest admissible one.
        Some(k) => {
            if fallback && level >= ratios.len() as f64 {
                1
            } else {
                k
            }
        }
        None => unreachable!("caller guarantees a qualifying order"),
    };
    SelectionOutcome {
        k_hat,
        criterion: format!("rrt(alpha={alpha0})"),
        alpha_used: Some(level),
        fallback,
        trace: ratios.iter().zip(gamma).map(|(r, g)| r - g).collect(),
    }
}

/// Thresholding estimator: the largest `k` with `RR(k) <= gamma(k)`.
/// When no order qualifies, enlarges the level along a fresh fallback
/// grid of `fallback_grid_size` levels (see [`rrt_select_with_grid`] to
/// amortize the grid across calls).
pub fn rrt_select(
    ratios: &[f64],
    table: &ThresholdTable,
    fallback_grid_size: usize,
) -> Result<SelectionOutcome> {
    if ratios.len() != table.p {
        return Err(Error::Domain(format!(
            "ratio vector length {} does not match table p={}",
            ratios.len(),
            table.p
        )));
    }
    if max_qualifying(ratios, &table.gamma).is_some() {
        return Ok(rrt_outcome(ratios, &table.gamma, table.alpha, table.alpha, false));
    }
    let grid = FallbackGrid::new(table.n, table.p, table.alpha, fallback_grid_size)?;
    Ok(rrt_select_with_grid(ratios, table, &grid))
}

/// [`rrt_select`] against a precomputed fallback grid. The hot path of the
/// Monte Carlo harness.
pub fn rrt_select_with_grid(
    ratios: &[f64],
    table: &ThresholdTable,
    grid: &FallbackGrid,
) -> SelectionOutcome {
    debug_assert_eq!(ratios.len(), table.p);
    debug_assert_eq!(grid.p, table.p);
    if max_qualifying(ratios, &table.gamma).is_some() {
        return rrt_outcome(ratios, &table.gamma, table.alpha, table.alpha, false);
    }
    for (&level, gamma) in grid.levels.iter().zip(&grid.tables) {
        if max_qualifying(ratios, gamma).is_some() {
            return rrt_outcome(ratios, gamma, table.alpha, level, true);
        }
    }
    // The last grid level is p, where gamma(1) = 1 >= RR(1).
    unreachable!("fallback grid terminates at a saturated level");
}

/// Smallest level on a `grid_size`-point geometric grid over `(alpha, p]`
/// at which the selection set becomes nonempty. Precondition: the set is
/// empty at `alpha` itself.
pub fn alpha_new(ratios: &[f64], n: usize, p: usize, alpha: f64, grid_size: usize) -> Result<f64> {
    let grid = FallbackGrid::new(n, p, alpha, grid_size)?;
    for (&level, gamma) in grid.levels.iter().zip(&grid.tables) {
        if max_qualifying(ratios, gamma).is_some() {
            return Ok(level);
        }
    }
    unreachable!("grid terminates at a saturated level");
}

/// Penalized criterion: argmin over `k = 1..p` of
/// `n log(sigma2_k) + h(k, sigma2_k)`, ties broken toward smaller `k`.
/// Errors on exact fits, where the log-likelihood term is undefined.
pub fn itc_select(profile: &ResidualProfile, n: usize, rule: &PenaltyRule) -> Result<SelectionOutcome> {
    let p = profile.ratios.len();
    let nf = n as f64;
    let mut trace = Vec::with_capacity(p);
    for k in 1..=p {
        let sigma2_k = profile.sq_norms[k] / nf;
        if sigma2_k <= 0.0 {
            return Err(Error::DegenerateFit { k });
        }
        trace.push(nf * sigma2_k.ln() + rule.evaluate(k, n, sigma2_k));
    }
    let mut k_hat = 1;
    for k in 2..=p {
        if trace[k - 1] < trace[k_hat - 1] {
            k_hat = k;
        }
    }
    Ok(SelectionOutcome {
        k_hat,
        criterion: rule.label(),
        alpha_used: None,
        fallback: false,
        trace,
    })
}

const CALIBRATION_BISECT_TOL: f64 = 1e-2;

/// Smallest linear-penalty weight `v` such that, under pure noise
/// (`y = w`, unit variance), the fraction of draws where some order
/// `k >= 1` beats the empty model is at most `level`.
///
/// The comparison `min_k [n log(sigma2_k) + v k] < n log(sigma2_0)` is
/// scale-free in the noise variance, so calibrating at unit variance
/// realizes the high-SNR limit. Deterministic in `(n, p, level, trials,
/// seed)`; trials run in parallel.
pub fn calibrate_design_penalty(
    n: usize,
    p: usize,
    level: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if p < 1 || n <= p {
        return Err(Error::Domain(format!(
            "calibration requires n > p >= 1, got n={n}, p={p}"
        )));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Domain(format!(
            "calibration level must lie in (0, 1], got {level}"
        )));
    }
    if level == 1.0 {
        return Ok(0.0);
    }
    if trials == 0 {
        return Err(Error::Domain("calibration needs at least one trial".into()));
    }
    // Per draw, the smallest v that suppresses every order is
    //   v*(draw) = max_k n (log sigma2_0 - log sigma2_k) / k,
    // and the draw overestimates at weight v iff v < v*(draw).
    let critical: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut xrng = stream_rng(seed, StreamDomain::Design, trial as u64);
            let mut wrng = stream_rng(seed, StreamDomain::Noise, trial as u64);
            let x = ndarray::Array2::from_shape_fn((n, p), |_| {
                StandardNormal.sample(&mut xrng)
            });
            let w = ndarray::Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut wrng));
            let prof = residual_profile_of(&x, &w)?;
            let ln0 = prof.sq_norms[0].ln();
            Ok((1..=p)
                .map(|k| n as f64 * (ln0 - prof.sq_norms[k].ln()) / k as f64)
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction = |v: f64| critical.iter().filter(|&&c| c > v).count() as f64 / trials as f64;
    let mut lo = 0.0;
    let mut hi = 10.0 * (n as f64).ln();
    let mut doublings = 0;
    while fraction(hi) > level {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::BracketFailure(format!(
                "no upper bracket below {hi:e}; trials={trials} is too small for level={level}"
            )));
        }
    }
    while hi - lo > CALIBRATION_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if fraction(mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, p: usize, alpha: f64) -> ThresholdTable {
        ThresholdTable::new(n, p, alpha).unwrap()
    }

    #[test]
    fn table_is_strictly_decreasing() {
        let t = table(30, 20, 0.1);
        for w in t.gamma.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn noiseless_pattern_selects_true_order() {
        // RR(3) = 0, everything after is 1 by the exact-fit convention.
        let t = table(30, 20, 0.1);
        let mut ratios = vec![0.95; 20];
        ratios[2] = 0.0;
        for r in ratios.iter_mut().skip(3) {
            *r = 1.0;
        }
        let out = rrt_select(&ratios, &t, DEFAULT_FALLBACK_GRID).unwrap();
        assert_eq!(out.k_hat, 3);
        assert!(!out.fallback);
        assert_eq!(out.alpha_used, Some(0.1));
    }

    #[test]
    fn all_ones_falls_back_to_smallest_order() {
        let t = table(30, 20, 0.1);
        let ratios = vec![1.0; 20];
        let out = rrt_select(&ratios, &t, DEFAULT_FALLBACK_GRID).unwrap();
        assert!(out.fallback);
        assert_eq!(out.k_hat, 1);
        assert_eq!(out.alpha_used, Some(20.0));
    }

    #[test]
    fn alpha_new_on_all_ones_is_p() {
        let ratios = vec![1.0; 20];
        let a = alpha_new(&ratios, 30, 20, 0.1, 100).unwrap();
        assert_eq!(a, 20.0);
    }

    #[test]
    fn alpha_new_returns_smallest_covering_grid_point() {
        // Construct ratios that qualify exactly at a known level a*: set
        // RR(k) slightly below gamma^{a*}(k) for one k and 1 elsewhere.
        let (n, p, alpha) = (30usize, 20usize, 0.1);
        let levels = fallback_levels(alpha, p, 100);
        let target = levels[40];
        let g = rrt_threshold(n, p, 7, target).unwrap();
        let mut ratios = vec![1.0; p];
        ratios[6] = g - 1e-12;
        let a = alpha_new(&ratios, n, p, alpha, 100).unwrap();
        assert_eq!(a, target);
        // And one grid step earlier must not qualify.
        let g_prev = rrt_threshold(n, p, 7, levels[39]).unwrap();
        assert!(ratios[6] > g_prev);
    }

    #[test]
    fn fallback_grid_spans_and_terminates() {
        let levels = fallback_levels(0.1, 20, 100);
        assert_eq!(levels.len(), 100);
        assert!(levels[0] > 0.1);
        assert_eq!(*levels.last().unwrap(), 20.0);
        for w in levels.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn selection_is_deterministic() {
        let t = table(25, 12, 0.05);
        let ratios: Vec<f64> = (0..12).map(|i| 0.4 + 0.05 * i as f64).collect();
        let a = rrt_select(&ratios, &t, DEFAULT_FALLBACK_GRID).unwrap();
        let b = rrt_select(&ratios, &t, DEFAULT_FALLBACK_GRID).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace, b.trace);
    }

    fn profile_from_norms(norms: Vec<f64>) -> ResidualProfile {
        let ratios = norms
            .windows(2)
            .map(|w| (w[1] / w[0]).min(1.0))
            .collect();
        ResidualProfile { sq_norms: norms, ratios }
    }

    #[test]
    fn itc_penalties_have_documented_forms() {
        let n = 50;
        let prof = profile_from_norms(vec![100.0, 60.0, 30.0, 20.0, 18.0, 17.5]);
        let aic = itc_select(&prof, n, &PenaltyRule::Aic).unwrap();
        let bic = itc_select(&prof, n, &PenaltyRule::Bic).unwrap();
        for k in 1..=5usize {
            let s2 = prof.sq_norms[k] / n as f64;
            let base = n as f64 * s2.ln();
            assert!((aic.trace[k - 1] - (base + 2.0 * k as f64)).abs() < 1e-12);
            assert!((bic.trace[k - 1] - (base + k as f64 * (n as f64).ln())).abs() < 1e-12);
        }
        let hsc = itc_select(&prof, n, &PenaltyRule::Hsc).unwrap();
        let s2_1 = prof.sq_norms[1] / n as f64;
        let want = (n as f64) * s2_1.ln()
            + ((n as f64).ln()).max(2.0 * (1.0 / s2_1).ln());
        assert!((hsc.trace[0] - want).abs() < 1e-12);
    }

    #[test]
    fn itc_tie_breaks_toward_smaller_k() {
        // Flat penalty over a flat tail: all three orders score identically.
        let prof = profile_from_norms(vec![100.0, 50.0, 50.0, 50.0]);
        let n = 10;
        let rule = PenaltyRule::Plugin {
            name: "flat".into(),
            h: Arc::new(|_, _| 0.0),
        };
        let out = itc_select(&prof, n, &rule).unwrap();
        assert_eq!(out.k_hat, 1);
    }

    #[test]
    fn itc_rejects_exact_fits() {
        let prof = ResidualProfile {
            sq_norms: vec![10.0, 5.0, 0.0, 0.0],
            ratios: vec![0.5, 0.0, 1.0],
        };
        assert!(matches!(
            itc_select(&prof, 10, &PenaltyRule::Aic),
            Err(Error::DegenerateFit { k: 2 })
        ));
    }

    #[test]
    fn itc_scale_equivariance_of_argmin() {
        let prof = profile_from_norms(vec![100.0, 41.0, 17.0, 12.0, 11.0, 10.8]);
        let scaled = profile_from_norms(
            prof.sq_norms.iter().map(|s| s * 4.0).collect(),
        );
        for rule in [PenaltyRule::Aic, PenaltyRule::Bic] {
            let a = itc_select(&prof, 40, &rule).unwrap();
            let b = itc_select(&scaled, 40, &rule).unwrap();
            assert_eq!(a.k_hat, b.k_hat, "{}", rule.label());
        }
    }

    #[test]
    fn calibration_level_one_is_free() {
        assert_eq!(calibrate_design_penalty(20, 10, 1.0, 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn calibration_monotone_in_level() {
        let v_loose = calibrate_design_penalty(20, 10, 0.1, 2_000, 9).unwrap();
        let v_tight = calibrate_design_penalty(20, 10, 0.01, 2_000, 9).unwrap();
        assert!(v_tight > v_loose, "v(0.01)={v_tight} vs v(0.1)={v_loose}");
    }

    #[test]
    fn calibration_is_deterministic() {
        let a = calibrate_design_penalty(15, 6, 0.1, 1_000, 3).unwrap();
        let b = calibrate_design_penalty(15, 6, 0.1, 1_000, 3).unwrap();
        assert_eq!(a, b);
    }
}
