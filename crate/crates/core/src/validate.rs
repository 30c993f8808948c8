//! The acceptance suite: nine numbered criteria covering threshold
//! accuracy, probability bounds, distributional behaviour, oracle
//! agreement, relative performance, and determinism.
//!
//! Each criterion runs at one of two scales: `Quick` (1e3 trials per
//! Monte Carlo cell, a smoke run) or `Full` (1e4 trials, the reporting
//! scale whose tolerances the criteria state). Monte Carlo regimes are
//! computed once per validator and shared across criteria. Everything is
//! deterministic in the validator seed.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use ndarray::Array1;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::experiments::{
    builtin_regime, run_experiment, BuiltinRegime, ExperimentSpec, MetricSummary,
    SelectorSpec,
};
use crate::linreg::{projector_oracle, residual_profile, residual_profile_of};
use crate::selectors::{rrt_select_with_grid, FallbackGrid, ThresholdTable, DEFAULT_FALLBACK_GRID};
use crate::simulate::{
    gen_design, gen_problem_with_design, stream_rng, CoefKind, CoefModel, DesignModel, NoiseSpec,
    StreamDomain,
};
use crate::specfun::{
    beta_cdf, beta_inv_cdf, rrt_threshold, rrt_threshold_asymptotic,
    rrt_threshold_asymptotic_ln_alpha, rrt_threshold_ln_alpha, BetaParams,
};

/// Scale of a validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    pub fn trials(self) -> usize {
        match self {
            Level::Quick => 1_000,
            Level::Full => 10_000,
        }
    }
}

/// Default seed of the shipped validation runs.
pub const DEFAULT_VALIDATION_SEED: u64 = 7;

/// Verdict of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn status_line(&self) -> String {
        format!(
            "criterion {}: {} [{}] ({:.1}s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64()
        )
    }
}

struct CachedRun {
    spec: ExperimentSpec,
    summary: MetricSummary,
    elapsed: Duration,
}

/// Runs acceptance criteria, sharing Monte Carlo regimes across them.
pub struct Validator {
    level: Level,
    seed: u64,
    cache: Mutex<HashMap<String, Arc<OnceLock<Arc<CachedRun>>>>>,
}

fn derive_seed(base: u64, name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64 ^ base;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// Checks accumulate (label, pass, observed) triples and fold into one
// CriterionResult.
struct Checks {
    details: Vec<String>,
    pass: bool,
}

impl Checks {
    fn new() -> Self {
        Self { details: Vec::new(), pass: true }
    }

    fn require(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    fn finish(self, id: usize, title: &'static str, started: Instant) -> CriterionResult {
        CriterionResult {
            id,
            title,
            pass: self.pass,
            details: self.details,
            elapsed: started.elapsed(),
        }
    }
}

impl Validator {
    pub fn new(level: Level, seed: u64) -> Self {
        Self {
            level,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// Runs all nine criteria in order.
    pub fn run_all(&self) -> Vec<CriterionResult> {
        (1..=9).map(|id| self.criterion(id)).collect()
    }

    pub fn criterion(&self, id: usize) -> CriterionResult {
        match id {
            1 => self.c1_threshold_validation(),
            2 => self.c2_overestimation_envelope(),
            3 => self.c3_high_snr(),
            4 => self.c4_threshold_limits(),
            5 => self.c5_large_sample(),
            6 => self.c6_distributional(),
            7 => self.c7_oracle_equivalence(),
            8 => self.c8_relative_performance(),
            9 => self.c9_determinism(),
            _ => panic!("criterion ids run 1..=9, got {id}"),
        }
    }

    // Built-in regime at the validator's scale and derived seed, computed
    // once and shared.
    fn regime(&self, name: &str) -> Arc<CachedRun> {
        let slot = {
            let mut cache = self.cache.lock().unwrap();
            cache
                .entry(name.to_string())
                .or_insert_with(|| Arc::new(OnceLock::new()))
                .clone()
        };
        slot.get_or_init(|| {
            let mut spec = match builtin_regime(name) {
                Some(BuiltinRegime::Selection(spec)) => spec,
                _ => panic!("{name} is not a selection regime"),
            };
            spec.trials = self.level.trials();
            spec.seed = derive_seed(self.seed, name);
            let started = Instant::now();
            let summary = run_experiment(&spec).expect("builtin regime must run");
            Arc::new(CachedRun {
                spec,
                summary,
                elapsed: started.elapsed(),
            })
        })
        .clone()
    }

    // Criterion 1: with a fixed 30 x 20 design, k0 = 5, and noise redrawn
    // per trial, the frequency of "every ratio beyond the true order
    // stays above its threshold" must fall in the documented bands at
    // both SNRs and both levels, inside a minute.
    fn c1_threshold_validation(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let run = self.regime("fig1");
        let bands = [
            (0.0, "rrt(0.1)", 0.935, 0.02),
            (0.0, "rrt(0.01)", 0.99, 0.01),
            (20.0, "rrt(0.1)", 0.941, 0.02),
            (20.0, "rrt(0.01)", 0.993, 0.01),
        ];
        for (snr, sel, center, tol) in bands {
            let cell = run
                .summary
                .cells
                .iter()
                .find(|c| c.point.snr_db == snr && c.selector == sel)
                .expect("fig1 cell");
            let observed = 1.0 - cell.overest_event_rate().unwrap();
            // The documented centers allow the stated slack on either
            // side, widened by nothing: the band is the criterion.
            let ok = (observed - center).abs() <= tol;
            checks.require(
                ok,
                format!("{sel} at {snr} dB: no-overestimation rate {observed:.4} within {center} +/- {tol}"),
            );
        }
        let ok_time = run.elapsed < Duration::from_secs(60);
        checks.require(
            ok_time,
            format!("fig1 runtime {:.1}s < 60s", run.elapsed.as_secs_f64()),
        );
        checks.finish(1, "threshold-validation frequencies (fixed design)", started)
    }

    // Criterion 2: on every Monte Carlo cell of every built-in regime the
    // overestimation-event frequency stays at or below alpha + 3 binomial
    // sigma; on the high-SNR cells of fig3a it also stays at or above the
    // alpha/p lower bound.
    fn c2_overestimation_envelope(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let regimes = [
            "fig1",
            "fig3a",
            "fig3b-left",
            "fig3b-right",
            "fig4a",
            "fig4b",
            "fig4c",
            "fig4d",
            "fig5a",
            "fig5b",
            "fig5c",
            "fig5d",
            "fig6a",
            "fig6b",
            "fig6c",
            "fig6d",
        ];
        for name in regimes {
            let run = self.regime(name);
            let n_sel = run.spec.selectors.len();
            let mut worst: Option<(f64, String)> = None;
            let mut all_ok = true;
            for (i, cell) in run.summary.cells.iter().enumerate() {
                let sel = &run.spec.selectors[i % n_sel];
                let alpha = match sel {
                    SelectorSpec::Rrt { alpha } => alpha.value(cell.point.n).min(1.0),
                    _ => continue,
                };
                let rate = cell.overest_event_rate().unwrap();
                let sigma = (alpha * (1.0 - alpha) / cell.included() as f64).sqrt();
                let bound = alpha + 3.0 * sigma;
                let ok = rate <= bound;
                all_ok &= ok;
                let slack = bound - rate;
                if worst.as_ref().map_or(true, |(w, _)| slack < *w) {
                    worst = Some((
                        slack,
                        format!(
                            "{name} {} at {} dB: event rate {rate:.4} <= {bound:.4}",
                            cell.selector, cell.point.snr_db
                        ),
                    ));
                }
            }
            let (_, detail) = worst.expect("every regime has thresholding cells");
            checks.require(all_ok, format!("upper envelope, tightest cell: {detail}"));
        }
        // Lower bound on the high-SNR cells of fig3a.
        let run = self.regime("fig3a");
        let n_sel = run.spec.selectors.len();
        for (i, cell) in run.summary.cells.iter().enumerate() {
            if cell.point.snr_db < 20.0 {
                continue;
            }
            let alpha = match &run.spec.selectors[i % n_sel] {
                SelectorSpec::Rrt { alpha } => alpha.value(cell.point.n),
                _ => continue,
            };
            let q = alpha / cell.point.p as f64;
            let bound = q - 3.0 * (q / cell.included() as f64).sqrt();
            let rate = cell.overest_event_rate().unwrap();
            checks.require(
                rate >= bound,
                format!(
                    "lower bound fig3a {} at {} dB: event rate {rate:.4} >= {bound:.4}",
                    cell.selector, cell.point.snr_db
                ),
            );
        }
        checks.finish(2, "overestimation-event envelope", started)
    }

    // Criterion 3: high-SNR error probabilities on fig3a. The bounds are
    // stated at the full reporting scale; the quick smoke run widens them
    // by three binomial standard deviations so a 1e3-trial estimate of a
    // probability near its bound does not flag spuriously.
    fn c3_high_snr(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let run = self.regime("fig3a");
        let slack = |bound: f64, n: usize| match self.level {
            Level::Full => 0.0,
            Level::Quick => 3.0 * (bound * (1.0 - bound) / n as f64).sqrt(),
        };
        for (sel, alpha) in [("rrt(0.1)", 0.1), ("rrt(0.01)", 0.01)] {
            let cell = run
                .summary
                .cells
                .iter()
                .find(|c| c.point.snr_db == 30.0 && c.selector == sel)
                .expect("30 dB cell");
            let tol = alpha + slack(alpha, cell.included());
            checks.require(
                cell.p_over() <= tol,
                format!("{sel} at 30 dB: P_O {:.4} <= {tol:.4}", cell.p_over()),
            );
            let tol = 0.01 + slack(0.01, cell.included());
            checks.require(
                cell.p_under() <= tol,
                format!("{sel} at 30 dB: P_U {:.4} <= {tol:.4}", cell.p_under()),
            );
        }
        // Plateau of the overestimation probability for the 0.1 level:
        // every flat-region cell (10 dB and up) sits inside one decade.
        for cell in run
            .summary
            .cells
            .iter()
            .filter(|c| c.selector == "rrt(0.1)" && c.point.snr_db >= 10.0)
        {
            let po = cell.p_over();
            checks.require(
                (0.01..=0.1).contains(&po),
                format!(
                    "rrt(0.1) plateau at {} dB: P_O {po:.4} in [1e-2, 1e-1]",
                    cell.point.snr_db
                ),
            );
        }
        checks.finish(3, "high-SNR error probabilities", started)
    }

    // Criterion 4: threshold limits at large n, exact against asymptotic.
    fn c4_threshold_limits(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        // A1: slow decay of alpha leaves the threshold near one.
        let g = rrt_threshold(100_000, 30_000, 10_000, 0.1).unwrap();
        checks.require(
            g >= 0.99,
            format!("A1: threshold at n=1e5, p=0.3n, k0=0.1n, alpha=0.1 is {g:.6} >= 0.99"),
        );
        // A2: alpha = exp(-n) pins the limit at exp(-2/(1-k_lim)), here
        // exp(-2); the level itself underflows f64 and goes in as a log.
        let n = 10_000;
        let p = 3_000;
        let want = (-2.0_f64).exp();
        let exact = rrt_threshold_ln_alpha(n, p, 1, -(n as f64)).unwrap();
        checks.require(
            (exact - want).abs() <= 1e-2,
            format!("A2 exact: {exact:.6} within 1e-2 of exp(-2) = {want:.6}"),
        );
        let asym = rrt_threshold_asymptotic_ln_alpha(n, p, 1, -(n as f64)).unwrap();
        checks.require(
            (asym - want).abs() <= 1e-2,
            format!("A2 asymptotic: {asym:.6} within 1e-2 of exp(-2)"),
        );
        // A3: alpha = exp(-n^2) drives the threshold to zero.
        let n = 1_000;
        let g = rrt_threshold_ln_alpha(n, 300, 1, -(n as f64) * n as f64).unwrap();
        checks.require(g <= 1e-3, format!("A3: threshold {g:.2e} <= 1e-3 at n=1e3"));
        // Exact and truncated-expansion threshold agree at n = 1e4.
        let (n, p, k0) = (10_000, 3_000, 1_000);
        let exact = rrt_threshold(n, p, k0, 0.1).unwrap();
        let asym = rrt_threshold_asymptotic(n, p, k0, 0.1).unwrap();
        checks.require(
            (exact - asym).abs() <= 1e-3,
            format!("agreement at n=1e4: exact {exact:.6} vs asymptotic {asym:.6}"),
        );
        checks.finish(4, "large-n threshold limits", started)
    }

    // Criterion 5: large-sample consistency on the fixed-(p, k0) regime.
    fn c5_large_sample(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let run = self.regime("fig3b-left");
        let series: Vec<_> = run
            .summary
            .cells
            .iter()
            .filter(|c| c.selector == "rrt(1/sqrt(n))")
            .collect();
        let last = series.last().unwrap();
        checks.require(
            last.pcs() >= 0.99,
            format!("rrt(1/sqrt(n)) at n=1e4: PCS {:.4} >= 0.99", last.pcs()),
        );
        for pair in series.windows(2) {
            let slack = pair[0].ci_halfwidth() + pair[1].ci_halfwidth();
            checks.require(
                pair[1].pcs() >= pair[0].pcs() - slack,
                format!(
                    "rrt(1/sqrt(n)) nondecreasing: PCS {:.4} (n={}) -> {:.4} (n={})",
                    pair[0].pcs(),
                    pair[0].point.n,
                    pair[1].pcs(),
                    pair[1].point.n
                ),
            );
        }
        let fixed = run
            .summary
            .cells
            .iter()
            .filter(|c| c.selector == "rrt(0.1)")
            .last()
            .unwrap();
        checks.require(
            fixed.pcs() >= 0.9,
            format!("rrt(0.1) at n=1e4: PCS {:.4} >= 1 - alpha = 0.9", fixed.pcs()),
        );
        let budget = match self.level {
            Level::Quick => Duration::from_secs(60),
            Level::Full => Duration::from_secs(600),
        };
        checks.require(
            run.elapsed < budget,
            format!(
                "fig3b-left runtime {:.1}s < {:.0}s",
                run.elapsed.as_secs_f64(),
                budget.as_secs_f64()
            ),
        );
        checks.finish(5, "large-sample consistency", started)
    }

    // Criterion 6: distributional checks. Noise-only ratios follow the
    // Beta law order by order; the ratio at the true order shrinks with
    // SNR.
    fn c6_distributional(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let (n, p) = (30usize, 20usize);
        let trials = self.level.trials();
        let seed = derive_seed(self.seed, "distributional");
        let samples: Vec<Vec<f64>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let x = gen_design(n, p, DesignModel::GaussianUnitCols, seed, Some(t)).unwrap();
                let mut wrng = stream_rng(seed, StreamDomain::Noise, t);
                let y = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut wrng));
                residual_profile_of(&x, &y).unwrap().ratios
            })
            .collect();
        let critical = 1.63 / (trials as f64).sqrt();
        let mut worst = (0.0_f64, 0usize);
        let mut all_ok = true;
        for k in 1..=p {
            let mut col: Vec<f64> = samples.iter().map(|r| r[k - 1]).collect();
            col.sort_by(|a, b| a.total_cmp(b));
            let params = BetaParams::residual_ratio(n, k).unwrap();
            let d = crate::simulate::ks_statistic(&col, |x| {
                beta_cdf(params, x.clamp(0.0, 1.0)).unwrap()
            });
            all_ok &= d < critical;
            if d > worst.0 {
                worst = (d, k);
            }
        }
        checks.require(
            all_ok,
            format!(
                "noise-only ratios: {p} per-order KS tests below {critical:.4} (worst {:.4} at k={})",
                worst.0, worst.1
            ),
        );
        // Ratio at the true order shrinks as noise fades.
        let coef = CoefModel { kind: CoefKind::Dense, k0: 5 };
        let x = gen_design(n, p, DesignModel::GaussianOneOverN, seed, None).unwrap();
        let median_at = |snr_db: f64| -> f64 {
            let mut vals: Vec<f64> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let prob =
                        gen_problem_with_design(&x, &coef, NoiseSpec::SnrDb(snr_db), seed, t)
                            .unwrap();
                    residual_profile(&prob).unwrap().ratios[4]
                })
                .collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            0.5 * (vals[trials / 2] + vals[(trials - 1) / 2])
        };
        let lo = median_at(20.0);
        let hi = median_at(0.0);
        checks.require(
            lo < hi,
            format!("median ratio at true order: {lo:.4} at 20 dB < {hi:.4} at 0 dB"),
        );
        checks.finish(6, "distributional suite", started)
    }

    // Criterion 7: the independent oracles agree with the fast paths.
    fn c7_oracle_equivalence(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let seed = derive_seed(self.seed, "oracle");
        let (n, p) = (50usize, 30usize);
        let worst = (0..100u64)
            .into_par_iter()
            .map(|t| {
                let x = gen_design(n, p, DesignModel::GaussianUnitCols, seed, Some(t)).unwrap();
                let mut wrng = stream_rng(seed, StreamDomain::Noise, t);
                let y = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut wrng));
                let prof = residual_profile_of(&x, &y).unwrap();
                let mut worst = 0.0_f64;
                for k in 1..=p {
                    let oracle = projector_oracle(&x, k, &y).unwrap();
                    let rel = (prof.sq_norms[k] - oracle).abs() / oracle.max(1e-300);
                    worst = worst.max(rel);
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        checks.require(
            worst <= 1e-8,
            format!("projection oracle, 100 instances (n=50, p=30): worst relative gap {worst:.2e} <= 1e-8"),
        );
        // Quantile round trip over a 1000-point (a, q) grid. The largest
        // shape keeps q below the region where the CDF slope exceeds the
        // tolerance per ulp (no f64 can round-trip tighter there).
        let a_grid = [0.5, 1.0, 2.5, 5.0, 9.5, 14.5, 50.0];
        let mut worst_rt = 0.0_f64;
        for &a in &a_grid {
            let params = BetaParams::new(a, 0.5).unwrap();
            for i in 1..=125 {
                let q = i as f64 / 126.0;
                let x = beta_inv_cdf(params, q).unwrap();
                let back = beta_cdf(params, x).unwrap();
                worst_rt = worst_rt.max((back - q).abs());
            }
        }
        let big = BetaParams::new(450.5, 0.5).unwrap();
        for i in 1..=125 {
            let q = i as f64 / 132.0;
            let x = beta_inv_cdf(big, q).unwrap();
            let back = beta_cdf(big, x).unwrap();
            worst_rt = worst_rt.max((back - q).abs());
        }
        checks.require(
            worst_rt <= 1e-12,
            format!("quantile round trip on 1000-point grid: worst |F(F^-1(q)) - q| = {worst_rt:.2e}"),
        );
        // Closed forms: arcsine quantile, a = 1 tail, and symmetry.
        let arcsine = BetaParams::new(0.5, 0.5).unwrap();
        let mut worst_id = 0.0_f64;
        for i in 1..50 {
            let q = i as f64 / 50.0;
            let want = (std::f64::consts::PI * q / 2.0).sin().powi(2);
            worst_id = worst_id.max((beta_inv_cdf(arcsine, q).unwrap() - want).abs());
        }
        let p1 = BetaParams::new(1.0, 0.5).unwrap();
        worst_id = worst_id.max((beta_cdf(p1, 0.75).unwrap() - 0.5).abs());
        worst_id = worst_id.max((beta_inv_cdf(p1, 0.5).unwrap() - 0.75).abs());
        for a in [0.5, 2.0, 7.5] {
            let sym = BetaParams::new(a, a).unwrap();
            worst_id = worst_id.max((beta_cdf(sym, 0.5).unwrap() - 0.5).abs());
        }
        checks.require(
            worst_id <= 1e-12,
            format!("analytic identities: worst deviation {worst_id:.2e} <= 1e-12"),
        );
        checks.finish(7, "oracle equivalence", started)
    }

    // Criterion 8: figure-level relative performance.
    fn c8_relative_performance(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let run = self.regime("fig4d");
        for snr in run
            .spec
            .grid
            .iter()
            .map(|pt| pt.snr_db)
            .filter(|&s| s >= 0.0)
        {
            let pcs_of = |sel: &str| {
                run.summary
                    .cells
                    .iter()
                    .find(|c| c.point.snr_db == snr && c.selector == sel)
                    .unwrap()
                    .pcs()
            };
            let rrt = pcs_of("rrt(0.1)");
            let best = pcs_of("aic").max(pcs_of("bic"));
            checks.require(
                rrt - best >= 0.05,
                format!("fig4d at {snr} dB: rrt(0.1) {rrt:.3} beats aic/bic {best:.3} by >= 0.05"),
            );
        }
        for name in ["fig5a", "fig5b", "fig5c", "fig5d"] {
            let run = self.regime(name);
            let mut all_ok = true;
            let mut tightest: Option<(f64, String)> = None;
            for pt in &run.spec.grid {
                let cell_of = |sel: &str| {
                    run.summary
                        .cells
                        .iter()
                        .find(|c| c.point.snr_db == pt.snr_db && c.selector == sel)
                        .unwrap()
                };
                let rrt = cell_of("rrt(0.1)");
                let best = ["aic", "bic", "hsc"]
                    .iter()
                    .map(|s| cell_of(s))
                    .max_by(|a, b| a.pcs().total_cmp(&b.pcs()))
                    .unwrap();
                let ci = rrt.ci_halfwidth().max(best.ci_halfwidth());
                let margin = rrt.pcs() - (best.pcs() - ci);
                all_ok &= margin >= 0.0;
                if tightest.as_ref().map_or(true, |(m, _)| margin < *m) {
                    tightest = Some((
                        margin,
                        format!(
                            "{name} at {} dB: rrt(0.1) {:.3} vs best {} {:.3} (ci {ci:.3})",
                            pt.snr_db,
                            rrt.pcs(),
                            best.selector,
                            best.pcs()
                        ),
                    ));
                }
            }
            let (_, detail) = tightest.unwrap();
            checks.require(all_ok, format!("sparse comparison, tightest point: {detail}"));
        }
        checks.finish(8, "relative performance", started)
    }

    // Criterion 9: identical summaries across worker counts and reruns.
    fn c9_determinism(&self) -> CriterionResult {
        let started = Instant::now();
        let mut checks = Checks::new();
        let mut spec = match builtin_regime("fig3a") {
            Some(BuiltinRegime::Selection(spec)) => spec,
            _ => unreachable!(),
        };
        spec.trials = self.level.trials().min(2_000);
        spec.seed = 7;
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec))
            .unwrap();
        let eight = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run_experiment(&spec))
            .unwrap();
        let rerun = run_experiment(&spec).unwrap();
        checks.require(
            single == eight,
            "summaries identical with 1 and 8 workers".into(),
        );
        checks.require(single == rerun, "summaries identical across reruns".into());
        checks.finish(9, "determinism across workers and reruns", started)
    }
}

/// Convenience entry point used by tests and the command line.
pub fn run_validation(level: Level, seed: u64) -> Vec<CriterionResult> {
    Validator::new(level, seed).run_all()
}

// Re-exported for the noiseless shortcut used in examples and tests.
#[allow(dead_code)]
fn noiseless_selects_truth(n: usize, p: usize, k0: usize, seed: u64) -> Result<bool> {
    let coef = CoefModel { kind: CoefKind::Dense, k0 };
    let x = gen_design(n, p, DesignModel::GaussianUnitCols, seed, Some(0))?;
    let prob = gen_problem_with_design(&x, &coef, NoiseSpec::Sigma2(0.0), seed, 0)?;
    let prof = residual_profile(&prob)?;
    let table = ThresholdTable::new(n, p, 0.1)?;
    let grid = FallbackGrid::new(n, p, 0.1, DEFAULT_FALLBACK_GRID)?;
    Ok(rrt_select_with_grid(&prof.ratios, &table, &grid).k_hat == k0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_results_report_once_each() {
        // Structure only; the full run lives in the acceptance suite.
        let v = Validator::new(Level::Quick, DEFAULT_VALIDATION_SEED);
        let r = v.criterion(4);
        assert_eq!(r.id, 4);
        assert!(!r.details.is_empty());
        assert!(r.pass, "{:?}", r.details);
    }

    #[test]
    fn noiseless_shortcut() {
        assert!(noiseless_selects_truth(20, 10, 3, 5).unwrap());
    }
}
