//! Synthetic problem generators and reference samplers.
//!
//! # Randomness contract
//!
//! Every generator is a pure function of `(seed, trial)`. The generator is
//! ChaCha8 (`rand_chacha::ChaCha8Rng`). Independent randomness domains
//! (design entries, coefficient signs, noise) use independent ChaCha
//! instances keyed as
//!
//! ```text
//! rng(seed, domain, trial) = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain_tag))
//!                            with stream = trial
//! ```
//!
//! so regenerating any trial reproduces it bit for bit, trials can be
//! produced concurrently in any order, and redrawing one domain (say,
//! noise under a fixed design) never perturbs another. A fixed design
//! shared by all trials uses the reserved trial index `u64::MAX`.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaSampler, ChiSquared, Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linreg::{orthonormal_columns, RegressionProblem, Truth};
use crate::specfun::BetaParams;

/// Randomness domains drawn from independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    Design,
    Coefficients,
    Noise,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Design => 0x7d31_6e00,
            StreamDomain::Coefficients => 0xc0ef_0001,
            StreamDomain::Noise => 0x0015_e002,
        }
    }
}

/// Trial index reserved for a design shared across all trials.
pub const FIXED_DESIGN_TRIAL: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The documented stream-splitting rule; see the module docs.
pub fn stream_rng(seed: u64, domain: StreamDomain, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain.tag()));
    rng.set_stream(trial);
    rng
}

/// How the design matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignModel {
    /// I.i.d. standard normal entries, columns then normalized to unit
    /// Euclidean norm.
    GaussianUnitCols,
    /// I.i.d. normal entries with variance `1/n`.
    GaussianOneOverN,
    /// Random orthonormal `p`-frame (Gaussian matrix orthonormalized).
    Orthonormal,
}

/// Support pattern of the coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefKind {
    /// `beta_k = +/-1` for every `k <= k0`.
    Dense,
    /// `beta_k = +/-1` on `{1, 6, 11, ...} ∩ [1, k0]` together with `k0`,
    /// zero elsewhere.
    Sparse,
}

/// Coefficient model: support pattern plus the true order. Signs are
/// drawn equiprobably per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoefModel {
    pub kind: CoefKind,
    pub k0: usize,
}

impl CoefModel {
    /// Nonzero indices (1-based) of the coefficient vector.
    pub fn support(&self) -> Vec<usize> {
        match self.kind {
            CoefKind::Dense => (1..=self.k0).collect(),
            CoefKind::Sparse => {
                let mut s: Vec<usize> = (1..=self.k0).step_by(5).collect();
                if *s.last().unwrap() != self.k0 {
                    s.push(self.k0);
                }
                s
            }
        }
    }
}

/// Noise scale, either directly or through a target SNR in decibels
/// realized per instance as `sigma2 = ||X beta||^2 / (n 10^(db/10))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    SnrDb(f64),
    Sigma2(f64),
}

/// Draws a design matrix. `trial = None` selects the reserved
/// fixed-design stream shared by all trials of an experiment.
pub fn gen_design(
    n: usize,
    p: usize,
    model: DesignModel,
    seed: u64,
    trial: Option<u64>,
) -> Result<Array2<f64>> {
    if p < 1 || n <= p {
        return Err(Error::Domain(format!(
            "design requires n > p >= 1, got n={n}, p={p}"
        )));
    }
    let mut rng = stream_rng(
        seed,
        StreamDomain::Design,
        trial.unwrap_or(FIXED_DESIGN_TRIAL),
    );
    let mut x = Array2::from_shape_fn((n, p), |_| -> f64 { StandardNormal.sample(&mut rng) });
    match model {
        DesignModel::GaussianUnitCols => {
            for mut col in x.columns_mut() {
                let norm = col.dot(&col).sqrt();
                col.mapv_inplace(|v| v / norm);
            }
        }
        DesignModel::GaussianOneOverN => {
            let scale = 1.0 / (n as f64).sqrt();
            x.mapv_inplace(|v| v * scale);
        }
        DesignModel::Orthonormal => {
            let basis = orthonormal_columns(&x)?;
            for (j, q) in basis.iter().enumerate() {
                for (i, &v) in q.iter().enumerate() {
                    x[(i, j)] = v;
                }
            }
        }
    }
    Ok(x)
}

/// Draws the coefficient vector for one trial: the model's support with
/// equiprobable `+/-1` signs.
pub fn gen_coefficients(p: usize, coef: &CoefModel, seed: u64, trial: u64) -> Result<Array1<f64>> {
    if coef.k0 < 1 || coef.k0 > p {
        return Err(Error::Domain(format!(
            "coefficient model requires 1 <= k0 <= p, got k0={}, p={p}",
            coef.k0
        )));
    }
    let mut rng = stream_rng(seed, StreamDomain::Coefficients, trial);
    let mut beta = Array1::zeros(p);
    for idx in coef.support() {
        let sign: bool = rng.random();
        beta[idx - 1] = if sign { 1.0 } else { -1.0 };
    }
    Ok(beta)
}

use rand::Rng as _;

/// Generates one synthetic problem, drawing a fresh design for this trial.
/// Deterministic in `(seed, trial)`; ground truth is attached.
pub fn gen_problem(
    n: usize,
    p: usize,
    design: DesignModel,
    coef: &CoefModel,
    noise: NoiseSpec,
    seed: u64,
    trial: u64,
) -> Result<RegressionProblem> {
    let x = gen_design(n, p, design, seed, Some(trial))?;
    gen_problem_with_design(&x, coef, noise, seed, trial)
}

/// Generates one problem on a caller-supplied design (used for the
/// fixed-design regimes, where only coefficients and noise are redrawn).
pub fn gen_problem_with_design(
    x: &Array2<f64>,
    coef: &CoefModel,
    noise: NoiseSpec,
    seed: u64,
    trial: u64,
) -> Result<RegressionProblem> {
    let (n, p) = x.dim();
    let beta = gen_coefficients(p, coef, seed, trial)?;
    let signal = x.dot(&beta);
    let sigma2 = match noise {
        NoiseSpec::Sigma2(s) => {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Domain(format!(
                    "noise variance must be finite and nonnegative, got {s}"
                )));
            }
            s
        }
        NoiseSpec::SnrDb(db) => {
            let signal_energy = signal.dot(&signal);
            signal_energy / (n as f64 * 10f64.powf(db / 10.0))
        }
    };
    let mut wrng = stream_rng(seed, StreamDomain::Noise, trial);
    let sigma = sigma2.sqrt();
    let y = Array1::from_shape_fn(n, |i| {
        let w: f64 = StandardNormal.sample(&mut wrng);
        signal[i] + sigma * w
    });
    RegressionProblem::new(
        x.clone(),
        y,
        Some(Truth {
            beta,
            k0: coef.k0,
            sigma2,
        }),
    )
}

/// Reference Beta sampler for distributional tests.
pub fn sample_beta_rv<R: rand::Rng + ?Sized>(params: BetaParams, rng: &mut R) -> f64 {
    BetaSampler::new(params.a, params.b)
        .expect("valid beta parameters")
        .sample(rng)
}

/// Reference chi-square sampler, central (`noncentrality = 0`) or
/// noncentral via `(Z + sqrt(lambda))^2 + chi2_{dof-1}`.
pub fn sample_chi2<R: rand::Rng + ?Sized>(dof: usize, noncentrality: f64, rng: &mut R) -> f64 {
    assert!(dof >= 1, "chi-square needs at least one degree of freedom");
    assert!(
        noncentrality >= 0.0,
        "noncentrality must be nonnegative, got {noncentrality}"
    );
    if noncentrality == 0.0 {
        return ChiSquared::new(dof as f64)
            .expect("valid dof")
            .sample(rng);
    }
    let z: f64 = Normal::new(noncentrality.sqrt(), 1.0)
        .expect("valid normal")
        .sample(rng);
    let rest = if dof > 1 {
        ChiSquared::new((dof - 1) as f64)
            .expect("valid dof")
            .sample(rng)
    } else {
        0.0
    };
    z * z + rest
}

/// Two-sided Kolmogorov-Smirnov statistic between a nondecreasing sample
/// vector and a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    assert!(!sorted.is_empty(), "ks_statistic needs samples");
    debug_assert!(
        sorted.windows(2).all(|w| w[0] <= w[1]),
        "samples must be sorted"
    );
    let n = sorted.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max(((i + 1) as f64 / n - f).abs());
        sup = sup.max((f - i as f64 / n).abs());
    }
    sup
}
