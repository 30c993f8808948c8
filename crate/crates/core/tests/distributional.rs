//! Distributional checks: the ratio chain beyond the true order follows
//! its Beta law, the reference samplers match their targets, and the
//! smallest Gram eigenvalue of a variance-1/n design concentrates where
//! random matrix theory says it should.

use mos_core::linreg::residual_profile;
use mos_core::simulate::{
    gen_design, gen_problem, ks_statistic, sample_beta_rv, stream_rng, CoefKind, CoefModel,
    DesignModel, NoiseSpec, StreamDomain,
};
use mos_core::specfun::{beta_cdf, BetaParams};
use ndarray::Array2;
use rayon::prelude::*;

const SEED: u64 = 0xd15c;

fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[test]
fn ratio_chain_beyond_true_order_is_beta() {
    // Problems with known k0 = 3: each RR(k), k > k0, passes a marginal
    // KS test against Beta((n-k)/2, 1/2) at level 0.01.
    let (n, p, k0) = (20usize, 10usize, 3usize);
    let trials = 10_000usize;
    let coef = CoefModel { kind: CoefKind::Dense, k0 };
    let ratios: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let prob = gen_problem(
                n,
                p,
                DesignModel::GaussianUnitCols,
                &coef,
                NoiseSpec::SnrDb(10.0),
                SEED,
                t,
            )
            .unwrap();
            residual_profile(&prob).unwrap().ratios
        })
        .collect();
    for k in (k0 + 1)..=p {
        let mut col: Vec<f64> = ratios.iter().map(|r| r[k - 1]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        let params = BetaParams::residual_ratio(n, k).unwrap();
        let d = ks_statistic(&col, |x| beta_cdf(params, x.clamp(0.0, 1.0)).unwrap());
        assert!(
            d < ks_critical(trials),
            "k={k}: KS statistic {d:.4} above critical {:.4}",
            ks_critical(trials)
        );
    }
}

#[test]
fn beta_sampler_matches_arcsine_law() {
    let mut rng = stream_rng(SEED, StreamDomain::Noise, 1);
    let params = BetaParams::new(0.5, 0.5).unwrap();
    let mut samples: Vec<f64> = (0..10_000).map(|_| sample_beta_rv(params, &mut rng)).collect();
    samples.sort_by(|a, b| a.total_cmp(b));
    let arcsine = |x: f64| (2.0 / std::f64::consts::PI) * x.clamp(0.0, 1.0).sqrt().asin();
    let d = ks_statistic(&samples, arcsine);
    assert!(d < ks_critical(10_000), "KS statistic {d:.4}");
}

#[test]
fn ks_meta_simulation_holds_its_level() {
    // Samples genuinely drawn from the reference law stay below the
    // 1%-level critical value in at least 95% of meta-trials.
    let n = 10_000usize;
    let meta = 100usize;
    let passes = (0..meta as u64)
        .into_par_iter()
        .filter(|&m| {
            let mut rng = stream_rng(SEED, StreamDomain::Noise, 1_000 + m);
            let mut samples: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            samples.sort_by(|a, b| a.total_cmp(b));
            ks_statistic(&samples, |x| x.clamp(0.0, 1.0)) < ks_critical(n)
        })
        .count();
    assert!(passes >= 95, "only {passes}/{meta} meta-trials passed");
}

#[test]
fn smallest_gram_eigenvalue_concentrates() {
    // Variance-1/n entries, k0 = 0.2 n: the smallest eigenvalue of the
    // leading Gram block approaches (1 - sqrt(0.2))^2.
    let n = 2_000usize;
    let k0 = 400usize;
    let draws = 100usize;
    let limit = (1.0 - 0.2_f64.sqrt()).powi(2);
    let mut lambdas: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let x = gen_design(n, k0 + 1, DesignModel::GaussianOneOverN, SEED, Some(t)).unwrap();
            let cols: Vec<Vec<f64>> = (0..k0)
                .map(|j| x.column(j).iter().copied().collect())
                .collect();
            let mut gram = Array2::zeros((k0, k0));
            for i in 0..k0 {
                for j in i..k0 {
                    let v: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                    gram[(i, j)] = v;
                    gram[(j, i)] = v;
                }
            }
            smallest_eigenvalue(&gram)
        })
        .collect();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (lambdas[draws / 2] + lambdas[(draws - 1) / 2]);
    assert!(
        (median - limit).abs() <= 0.1 * limit,
        "median {median:.4} vs limit {limit:.4}"
    );
}

// Smallest eigenvalue of a symmetric positive definite matrix by
// bisection on the shift: G - t I is positive definite iff t < lambda_min,
// decided by attempting a Cholesky factorization.
fn smallest_eigenvalue(g: &Array2<f64>) -> f64 {
    let k = g.nrows();
    let cholesky_ok = |t: f64| -> bool {
        let mut m = g.clone();
        for i in 0..k {
            m[(i, i)] -= t;
        }
        let mut l = vec![0.0_f64; k * k];
        for i in 0..k {
            for j in 0..=i {
                let mut sum = m[(i, j)];
                for r in 0..j {
                    sum -= l[i * k + r] * l[j * k + r];
                }
                if i == j {
                    if sum <= 0.0 {
                        return false;
                    }
                    l[i * k + i] = sum.sqrt();
                } else {
                    l[i * k + j] = sum / l[j * k + j];
                }
            }
        }
        true
    };
    let mut lo = 0.0_f64;
    let mut hi = 4.0_f64;
    if !cholesky_ok(lo) {
        return 0.0;
    }
    for _ in 0..25 {
        let mid = 0.5 * (lo + hi);
        if cholesky_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
