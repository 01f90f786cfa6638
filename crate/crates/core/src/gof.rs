//! Goodness-of-fit tests of `H₀`: the prior is a single Gaussian
//! `N(a, c²)`, i.e. `H = δ_a`.
//!
//! The split likelihood ratio test fits the NPMLE on one half of the data
//! and compares it on the other half with the Gaussian fitted there, both
//! ways round. It is valid at any sample size. The GLRT compares the
//! full-sample NPMLE with the Gaussian MLE and is calibrated by a parametric
//! bootstrap from the fitted Gaussian.
//!
//! All likelihood ratios are kept in the log domain.

use alloc::vec::Vec;

use crate::identify::Split;
use crate::math;
use crate::npmle::{self, FitOptions};
use crate::rng;
use crate::{DiscreteMixture, Error, Result, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Reject,
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Slr,
    GlrtBootstrap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    /// `ln W_n` for the SLR test, `Λ_n` for the GLRT.
    pub statistic: f64,
    pub decision: Decision,
    pub beta: f64,
    pub method: Method,
    /// Bootstrap p-value, `None` for the SLR test and for GLRT runs that
    /// stopped once the decision was settled.
    pub p_value: Option<f64>,
    pub seed: u64,
    pub split: Option<Split>,
    /// Bootstrap statistics computed.
    pub bootstrap_draws: usize,
}

fn check_level(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "beta", value: beta })
    }
}

/// Gaussian MLE of the prior mean: the precision-weighted mean.
pub fn null_mean(sample: &Sample, c: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, s) in sample.iter() {
        let p = 1.0 / (c * c + s * s);
        num += p * x;
        den += p;
    }
    num / den
}

/// Log-likelihood of `sample` under `θ ~ N(a, c²)`.
fn null_log_likelihood(sample: &Sample, c: f64, a: f64) -> f64 {
    sample.iter().map(|(x, s)| math::normal_ln_pdf(x - a, math::sqrt(c * c + s * s))).sum()
}

/// Split likelihood ratio test. `ln W_n` is compared with `ln(1/β)`.
pub fn slr_gof_test(sample: &Sample, c: f64, beta: f64, split: Split, fit: &FitOptions) -> Result<TestReport> {
    check_level(beta)?;
    let n = sample.len();
    if n < 4 {
        return Err(Error::SplitTooSmall { n });
    }
    let (ia, ib) = split.halves(n);
    let halves = [sample.select(&ia), sample.select(&ib)];
    let alt = [npmle::solve_npmle(&halves[0], c, fit)?.mixture, npmle::solve_npmle(&halves[1], c, fit)?.mixture];
    let log_u = |eval: usize| -> Result<f64> {
        let d = &halves[eval];
        let a = null_mean(d, c);
        Ok(npmle::log_likelihood(&alt[1 - eval], c, d)? - null_log_likelihood(d, c, a))
    };
    let log_w = math::log_add_exp(log_u(0)?, log_u(1)?) - core::f64::consts::LN_2;
    let reject = log_w > math::ln(1.0 / beta);
    let seed = match split {
        Split::Random { seed } => seed,
        Split::EvenOdd => 0,
    };
    Ok(TestReport {
        statistic: log_w,
        decision: if reject { Decision::Reject } else { Decision::Retain },
        beta,
        method: Method::Slr,
        p_value: None,
        seed,
        split: Some(split),
        bootstrap_draws: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlrtOptions {
    pub bootstrap: usize,
    /// Fit options for the observed and the bootstrap statistics.
    pub fit: FitOptions,
    /// Stop drawing once the decision can no longer change. The p-value is
    /// then not reported.
    pub stop_when_decided: bool,
}

impl GlrtOptions {
    pub const MIN_BOOTSTRAP: usize = 19;
    pub const GRID_SIZE: usize = 150;
}

impl Default for GlrtOptions {
    fn default() -> Self {
        Self {
            bootstrap: 100,
            fit: FitOptions { grid_size: Some(Self::GRID_SIZE), ..FitOptions::default() },
            stop_when_decided: false,
        }
    }
}

/// `Λ_n = ℓ(Ĥ) − ℓ(δ_â)`, with `â` added to the NPMLE grid so the null is
/// nested and `Λ_n ≥ 0`.
pub fn glrt_statistic(sample: &Sample, c: f64, fit: &FitOptions) -> Result<f64> {
    let a = null_mean(sample, c);
    let null = null_log_likelihood(sample, c, a);
    let grid = npmle::build_grid(sample, c, fit)?.with_point(a)?;
    let f = npmle::solve_npmle_on_grid(sample, c, grid, fit)?;
    let point = npmle::log_likelihood(&DiscreteMixture::point_mass(a), c, sample)?;
    Ok((f.log_likelihood.max(point) - null).max(0.0))
}

/// Whether `Λ_n ≥ lambda`, stopping the fit once the answer is certain.
pub fn glrt_statistic_reaches(sample: &Sample, c: f64, fit: &FitOptions, lambda: f64) -> Result<bool> {
    let a = null_mean(sample, c);
    let null = null_log_likelihood(sample, c, a);
    let level = null + lambda;
    if npmle::log_likelihood(&DiscreteMixture::point_mass(a), c, sample)? >= level {
        return Ok(true);
    }
    let grid = npmle::build_grid(sample, c, fit)?.with_point(a)?;
    npmle::npmle_reaches(sample, c, grid, fit, level)
}

/// GLRT calibrated by a parametric bootstrap from `N(â, c² + σ_i²)`.
/// `p = (1 + #{Λ* ≥ Λ_n}) / (B + 1)`; rejects when `p < β`.
pub fn glrt_bootstrap_test(sample: &Sample, c: f64, beta: f64, seed: u64, opts: &GlrtOptions) -> Result<TestReport> {
    check_level(beta)?;
    let b = opts.bootstrap;
    if b < GlrtOptions::MIN_BOOTSTRAP {
        return Err(Error::BudgetTooSmall { required: GlrtOptions::MIN_BOOTSTRAP, got: b });
    }
    sample.require_nonempty()?;
    let lambda = glrt_statistic(sample, c, &opts.fit)?;
    let a = null_mean(sample, c);
    let sds: Vec<f64> = sample.sigma().iter().map(|s| math::sqrt(c * c + s * s)).collect();
    // Rejection needs 1 + exceed < β(B + 1).
    let max_exceed_to_reject = math::ceil(beta * (b + 1) as f64 - 1.0 - 1e-12).max(0.0) as usize;
    let mut exceed = 0usize;
    let mut draws = 0usize;
    for k in 0..b {
        let mut r = rng::stream(seed, k as u64);
        let x: Vec<f64> = sds.iter().map(|&s| a + s * rng::std_normal(&mut r)).collect();
        let boot = Sample::new(x, sample.sigma().to_vec())?;
        draws += 1;
        if glrt_statistic_reaches(&boot, c, &opts.fit, lambda)? {
            exceed += 1;
        }
        if opts.stop_when_decided && exceed >= max_exceed_to_reject {
            break;
        }
    }
    let complete = draws == b;
    let p = (1 + exceed) as f64 / (b + 1) as f64;
    let reject = complete && p < beta;
    Ok(TestReport {
        statistic: lambda,
        decision: if reject { Decision::Reject } else { Decision::Retain },
        beta,
        method: Method::GlrtBootstrap,
        p_value: complete.then_some(p),
        seed,
        split: None,
        bootstrap_draws: draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{std_normal, stream, uniform};

    fn null_sample(n: usize, seed: u64) -> Sample {
        let mut r = stream(seed, 0);
        Sample::homoscedastic((0..n).map(|_| 0.5 + std_normal(&mut r) * 2f64.sqrt()).collect()).unwrap()
    }

    #[test]
    fn guards() {
        let s = Sample::homoscedastic(vec![0.0, 1.0, 2.0]).unwrap();
        let f = FitOptions::default();
        assert!(matches!(slr_gof_test(&s, 1.0, 0.05, Split::EvenOdd, &f), Err(Error::SplitTooSmall { n: 3 })));
        let o = GlrtOptions { bootstrap: 18, ..Default::default() };
        assert!(matches!(glrt_bootstrap_test(&s, 1.0, 0.05, 1, &o), Err(Error::BudgetTooSmall { .. })));
    }

    #[test]
    fn glrt_statistic_nonnegative() {
        for seed in 0..5 {
            let s = null_sample(200, seed);
            assert!(glrt_statistic(&s, 1.0, &GlrtOptions::default().fit).unwrap() >= 0.0);
        }
    }

    #[test]
    fn certified_comparison_matches_full_fit() {
        let fit = GlrtOptions::default().fit;
        for seed in 0..4 {
            let s = null_sample(300, 20 + seed);
            let lam = glrt_statistic(&s, 1.0, &fit).unwrap();
            for level in [0.0, 0.5 * lam, lam - 0.05, lam + 0.05, lam + 1.0, lam + 5.0] {
                let want = lam >= level;
                assert_eq!(
                    glrt_statistic_reaches(&s, 1.0, &fit, level).unwrap(),
                    want,
                    "seed {seed} level {level} lam {lam}"
                );
            }
        }
    }

    #[test]
    fn precision_weighted_null_mean() {
        let s = Sample::new(vec![0.0, 3.0], vec![1.0, 2.0]).unwrap();
        // Weights 1/(1+1) and 1/(1+4).
        assert!((null_mean(&s, 1.0) - (3.0 * 0.2) / 0.7).abs() < 1e-15);
    }

    #[test]
    fn slr_report_fields_and_determinism() {
        let s = null_sample(300, 9);
        let f = FitOptions::default();
        let a = slr_gof_test(&s, 1.0, 0.05, Split::Random { seed: 4 }, &f).unwrap();
        let b = slr_gof_test(&s, 1.0, 0.05, Split::Random { seed: 4 }, &f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, Method::Slr);
        assert_eq!(a.seed, 4);
        assert_eq!(a.decision, Decision::Retain);
    }

    #[test]
    fn glrt_p_value_range_and_early_stop_agrees() {
        let mut r = stream(3, 0);
        // Well separated alternative: atoms at ±2.
        let x: Vec<f64> = (0..300)
            .map(|_| if uniform(&mut r) < 0.5 { -2.0 } else { 2.0 } + std_normal(&mut r) * 2f64.sqrt())
            .collect();
        let alt = Sample::homoscedastic(x).unwrap();
        let null = null_sample(300, 5);
        for s in [&alt, &null] {
            let full = GlrtOptions { bootstrap: 39, ..Default::default() };
            let rep = glrt_bootstrap_test(s, 1.0, 0.05, 7, &full).unwrap();
            let p = rep.p_value.unwrap();
            assert!((1.0 / 40.0..=1.0).contains(&p));
            let quick = GlrtOptions { stop_when_decided: true, ..full };
            let early = glrt_bootstrap_test(s, 1.0, 0.05, 7, &quick).unwrap();
            assert_eq!(rep.decision, early.decision);
        }
        let rep =
            glrt_bootstrap_test(&alt, 1.0, 0.05, 7, &GlrtOptions { bootstrap: 39, ..Default::default() }).unwrap();
        assert_eq!(rep.decision, Decision::Reject);
    }
}
