//! Marginal coverage sets with a constant posterior-density threshold, HPD
//! sets, and Monte Carlo evaluation of set-valued rules.
//!
//! The optimal marginal rule is `I(x) = {θ : π(θ | x) ≥ k}` with one
//! threshold `k` for all `x`, chosen so that `P(θ ∈ I(X)) = 1 − β` under the
//! joint law of `(θ, X)`. With a fitted model the joint law is simulated and
//! `k̂` is the largest threshold that keeps at least `(1 − β)B` of the
//! simulated pairs inside their sets.

use alloc::vec::Vec;

use crate::math;
use crate::model::{IntervalUnion, Sample, SmoothModel};
use crate::npmle::ln_mixture_density;
use crate::posterior::PosteriorAt;
use crate::quad;
use crate::rng::{self, PriorSampler, StreamRng, ThetaSource};
use crate::{Error, Result};

/// Default Monte Carlo budget for calibration.
pub const DEFAULT_MC_SIZE: usize = 100_000;
/// Smallest budget accepted by [`evaluate_rule`].
pub const MIN_EVAL_SIZE: usize = 1000;
/// Posterior draws per observation in the length estimator of
/// [`evaluate_threshold_rule`].
const LENGTH_DRAWS: usize = 4;

/// Smallest calibration budget for level `beta`, `⌈10/β⌉`.
pub fn min_budget(beta: f64) -> usize {
    math::ceil(10.0 / beta) as usize
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "beta", value: beta })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma { index: 0, value: sigma })
    }
}

/// `π(θ | x)` evaluated as `φ_σ(x − θ) g(θ) / f(x)` in the log domain,
/// without building the posterior mixture.
pub fn posterior_value(model: &SmoothModel, sigma: f64, x: f64, theta: f64) -> f64 {
    let ln = math::normal_ln_pdf(x - theta, sigma) + ln_mixture_density(&model.base, model.c(), theta)
        - ln_mixture_density(&model.base, model.sigma_star(sigma), x);
    math::exp(ln)
}

/// `B` pairs `(θ̃, X̃)` with `θ̃ ~ H ⋆ N(0, c²)` and `X̃ | θ̃ ~ N(θ̃, σ²)`.
pub fn simulate_joint(model: &SmoothModel, sigma: f64, b: usize, seed: u64) -> Vec<(f64, f64)> {
    let prior = PriorSampler::new(model);
    let mut out = Vec::with_capacity(b);
    rng::for_each_draw(seed, b, |r, _| {
        let theta = prior.sample(r);
        out.push((theta, theta + sigma * rng::std_normal(r)));
    });
    out
}

/// Index (0-based, ascending order) of the calibrated threshold among `b`
/// sorted posterior values: the largest `k` with `#{v ≥ k} ≥ (1 − β)b`.
pub fn threshold_rank(b: usize, beta: f64) -> usize {
    let keep = math::ceil((1.0 - beta) * b as f64 - 1e-9) as usize;
    b - keep.clamp(1, b)
}

/// A constant-threshold coverage rule `x ↦ {θ : π(θ | x) ≥ k̂}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRule {
    pub model: SmoothModel,
    pub sigma: f64,
    pub k_hat: f64,
    pub beta: f64,
    pub mc_size: usize,
    pub seed: u64,
}

/// Calibrates `k̂` by simulating `B` pairs from the model's own joint law.
pub fn calibrate_threshold(model: &SmoothModel, sigma: f64, beta: f64, b: usize, seed: u64) -> Result<CoverageRule> {
    model.require_smooth()?;
    check_beta(beta)?;
    check_sigma(sigma)?;
    let required = min_budget(beta);
    if b < required {
        return Err(Error::BudgetTooSmall { required, got: b });
    }
    let prior = PriorSampler::new(model);
    let mut values = Vec::with_capacity(b);
    rng::for_each_draw(seed, b, |r, _| {
        let theta = prior.sample(r);
        let x = theta + sigma * rng::std_normal(r);
        values.push(posterior_value(model, sigma, x, theta));
    });
    let rank = threshold_rank(b, beta);
    let (_, k_hat, _) = values.select_nth_unstable_by(rank, f64::total_cmp);
    Ok(CoverageRule { model: model.clone(), sigma, k_hat: *k_hat, beta, mc_size: b, seed })
}

impl CoverageRule {
    /// Builds a rule with a known threshold (e.g. an analytic one).
    pub fn with_threshold(model: SmoothModel, sigma: f64, k: f64, beta: f64) -> Result<Self> {
        model.require_smooth()?;
        check_sigma(sigma)?;
        Ok(Self { model, sigma, k_hat: k, beta, mc_size: 0, seed: 0 })
    }

    pub fn set(&self, x: f64) -> Result<IntervalUnion> {
        self.set_with(x, &ScanOptions::default())
    }

    pub fn set_with(&self, x: f64, opts: &ScanOptions) -> Result<IntervalUnion> {
        let post = PosteriorAt::new(&self.model, self.sigma, x)?;
        Ok(LevelSetScan::new(&post, opts).level_set(self.k_hat))
    }

    /// Membership without building the set.
    pub fn contains(&self, x: f64, theta: f64) -> bool {
        posterior_value(&self.model, self.sigma, x, theta) >= self.k_hat
    }
}

/// How super-level sets are located.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    /// Number of scan points across the window.
    pub points: usize,
    /// Half-width beyond the outermost posterior components, in component
    /// standard deviations.
    pub width_sds: f64,
    /// Endpoint bisection stops at this bracket width.
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { points: 4001, width_sds: 8.0, tol: 1e-8 }
    }
}

/// A posterior density tabulated on a scan grid; answers level-set queries
/// for any threshold.
#[derive(Debug, Clone)]
pub struct LevelSetScan<'a> {
    post: &'a PosteriorAt,
    thetas: Vec<f64>,
    dens: Vec<f64>,
    tol: f64,
}

impl<'a> LevelSetScan<'a> {
    pub fn new(post: &'a PosteriorAt, opts: &ScanOptions) -> Self {
        let (lo, hi) = post.window(opts.width_sds);
        let n = opts.points.max(3);
        let step = (hi - lo) / (n - 1) as f64;
        let thetas: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect();
        let dens = thetas.iter().map(|&t| post.density(t)).collect();
        Self { post, thetas, dens, tol: opts.tol }
    }

    pub fn max_density(&self) -> f64 {
        self.dens.iter().copied().fold(0.0, f64::max)
    }

    /// `{θ : π(θ | x) ≥ k}` restricted to the scan window.
    pub fn level_set(&self, k: f64) -> IntervalUnion {
        let n = self.thetas.len();
        let mut pieces = Vec::new();
        let mut i = 0;
        while i < n {
            if self.dens[i] < k {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && self.dens[i] >= k {
                i += 1;
            }
            let end = i - 1;
            let a = if start == 0 { self.thetas[0] } else { self.crossing(start - 1, start, k) };
            let b = if end == n - 1 { self.thetas[n - 1] } else { self.crossing(end + 1, end, k) };
            pieces.push((a, b));
        }
        IntervalUnion::from_intervals(pieces)
    }

    /// Bisection between scan points `out` (density below `k`) and `inside`.
    fn crossing(&self, out: usize, inside: usize, k: f64) -> f64 {
        let mut o = self.thetas[out];
        let mut n = self.thetas[inside];
        while (n - o).abs() > self.tol {
            let mid = 0.5 * (o + n);
            if self.post.density(mid) >= k {
                n = mid;
            } else {
                o = mid;
            }
        }
        0.5 * (o + n)
    }

    /// Posterior mass of the level set at `k`.
    pub fn content(&self, k: f64) -> f64 {
        self.level_set(k).intervals().iter().map(|iv| self.post.mass(iv.lo, iv.hi)).sum()
    }
}

/// Level set of a single posterior at threshold `k`.
pub fn level_set(post: &PosteriorAt, k: f64, opts: &ScanOptions) -> IntervalUnion {
    LevelSetScan::new(post, opts).level_set(k)
}

/// Target accuracy of HPD content.
pub const HPD_CONTENT_TOL: f64 = 1e-4;

/// Highest posterior density set with content `1 − β`: the level set whose
/// posterior mass is `1 − β`, with an `x`-specific threshold.
pub fn hpd_set(model: &SmoothModel, sigma: f64, x: f64, beta: f64) -> Result<IntervalUnion> {
    check_beta(beta)?;
    check_sigma(sigma)?;
    let post = PosteriorAt::new(model, sigma, x)?;
    let scan = LevelSetScan::new(&post, &ScanOptions::default());
    let target = 1.0 - beta;
    // Content decreases in k; keep content(lo) ≥ target > content(hi).
    let mut lo = 0.0;
    let mut hi = scan.max_density();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = scan.content(mid);
        if c >= target {
            lo = mid;
            if c - target <= 0.1 * HPD_CONTENT_TOL {
                break;
            }
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(scan.level_set(lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpdRule {
    pub model: SmoothModel,
    pub sigma: f64,
    pub beta: f64,
}

impl HpdRule {
    pub fn set(&self, x: f64) -> Result<IntervalUnion> {
        hpd_set(&self.model, self.sigma, x, self.beta)
    }
}

/// Monte Carlo coverage and expected length of a rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEvaluation {
    pub coverage: f64,
    pub mean_length: f64,
    /// Some set had infinite length; `mean_length` is then infinite.
    pub length_overflow: bool,
    pub draws: usize,
}

fn check_eval_budget(b: usize) -> Result<()> {
    if b < MIN_EVAL_SIZE {
        Err(Error::BudgetTooSmall { required: MIN_EVAL_SIZE, got: b })
    } else {
        Ok(())
    }
}

/// Coverage and mean Lebesgue length of `rule_fn` over `(θ, X)` drawn from
/// `truth` with noise `sigma`.
pub fn evaluate_rule<F, S>(mut rule_fn: F, truth: &S, sigma: f64, b: usize, seed: u64) -> Result<RuleEvaluation>
where
    F: FnMut(f64) -> Result<IntervalUnion>,
    S: ThetaSource + ?Sized,
{
    check_eval_budget(b)?;
    check_sigma(sigma)?;
    let mut hits = 0usize;
    let mut length = 0.0;
    let mut failure = None;
    rng::for_each_draw(seed, b, |r, _| {
        if failure.is_some() {
            return;
        }
        let theta = truth.draw_theta(r);
        let x = theta + sigma * rng::std_normal(r);
        match rule_fn(x) {
            Ok(set) => {
                hits += set.contains(theta) as usize;
                length += set.length();
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RuleEvaluation {
        coverage: hits as f64 / b as f64,
        mean_length: length / b as f64,
        length_overflow: length.is_infinite(),
        draws: b,
    })
}

/// [`evaluate_rule`] specialized to a constant-threshold rule, without
/// building the sets: coverage uses `π̂(θ | X) ≥ k̂`, and the set length is
/// estimated by `1{π̂(θ' | X) ≥ k̂} / π̂(θ' | X)` averaged over posterior
/// draws `θ' ~ π̂(· | X)`, an unbiased estimate of `|I(X)|` bounded by
/// `1/k̂`.
pub fn evaluate_threshold_rule<S>(
    rule: &CoverageRule,
    truth: &S,
    sigma: f64,
    b: usize,
    seed: u64,
) -> Result<RuleEvaluation>
where
    S: ThetaSource + ?Sized,
{
    check_eval_budget(b)?;
    check_sigma(sigma)?;
    let mut hits = 0usize;
    let mut length = 0.0;
    let mut failure = None;
    rng::for_each_draw(seed, b, |r, _| {
        if failure.is_some() {
            return;
        }
        let theta = truth.draw_theta(r);
        let x = theta + sigma * rng::std_normal(r);
        match PosteriorAt::new(&rule.model, sigma, x) {
            Ok(post) => {
                hits += (post.density(theta) >= rule.k_hat) as usize;
                length += threshold_length_estimate(&post, rule.k_hat, r);
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RuleEvaluation {
        coverage: hits as f64 / b as f64,
        mean_length: length / b as f64,
        length_overflow: false,
        draws: b,
    })
}

fn threshold_length_estimate(post: &PosteriorAt, k: f64, r: &mut StreamRng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..LENGTH_DRAWS {
        let t = post.sample(r);
        let d = post.density(t);
        if d >= k {
            acc += 1.0 / d;
        }
    }
    acc / LENGTH_DRAWS as f64
}

/// Plug-in marginal coverage `∫ f(x) P(π(θ | x) ≥ k | x) dx` of threshold
/// rules under the model's own joint law, by quadrature over `x`.
#[derive(Debug, Clone)]
pub struct PlugInCoverage {
    posts: Vec<PosteriorAt>,
    weights: Vec<f64>,
    opts: ScanOptions,
}

impl PlugInCoverage {
    pub fn new(model: &SmoothModel, sigma: f64, nodes: usize, opts: ScanOptions) -> Result<Self> {
        model.require_smooth()?;
        check_sigma(sigma)?;
        let s = model.sigma_star(sigma);
        let (lo, hi) = (model.base.min_atom() - 10.0 * s, model.base.max_atom() + 10.0 * s);
        let (xs, ws) = quad::simpson_rule(lo, hi, nodes);
        let mut posts = Vec::with_capacity(xs.len());
        let mut weights = Vec::with_capacity(xs.len());
        for (x, w) in xs.into_iter().zip(ws) {
            posts.push(PosteriorAt::new(model, sigma, x)?);
            weights.push(w * crate::npmle::marginal_density(model, sigma, x));
        }
        Ok(Self { posts, weights, opts })
    }

    pub fn coverage(&self, k: f64) -> f64 {
        self.posts.iter().zip(&self.weights).map(|(p, w)| w * LevelSetScan::new(p, &self.opts).content(k)).sum()
    }

    /// The threshold whose plug-in coverage is `1 − β`, by bisection.
    pub fn threshold(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let scans: Vec<LevelSetScan<'_>> = self.posts.iter().map(|p| LevelSetScan::new(p, &self.opts)).collect();
        let cov = |k: f64| -> f64 { scans.iter().zip(&self.weights).map(|(s, w)| w * s.content(k)).sum() };
        let mut lo = 0.0;
        let mut hi = scans.iter().map(LevelSetScan::max_density).fold(0.0, f64::max);
        let target = 1.0 - beta;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cov(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Calibrated rules for every distinct noise level of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBook {
    rules: Vec<CoverageRule>,
}

impl RuleBook {
    pub fn rules(&self) -> &[CoverageRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The rule calibrated for exactly this `sigma`.
    pub fn rule_for(&self, sigma: f64) -> Option<&CoverageRule> {
        self.rules.binary_search_by(|r| r.sigma.total_cmp(&sigma)).ok().map(|i| &self.rules[i])
    }
}

/// Distinct noise levels of a sample, ascending.
pub fn distinct_sigmas(sample: &Sample) -> Vec<f64> {
    let mut s = sample.sigma().to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

/// One calibrated rule per distinct `σ_i`. The rule for the `k`-th distinct
/// value (ascending) uses seed `seed` when `k = 0` and a derived seed
/// otherwise, so a homoscedastic sample reproduces [`calibrate_threshold`].
pub fn hetero_rules(model: &SmoothModel, sample: &Sample, beta: f64, b: usize, seed: u64) -> Result<RuleBook> {
    sample.require_nonempty()?;
    let rules = distinct_sigmas(sample)
        .into_iter()
        .enumerate()
        .map(|(k, s)| calibrate_threshold(model, s, beta, b, rule_seed(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RuleBook { rules })
}

/// Seed of the `k`-th rule in a [`RuleBook`].
pub fn rule_seed(seed: u64, k: usize) -> u64 {
    if k == 0 {
        seed
    } else {
        rng::derive_seed(seed, k as u64)
    }
}

/// Analytic optimal set for a point-mass prior at `a`: the posterior is
/// `N(αx + (1 − α)a, ασ²)`, so the set is that mean `± z √α σ`.
pub fn point_mass_interval(a: f64, c: f64, sigma: f64, x: f64, z: f64) -> (f64, f64) {
    let alpha = c * c / (c * c + sigma * sigma);
    let m = alpha * x + (1.0 - alpha) * a;
    let h = z * math::sqrt(alpha) * sigma;
    (m - h, m + h)
}
