//! Monte Carlo studies of the full workflow: draw data from a known prior,
//! estimate `c₀` (or take it as known), fit the NPMLE, calibrate the
//! coverage rule, and score it against the generating process.
//!
//! Every replication derives its own seeds from `(scenario seed, rep)`, so
//! replications are independent of each other and of execution order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::coverage::{self, RuleEvaluation};
use crate::gof::{self, Decision, GlrtOptions};
use crate::identify::{self, NeighborhoodOptions, Split};
use crate::math;
use crate::metrics::{self, Density, MarginalDensity, PriorDensity};
use crate::npmle::{self, FitOptions};
use crate::rng::{self, StreamRng, ThetaSource};
use crate::{DiscreteMixture, Error, Result, Sample, SmoothModel};

/// Smallest smoothing used to build coverage rules when `ĉ₀` is 0.
pub const MIN_RULE_SMOOTHING: f64 = 0.05;

/// Generating prior `G*` of `θ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// `½ N(−a, c²) + ½ N(a, c²)`.
    TwoPoint { a: f64, c: f64 },
    /// `Unif[−half_width, half_width] ⋆ N(0, c²)`.
    UniformBase { half_width: f64, c: f64 },
    /// Standard Laplace, density `½ e^{−|θ|}`.
    Laplace,
    /// `Gamma(1, 1)`, i.e. standard exponential.
    Gamma,
}

impl PriorSpec {
    /// The prior as a smooth model, when it is one exactly.
    pub fn smooth_model(&self) -> Option<SmoothModel> {
        match *self {
            PriorSpec::TwoPoint { a, c } => SmoothModel::new(DiscreteMixture::symmetric_two_point(a), c).ok(),
            _ => None,
        }
    }

    /// Largest Gaussian component `c₀` of the prior when known in closed
    /// form.
    pub fn c0(&self) -> Option<f64> {
        match *self {
            PriorSpec::TwoPoint { c, .. } | PriorSpec::UniformBase { c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match *self {
            PriorSpec::TwoPoint { a, c } => 0.5 * (math::normal_pdf(t + a, c) + math::normal_pdf(t - a, c)),
            PriorSpec::UniformBase { half_width: l, c } => {
                if l == 0.0 {
                    math::normal_pdf(t, c)
                } else {
                    (math::std_normal_cdf((t + l) / c) - math::std_normal_cdf((t - l) / c)) / (2.0 * l)
                }
            }
            PriorSpec::Laplace => 0.5 * math::exp(-t.abs()),
            PriorSpec::Gamma => {
                if t >= 0.0 {
                    math::exp(-t)
                } else {
                    0.0
                }
            }
        }
    }

    /// Marginal density of `X = θ + σZ`.
    pub fn marginal_density(&self, sigma: f64, x: f64) -> f64 {
        match *self {
            PriorSpec::TwoPoint { a, c } => {
                let s = math::sqrt(c * c + sigma * sigma);
                0.5 * (math::normal_pdf(x + a, s) + math::normal_pdf(x - a, s))
            }
            PriorSpec::UniformBase { half_width, c } => {
                PriorSpec::UniformBase { half_width, c: math::sqrt(c * c + sigma * sigma) }.density(x)
            }
            PriorSpec::Laplace => laplace_marginal(sigma, x),
            PriorSpec::Gamma => {
                // ∫₀^∞ e^{−θ} φ_σ(x − θ) dθ = e^{σ²/2 − x} Φ((x − σ²)/σ).
                let s2 = sigma * sigma;
                math::exp(0.5 * s2 - x) * math::std_normal_cdf((x - s2) / sigma)
            }
        }
    }

    /// Window holding essentially all prior mass.
    pub fn window(&self) -> (f64, f64) {
        match *self {
            PriorSpec::TwoPoint { a, c } => (-a - 10.0 * c, a + 10.0 * c),
            PriorSpec::UniformBase { half_width, c } => (-half_width - 10.0 * c, half_width + 10.0 * c),
            PriorSpec::Laplace => (-40.0, 40.0),
            PriorSpec::Gamma => (0.0, 40.0),
        }
    }
}

/// `½ ∫ e^{−|θ|} φ_σ(x − θ) dθ = ½ e^{σ²/2} [e^{−x} Φ(x/σ − σ) + e^{x} Φ(−x/σ − σ)]`,
/// each term evaluated in the log domain.
pub fn laplace_marginal(sigma: f64, x: f64) -> f64 {
    let half = 0.5 * sigma * sigma;
    let term = |sign: f64| {
        let p = math::std_normal_cdf(sign * x / sigma - sigma);
        if p == 0.0 {
            0.0
        } else {
            math::exp(half - sign * x + math::ln(p))
        }
    };
    0.5 * (term(1.0) + term(-1.0))
}

impl ThetaSource for PriorSpec {
    fn draw_theta(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            PriorSpec::TwoPoint { a, c } => {
                let mean = if rng::uniform(rng) < 0.5 { -a } else { a };
                mean + c * rng::std_normal(rng)
            }
            PriorSpec::UniformBase { half_width, c } => {
                half_width * (2.0 * rng::uniform(rng) - 1.0) + c * rng::std_normal(rng)
            }
            PriorSpec::Laplace => {
                // Inverse CDF.
                let u = rng::uniform(rng) - 0.5;
                let t = -math::ln(1.0 - 2.0 * u.abs());
                if u < 0.0 {
                    -t
                } else {
                    t
                }
            }
            PriorSpec::Gamma => -math::ln(1.0 - rng::uniform(rng)),
        }
    }
}

/// Distribution of the noise levels `σ_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaScheme {
    Constant(f64),
    /// `σ_i = values[k]` with probability `probs[k]`.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl SigmaScheme {
    /// `{√(1/2), √(3/4), 1, √2}`, each with probability 1/4.
    pub fn four_levels() -> Self {
        SigmaScheme::Discrete {
            values: vec![math::sqrt(0.5), math::sqrt(0.75), 1.0, math::sqrt(2.0)],
            probs: vec![0.25; 4],
        }
    }

    fn draw(&self, r: &mut StreamRng) -> f64 {
        match self {
            SigmaScheme::Constant(s) => *s,
            SigmaScheme::Discrete { values, probs } => {
                let u = rng::uniform(r);
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                values[values.len() - 1]
            }
        }
    }

    /// `(σ, probability)` pairs.
    pub fn levels(&self) -> Vec<(f64, f64)> {
        match self {
            SigmaScheme::Constant(s) => vec![(*s, 1.0)],
            SigmaScheme::Discrete { values, probs } => values.iter().copied().zip(probs.iter().copied()).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let levels = self.levels();
        for (i, &(s, p)) in levels.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidSigma { index: i, value: s });
            }
            if !(p >= 0.0) {
                return Err(Error::NegativeWeight { index: i, weight: p });
            }
        }
        let total: f64 = levels.iter().map(|l| l.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::WeightSum { sum: total });
        }
        Ok(())
    }
}

/// Where the smoothing scale of the fitted model comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingMode {
    /// NPMLE with `c` known.
    Known(f64),
    /// NPMLE with `ĉ₀` from the cross-validated neighborhood estimate.
    Estimate,
    /// The true model itself; only for priors that are smooth models.
    TrueModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub prior: PriorSpec,
    pub n: usize,
    pub sigma: SigmaScheme,
    pub beta: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: SmoothingMode,
    /// Calibration draws per rule.
    pub calib_size: usize,
    /// Evaluation draws per noise level.
    pub eval_size: usize,
    pub fit: FitOptions,
    pub neighborhood: NeighborhoodOptions,
}

impl Scenario {
    pub const DESK_REPS: usize = 20;
    pub const FULL_REPS: usize = 100;

    fn base(name: &str, prior: PriorSpec, sigma: SigmaScheme, mode: SmoothingMode) -> Self {
        Self {
            name: name.into(),
            prior,
            n: 1000,
            sigma,
            beta: 0.05,
            reps: Self::DESK_REPS,
            seed: 0,
            mode,
            calib_size: coverage::DEFAULT_MC_SIZE,
            eval_size: 20_000,
            fit: FitOptions::default(),
            neighborhood: NeighborhoodOptions::default(),
        }
    }

    /// Two-point prior `δ_{±a}` smoothed by `c₀ = 1`, `σ_i = 1`.
    pub fn table1(a: f64, mode: SmoothingMode) -> Self {
        Self::base("table1", PriorSpec::TwoPoint { a, c: 1.0 }, SigmaScheme::Constant(1.0), mode)
    }

    pub fn table2_laplace(mode: SmoothingMode) -> Self {
        Self::base("table2-laplace", PriorSpec::Laplace, SigmaScheme::Constant(1.0), mode)
    }

    pub fn table2_gamma(mode: SmoothingMode) -> Self {
        Self::base("table2-gamma", PriorSpec::Gamma, SigmaScheme::Constant(1.0), mode)
    }

    /// Table 1 prior with four noise levels.
    pub fn table3(a: f64, mode: SmoothingMode) -> Self {
        Self::base("table3", PriorSpec::TwoPoint { a, c: 1.0 }, SigmaScheme::four_levels(), mode)
    }

    pub fn full_scale(mut self) -> Self {
        self.reps = Self::FULL_REPS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidParameter { name: "reps", value: 0.0 });
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter { name: "n", value: self.n as f64 });
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter { name: "beta", value: self.beta });
        }
        if let SmoothingMode::Known(c) = self.mode {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter { name: "c", value: c });
            }
        }
        if self.mode == SmoothingMode::TrueModel && self.prior.smooth_model().is_none() {
            return Err(Error::InvalidParameter { name: "true-model mode needs a smooth prior", value: 0.0 });
        }
        self.sigma.validate()
    }

    /// Seed of replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        rng::derive_seed(self.seed, rep as u64)
    }
}

/// Seed tags within a replication.
const TAG_DATA: u64 = 1;
const TAG_FOLDS: u64 = 2;
const TAG_CALIB: u64 = 3;
const TAG_EVAL: u64 = 4;

/// `n` draws of `(σ_i, θ_i, X_i)`.
pub fn draw_sample(prior: &PriorSpec, sigma: &SigmaScheme, n: usize, seed: u64) -> Result<(Sample, Vec<f64>)> {
    let mut r = rng::stream(seed, 0);
    let mut xs = Vec::with_capacity(n);
    let mut ss = Vec::with_capacity(n);
    let mut thetas = Vec::with_capacity(n);
    for _ in 0..n {
        let s = sigma.draw(&mut r);
        let t = prior.draw_theta(&mut r);
        xs.push(t + s * rng::std_normal(&mut r));
        ss.push(s);
        thetas.push(t);
    }
    Ok((Sample::new(xs, ss)?, thetas))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub coverage: f64,
    pub length: f64,
    /// `ĉ₀` in estimate mode.
    pub c0_hat: Option<f64>,
    /// Smoothing of the fitted model.
    pub c_used: f64,
    pub atoms: usize,
    pub optimality_gap: f64,
    /// Calibrated thresholds, one per noise level.
    pub k_hat: Vec<f64>,
}

/// Runs one replication of `s`.
pub fn run_replication(s: &Scenario, rep: usize) -> Result<RepRow> {
    replication(s, rep).map_err(|e| e.at_rep(rep))
}

fn replication(s: &Scenario, rep: usize) -> Result<RepRow> {
    s.validate()?;
    let seed = s.rep_seed(rep);
    let (sample, _) = draw_sample(&s.prior, &s.sigma, s.n, rng::derive_seed(seed, TAG_DATA))?;

    let (model, c0_hat, gap) = match s.mode {
        SmoothingMode::TrueModel => (s.prior.smooth_model().expect("validated"), None, 0.0),
        SmoothingMode::Known(c) => {
            let fit = npmle::solve_npmle(&sample, c, &s.fit)?;
            let gap = fit.optimality_gap;
            (fit.model(c.max(MIN_RULE_SMOOTHING))?, None, gap)
        }
        SmoothingMode::Estimate => {
            let opts = NeighborhoodOptions { seed: rng::derive_seed(seed, TAG_FOLDS), ..s.neighborhood };
            let est = identify::c0_estimate_cv(&sample, &opts)?;
            let c = est.c0_hat;
            let fit = npmle::solve_npmle(&sample, c, &s.fit)?;
            let gap = fit.optimality_gap;
            (fit.model(c.max(MIN_RULE_SMOOTHING))?, Some(c), gap)
        }
    };

    let calib = rng::derive_seed(seed, TAG_CALIB);
    let eval = rng::derive_seed(seed, TAG_EVAL);
    let mut coverage = 0.0;
    let mut length = 0.0;
    let mut k_hat = Vec::new();
    for (k, (sigma, p)) in s.sigma.levels().into_iter().enumerate() {
        let rule = coverage::calibrate_threshold(&model, sigma, s.beta, s.calib_size, coverage::rule_seed(calib, k))?;
        let ev: RuleEvaluation =
            coverage::evaluate_threshold_rule(&rule, &s.prior, sigma, s.eval_size, rng::derive_seed(eval, k as u64))?;
        coverage += p * ev.coverage;
        length += p * ev.mean_length;
        k_hat.push(rule.k_hat);
    }
    Ok(RepRow {
        rep,
        seed,
        coverage,
        length,
        c0_hat,
        c_used: model.c(),
        atoms: model.base.len(),
        optimality_gap: gap,
        k_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            math::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub coverage: MeanSd,
    pub length: MeanSd,
    pub c0_hat: Option<MeanSd>,
    pub rows: Vec<RepRow>,
    /// Filled in by callers that have a clock.
    pub wall_seconds: Option<f64>,
}

/// Aggregates rows (in replication order) into a report.
pub fn summarize(s: &Scenario, mut rows: Vec<RepRow>) -> ScenarioReport {
    rows.sort_by_key(|r| r.rep);
    let cov: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
    let len: Vec<f64> = rows.iter().map(|r| r.length).collect();
    let c0: Vec<f64> = rows.iter().filter_map(|r| r.c0_hat).collect();
    ScenarioReport {
        scenario: s.clone(),
        coverage: MeanSd::of(&cov),
        length: MeanSd::of(&len),
        c0_hat: (!c0.is_empty()).then(|| MeanSd::of(&c0)),
        rows,
        wall_seconds: None,
    }
}

/// Runs every replication in order.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    s.validate()?;
    let rows = (0..s.reps).map(|r| run_replication(s, r)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(s, rows))
}

/// Which goodness-of-fit test a study runs.
#[derive(Debug, Clone, PartialEq)]
pub enum GofMethod {
    Slr,
    Glrt(GlrtOptions),
}

/// Decision of one goodness-of-fit replication with data from `prior`
/// (homoscedastic, `σ = 1`) and the test run at smoothing `c`.
pub fn gof_replication(
    prior: &PriorSpec,
    n: usize,
    c: f64,
    beta: f64,
    method: &GofMethod,
    seed: u64,
    rep: usize,
) -> Result<Decision> {
    let run = || -> Result<Decision> {
        let seed = rng::derive_seed(seed, rep as u64);
        let (sample, _) = draw_sample(prior, &SigmaScheme::Constant(1.0), n, rng::derive_seed(seed, TAG_DATA))?;
        let test_seed = rng::derive_seed(seed, TAG_CALIB);
        let report = match method {
            GofMethod::Slr => {
                gof::slr_gof_test(&sample, c, beta, Split::Random { seed: test_seed }, &FitOptions::default())?
            }
            GofMethod::Glrt(o) => gof::glrt_bootstrap_test(&sample, c, beta, test_seed, o)?,
        };
        Ok(report.decision)
    };
    run().map_err(|e| e.at_rep(rep))
}

/// Whether the DKW upper confidence bound covers the true `c₀` in one
/// replication of `s`.
pub fn ucb_replication(s: &Scenario, rep: usize) -> Result<(f64, bool)> {
    let run = || -> Result<(f64, bool)> {
        let c0 = s.prior.c0().ok_or(Error::InvalidParameter { name: "prior without known c0", value: 0.0 })?;
        let seed = s.rep_seed(rep);
        let (sample, _) = draw_sample(&s.prior, &s.sigma, s.n, rng::derive_seed(seed, TAG_DATA))?;
        let est = identify::c0_upper_bound(&sample, s.beta, &s.neighborhood)?;
        Ok((est.c0_hat, est.c0_hat >= c0))
    };
    run().map_err(|e| e.at_rep(rep))
}

/// Estimation error of the known-`c` NPMLE on the two-component prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub seed: u64,
    /// `‖g_fit − g_true‖_{L₂}`.
    pub l2: f64,
    pub wtv: f64,
}

pub fn rate_replication(prior: &PriorSpec, n: usize, seed: u64) -> Result<RateRow> {
    let truth =
        prior.smooth_model().ok_or(Error::InvalidParameter { name: "rate study needs a smooth prior", value: 0.0 })?;
    let c = truth.c();
    let (sample, _) = draw_sample(prior, &SigmaScheme::Constant(1.0), n, rng::derive_seed(seed, TAG_DATA))?;
    let fit = npmle::solve_npmle(&sample, c, &FitOptions::default())?.model(c)?;
    let l2 = math::sqrt(metrics::l2_sq(&PriorDensity(&fit), &PriorDensity(&truth)));
    let wtv = metrics::wtv(&fit, &truth, &truth, 1.0)?;
    Ok(RateRow { n, seed, l2, wtv })
}

/// Named density fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureFixture {
    /// `½ N(−2, 1) + ½ N(2, 1)`.
    TwoComponent,
    Laplace,
}

impl FigureFixture {
    pub fn prior(&self) -> PriorSpec {
        match self {
            FigureFixture::TwoComponent => PriorSpec::TwoPoint { a: 2.0, c: 1.0 },
            FigureFixture::Laplace => PriorSpec::Laplace,
        }
    }
}

pub const FIGURE_POINTS: usize = 1001;

/// True and fitted prior and marginal densities on 1001-point grids.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub c0_hat: f64,
    pub model: SmoothModel,
    pub theta: Vec<f64>,
    pub g_true: Vec<f64>,
    pub g_fit: Vec<f64>,
    pub x: Vec<f64>,
    pub f_true: Vec<f64>,
    pub f_fit: Vec<f64>,
    /// `‖g_fit − g_true‖_{L₂}`.
    pub l2_prior: f64,
    pub tv_marginal: f64,
}

/// Fits the smooth NPMLE with `ĉ₀` estimated by the cross-validated
/// neighborhood procedure and tabulates the curves.
pub fn run_figure_fixture(fixture: FigureFixture, n: usize, seed: u64) -> Result<FigureData> {
    if n < 100 {
        return Err(Error::InvalidParameter { name: "n", value: n as f64 });
    }
    let prior = fixture.prior();
    let (sample, _) = draw_sample(&prior, &SigmaScheme::Constant(1.0), n, rng::derive_seed(seed, TAG_DATA))?;
    let opts = NeighborhoodOptions { seed: rng::derive_seed(seed, TAG_FOLDS), ..Default::default() };
    let c0_hat = identify::c0_estimate_cv(&sample, &opts)?.c0_hat;
    let model = npmle::solve_npmle(&sample, c0_hat, &FitOptions::default())?.model(c0_hat.max(MIN_RULE_SMOOTHING))?;

    let span = |lo: f64, hi: f64| -> Vec<f64> {
        (0..FIGURE_POINTS).map(|i| lo + (hi - lo) * i as f64 / (FIGURE_POINTS - 1) as f64).collect()
    };
    let theta = span(-7.0, 7.0);
    let x = span(-8.0, 8.0);
    let g = PriorDensity(&model);
    let f = MarginalDensity { model: &model, sigma: 1.0 };
    let true_prior = metrics::DensityFn::new(|t| prior.density(t), prior.window().0, prior.window().1);
    let (wlo, whi) = prior.window();
    let true_marginal = metrics::DensityFn::new(|t| prior.marginal_density(1.0, t), wlo - 10.0, whi + 10.0);
    Ok(FigureData {
        c0_hat,
        g_true: theta.iter().map(|&t| prior.density(t)).collect(),
        g_fit: theta.iter().map(|&t| g.density(t)).collect(),
        f_true: x.iter().map(|&t| prior.marginal_density(1.0, t)).collect(),
        f_fit: x.iter().map(|&t| f.density(t)).collect(),
        l2_prior: math::sqrt(metrics::l2_sq(&g, &true_prior)),
        tv_marginal: metrics::tv(&f, &true_marginal),
        model,
        theta,
        x,
    })
}
