//! JSON shapes of command results.

use serde::Serialize;
use smooth_eb_core::gof::{Decision, Method, TestReport};
use smooth_eb_core::identify::{C0Estimate, C0Mode, Split};
use smooth_eb_core::sim::{MeanSd, PriorSpec, ScenarioReport, SigmaScheme, SmoothingMode};

#[derive(Debug, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl From<MeanSd> for Stat {
    fn from(m: MeanSd) -> Self {
        Self { mean: m.mean, sd: m.sd }
    }
}

pub fn describe_prior(p: &PriorSpec) -> String {
    match p {
        PriorSpec::TwoPoint { a, c } => format!("two-point(a={a}, c={c})"),
        PriorSpec::UniformBase { half_width, c } => format!("uniform(L={half_width}, c={c})"),
        PriorSpec::Laplace => "laplace(0,1)".into(),
        PriorSpec::Gamma => "gamma(1,1)".into(),
    }
}

fn describe_sigma(s: &SigmaScheme) -> String {
    match s {
        SigmaScheme::Constant(v) => format!("constant({v})"),
        SigmaScheme::Discrete { values, probs } => {
            let parts: Vec<String> = values.iter().zip(probs).map(|(v, p)| format!("{v}:{p}")).collect();
            format!("discrete({})", parts.join(","))
        }
    }
}

fn describe_mode(m: &SmoothingMode) -> String {
    match m {
        SmoothingMode::Known(c) => format!("oracle(c={c})"),
        SmoothingMode::Estimate => "estimate".into(),
        SmoothingMode::TrueModel => "true-model".into(),
    }
}

#[derive(Debug, Serialize)]
pub struct ScenarioJson {
    pub scenario: String,
    pub prior: String,
    pub n: usize,
    pub sigma: String,
    pub beta: f64,
    pub reps: usize,
    pub seed: u64,
    pub mode: String,
    pub calib_size: usize,
    pub eval_size: usize,
    pub coverage: Stat,
    pub length: Stat,
    pub c0_hat: Option<Stat>,
    pub wall_seconds: Option<f64>,
}

impl From<&ScenarioReport> for ScenarioJson {
    fn from(r: &ScenarioReport) -> Self {
        let s = &r.scenario;
        Self {
            scenario: s.name.clone(),
            prior: describe_prior(&s.prior),
            n: s.n,
            sigma: describe_sigma(&s.sigma),
            beta: s.beta,
            reps: s.reps,
            seed: s.seed,
            mode: describe_mode(&s.mode),
            calib_size: s.calib_size,
            eval_size: s.eval_size,
            coverage: r.coverage.into(),
            length: r.length.into(),
            c0_hat: r.c0_hat.map(Into::into),
            wall_seconds: r.wall_seconds,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TestReportJson {
    pub statistic: f64,
    pub decision: &'static str,
    pub beta: f64,
    pub method: &'static str,
    pub p_value: Option<f64>,
    pub seed: u64,
    pub split: Option<&'static str>,
    pub bootstrap_draws: usize,
    pub c: f64,
    pub n: usize,
}

impl TestReportJson {
    pub fn new(r: &TestReport, c: f64, n: usize) -> Self {
        Self {
            statistic: r.statistic,
            decision: match r.decision {
                Decision::Reject => "reject",
                Decision::Retain => "retain",
            },
            beta: r.beta,
            method: match r.method {
                Method::Slr => "slr",
                Method::GlrtBootstrap => "glrt-bootstrap",
            },
            p_value: r.p_value,
            seed: r.seed,
            split: r.split.map(|s| match s {
                Split::EvenOdd => "even-odd",
                Split::Random { .. } => "random-halves",
            }),
            bootstrap_draws: r.bootstrap_draws,
            c,
            n,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct C0Json {
    pub c0_hat: f64,
    /// Absent for the split likelihood ratio bound.
    pub sigma0_hat: Option<f64>,
    pub eta: Option<f64>,
    pub mode: String,
    pub n: usize,
    pub at_floor: bool,
}

impl C0Json {
    pub fn from_estimate(e: &C0Estimate, n: usize) -> Self {
        Self {
            c0_hat: e.c0_hat,
            sigma0_hat: Some(e.sigma0_hat),
            eta: Some(e.eta_used),
            mode: match e.mode {
                C0Mode::PointEstimate => "point-estimate".into(),
                C0Mode::Ucb { beta } => format!("ucb(beta={beta})"),
            },
            n,
            at_floor: e.at_floor,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitJson {
    pub c: f64,
    pub c_source: &'static str,
    pub atoms: usize,
    pub log_likelihood: f64,
    pub optimality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n: usize,
}
