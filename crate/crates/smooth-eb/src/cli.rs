//! Command-line interface.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use smooth_eb_core::coverage::{self, CoverageRule};
use smooth_eb_core::gof::{self, GlrtOptions};
use smooth_eb_core::identify::{self, NeighborhoodOptions, Split};
use smooth_eb_core::npmle::{self, FitOptions};
use smooth_eb_core::posterior;
use smooth_eb_core::sim::{self, FigureFixture, Scenario, SmoothingMode, MIN_RULE_SMOOTHING};
use smooth_eb_core::{IntervalUnion, Sample, SmoothModel};

use crate::error::{Error, Result};
use crate::io::{self, CsvOut};
use crate::report::{C0Json, FitJson, ScenarioJson, TestReportJson};
use crate::runner;

#[derive(Debug, Parser)]
#[command(name = "smooth-eb", version, about = "Smooth NPMLE empirical Bayes for Gaussian location mixtures")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SMOOTH_EB_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the smooth NPMLE prior and write it as JSON.
    Fit(FitArgs),
    /// Posterior means of ξ and θ for every observation.
    Denoise(DenoiseArgs),
    /// Marginal coverage sets (or HPD sets) for every observation.
    Coverage(CoverageArgs),
    /// Estimate or bound the largest Gaussian component c₀ of the prior.
    EstimateC0(EstimateC0Args),
    /// Test whether the prior is a single Gaussian.
    TestGof(TestGofArgs),
    /// Run a simulation scenario.
    Simulate(SimulateArgs),
    /// Tabulate true and fitted densities for a fixture.
    Figure(FigureArgs),
}

/// `--c` value: a number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CArg {
    Auto,
    Value(f64),
}

impl FromStr for CArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(CArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(CArg::Value(v)),
            _ => Err(format!("expected a nonnegative number or `auto`, got `{s}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Smoothing scale, or `auto` for the cross-validated neighborhood estimate.
    #[arg(long, default_value = "auto")]
    pub c: CArg,
    #[arg(long)]
    pub out: PathBuf,
    /// NPMLE grid size (default min(300, n)).
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Seed of the cross-validation folds when `--c auto`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Monte Carlo draws used to calibrate each threshold.
    #[arg(long, default_value_t = coverage::DEFAULT_MC_SIZE)]
    pub mc: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-observation highest posterior density sets instead.
    #[arg(long)]
    pub hpd: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum C0Method {
    Neighborhood,
    Slr,
}

#[derive(Debug, Args)]
pub struct EstimateC0Args {
    #[arg(long)]
    pub data: PathBuf,
    /// Report an upper confidence bound at this level instead of a point estimate.
    #[arg(long, value_name = "BETA")]
    pub ucb: Option<f64>,
    #[arg(long, value_enum, default_value_t = C0Method::Neighborhood)]
    pub method: C0Method,
    /// Points in the descending smoothing grid of the SLR bound.
    #[arg(long, default_value_t = 20)]
    pub slr_grid: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GofArg {
    Slr,
    Glrt,
}

#[derive(Debug, Args)]
pub struct TestGofArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: GofArg,
    /// Bootstrap draws for the GLRT.
    #[arg(long = "B", default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Smoothing scale under test, or `auto` for the neighborhood estimate.
    #[arg(long, default_value = "auto")]
    pub c: CArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Table1,
    Table2Laplace,
    Table2Gamma,
    Table3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// NPMLE with the true c₀.
    Oracle,
    /// NPMLE with ĉ₀ from the neighborhood estimate.
    Estimate,
    /// Rules built from the true prior.
    TrueModel,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Half-separation of the two-point prior.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Oracle)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = Scenario::DESK_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-replication CSV (default: the report path with extension `.reps.csv`).
    #[arg(long)]
    pub rows_out: Option<PathBuf>,
    /// Run the full 100 replications.
    #[arg(long = "paper-scale", alias = "full-scale")]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureArg {
    TwoComponent,
    Laplace,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub fixture: FixtureArg,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV with columns theta, g_true, g_fit.
    #[arg(long)]
    pub prior_out: PathBuf,
    /// CSV with columns x, f_true, f_fit.
    #[arg(long)]
    pub marginal_out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    runner::pool(cli.threads)?.install(|| match cli.command {
        Command::Fit(a) => fit(a),
        Command::Denoise(a) => denoise(a),
        Command::Coverage(a) => coverage_sets(a),
        Command::EstimateC0(a) => estimate_c0(a),
        Command::TestGof(a) => test_gof(a),
        Command::Simulate(a) => simulate(a),
        Command::Figure(a) => figure(a),
    })
}

/// The given seed, or a fresh one that is announced on stderr.
fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s} (rerun with --seed {s} to reproduce)");
        s
    })
}

fn check_beta(flag: &str, beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("{flag} must lie in (0, 1), got {beta}")))
    }
}

/// Resolves `--c`; `auto` uses the cross-validated neighborhood estimate.
fn resolve_c(c: CArg, sample: &Sample, seed: Option<u64>) -> Result<(f64, &'static str)> {
    match c {
        CArg::Value(v) => Ok((v, "given")),
        CArg::Auto => {
            let opts = NeighborhoodOptions { seed: seed_or_entropy(seed), ..Default::default() };
            let est = identify::c0_estimate_cv(sample, &opts)?;
            eprintln!("c0_hat = {} (sigma0_hat = {}, eta = {})", est.c0_hat, est.sigma0_hat, est.eta_used);
            Ok((est.c0_hat, "neighborhood-cv"))
        }
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let sample = io::read_sample(&a.data)?;
    let (c, c_source) = resolve_c(a.c, &sample, a.seed)?;
    let opts = FitOptions { grid_size: a.grid_size, ..FitOptions::default() };
    let f = npmle::solve_npmle(&sample, c, &opts)?;
    eprintln!(
        "npmle: {} atoms, log-likelihood {}, optimality_gap {:.3e}, {} iterations",
        f.mixture.len(),
        f.log_likelihood,
        f.optimality_gap,
        f.iterations
    );
    io::write_model(&a.out, &f.model(c)?)?;
    io::write_stdout_json(&FitJson {
        c,
        c_source,
        atoms: f.mixture.len(),
        log_likelihood: f.log_likelihood,
        optimality_gap: f.optimality_gap,
        iterations: f.iterations,
        converged: f.converged,
        n: sample.len(),
    })
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let model = io::read_model(&a.model)?;
    let sample = io::read_sample(&a.data)?;
    let mut out = CsvOut::create(&a.out, &["x", "sigma", "xi_hat", "theta_hat"])?;
    for (x, s) in sample.iter() {
        let xi = posterior::posterior_mean_xi(&model, s, x);
        let theta = posterior::posterior_mean_theta(&model, s, x);
        out.row([x, s, xi, theta].map(|v| v.to_string()))?;
    }
    out.finish()?;
    io::write_stdout_json(&serde_json::json!({ "rows": sample.len(), "out": a.out }))
}

/// Coverage sets need a continuous prior; a point-mass fit gets the
/// smallest smoothing instead.
fn rule_model(model: SmoothModel) -> Result<SmoothModel> {
    if model.c() > 0.0 {
        return Ok(model);
    }
    eprintln!("model has c = 0; building sets with c = {MIN_RULE_SMOOTHING}");
    Ok(SmoothModel::new(model.base, MIN_RULE_SMOOTHING)?)
}

#[derive(Serialize)]
struct CoverageSummary {
    rows: usize,
    beta: f64,
    method: &'static str,
    seed: Option<u64>,
    mc: Option<usize>,
    /// `(σ, k̂)` per distinct noise level.
    thresholds: Vec<(f64, f64)>,
    mean_length: f64,
    excluding_zero: usize,
}

fn coverage_sets(a: CoverageArgs) -> Result<()> {
    check_beta("--beta", a.beta)?;
    let model = rule_model(io::read_model(&a.model)?)?;
    let sample = io::read_sample(&a.data)?;
    let (sets, seed, rules): (Vec<IntervalUnion>, Option<u64>, Vec<CoverageRule>) = if a.hpd {
        let sets =
            runner::par_indexed(sample.len(), |i| coverage::hpd_set(&model, sample.sigma()[i], sample.x()[i], a.beta))?;
        (sets, None, Vec::new())
    } else {
        let seed = seed_or_entropy(a.seed);
        let rules = runner::calibrate_rules(&model, &sample, a.beta, a.mc, seed)?;
        let sets = runner::par_indexed(sample.len(), |i| {
            let s = sample.sigma()[i];
            let k = rules.partition_point(|r| r.sigma < s);
            rules[k].set(sample.x()[i])
        })?;
        (sets, Some(seed), rules)
    };
    let mut out = CsvOut::create(&a.out, &["x", "sigma", "set", "length", "contains_zero"])?;
    for ((x, s), set) in sample.iter().zip(&sets) {
        let zero = if set.contains(0.0) { "1" } else { "0" };
        out.row([x.to_string(), s.to_string(), io::format_set(set), set.length().to_string(), zero.into()])?;
    }
    out.finish()?;
    let lengths: Vec<f64> = sets.par_iter().map(IntervalUnion::length).collect();
    io::write_stdout_json(&CoverageSummary {
        rows: sets.len(),
        beta: a.beta,
        method: if a.hpd { "hpd" } else { "marginal-threshold" },
        seed,
        mc: (!a.hpd).then_some(a.mc),
        thresholds: rules.iter().map(|r| (r.sigma, r.k_hat)).collect(),
        mean_length: lengths.iter().sum::<f64>() / lengths.len() as f64,
        excluding_zero: sets.iter().filter(|s| !s.contains(0.0)).count(),
    })
}

fn estimate_c0(a: EstimateC0Args) -> Result<()> {
    let sample = io::read_sample(&a.data)?;
    if let Some(b) = a.ucb {
        check_beta("--ucb", b)?;
    }
    let json = match a.method {
        C0Method::Neighborhood => {
            let est = match a.ucb {
                Some(beta) => identify::c0_upper_bound(&sample, beta, &NeighborhoodOptions::default())?,
                None => {
                    let opts = NeighborhoodOptions { seed: seed_or_entropy(a.seed), ..Default::default() };
                    identify::c0_estimate_cv(&sample, &opts)?
                }
            };
            C0Json::from_estimate(&est, sample.len())
        }
        C0Method::Slr => {
            let beta = a.ucb.unwrap_or(0.05);
            let split = Split::Random { seed: seed_or_entropy(a.seed) };
            let grid = identify::default_slr_grid(&sample, a.slr_grid);
            let b = identify::c0_slr_upper_bound(&sample, beta, &grid, split, &FitOptions::default())?;
            C0Json {
                c0_hat: b.c_upper,
                sigma0_hat: None,
                eta: None,
                mode: format!("slr-ucb(beta={beta})"),
                n: sample.len(),
                at_floor: false,
            }
        }
    };
    if let Some(p) = &a.out {
        io::write_json(p, &json)?;
    }
    io::write_stdout_json(&json)
}

fn test_gof(a: TestGofArgs) -> Result<()> {
    check_beta("--beta", a.beta)?;
    let sample = io::read_sample(&a.data)?;
    let seed = seed_or_entropy(a.seed);
    let (c, _) = resolve_c(a.c, &sample, Some(seed))?;
    let report = match a.method {
        GofArg::Slr => gof::slr_gof_test(&sample, c, a.beta, Split::Random { seed }, &FitOptions::default())?,
        GofArg::Glrt => {
            let opts = GlrtOptions { bootstrap: a.bootstrap, ..Default::default() };
            gof::glrt_bootstrap_test(&sample, c, a.beta, seed, &opts)?
        }
    };
    let json = TestReportJson::new(&report, c, sample.len());
    if let Some(p) = &a.out {
        io::write_json(p, &json)?;
    }
    io::write_stdout_json(&json)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mode = match a.mode {
        ModeArg::Estimate => SmoothingMode::Estimate,
        ModeArg::TrueModel => SmoothingMode::TrueModel,
        ModeArg::Oracle => match a.scenario {
            ScenarioArg::Table1 | ScenarioArg::Table3 => SmoothingMode::Known(1.0),
            _ => return Err(Error::Usage("--mode oracle needs a prior with a known c0 (table1 or table3)".into())),
        },
    };
    let mut s = match a.scenario {
        ScenarioArg::Table1 => Scenario::table1(a.a, mode),
        ScenarioArg::Table2Laplace => Scenario::table2_laplace(mode),
        ScenarioArg::Table2Gamma => Scenario::table2_gamma(mode),
        ScenarioArg::Table3 => Scenario::table3(a.a, mode),
    };
    s.n = a.n;
    s.reps = if a.full_scale { Scenario::FULL_REPS } else { a.reps };
    s.beta = a.beta;
    s.seed = seed_or_entropy(a.seed);
    let report = runner::run_scenario(&s)?;

    let rows_path = a.rows_out.clone().unwrap_or_else(|| a.out.with_extension("reps.csv"));
    let mut out = CsvOut::create(
        &rows_path,
        &["rep", "seed", "coverage", "length", "c0_hat", "c_used", "atoms", "optimality_gap", "k_hat"],
    )?;
    for r in &report.rows {
        let k_hat: Vec<String> = r.k_hat.iter().map(f64::to_string).collect();
        out.row([
            r.rep.to_string(),
            r.seed.to_string(),
            r.coverage.to_string(),
            r.length.to_string(),
            r.c0_hat.map_or(String::new(), |c| c.to_string()),
            r.c_used.to_string(),
            r.atoms.to_string(),
            r.optimality_gap.to_string(),
            k_hat.join(";"),
        ])?;
    }
    out.finish()?;
    let json = ScenarioJson::from(&report);
    io::write_json(&a.out, &json)?;
    io::write_stdout_json(&json)
}

fn figure(a: FigureArgs) -> Result<()> {
    let fixture = match a.fixture {
        FixtureArg::TwoComponent => FigureFixture::TwoComponent,
        FixtureArg::Laplace => FigureFixture::Laplace,
    };
    let seed = seed_or_entropy(a.seed);
    let d = sim::run_figure_fixture(fixture, a.n, seed)?;
    let mut out = CsvOut::create(&a.prior_out, &["theta", "g_true", "g_fit"])?;
    for i in 0..d.theta.len() {
        out.row([d.theta[i], d.g_true[i], d.g_fit[i]].map(|v| v.to_string()))?;
    }
    out.finish()?;
    let mut out = CsvOut::create(&a.marginal_out, &["x", "f_true", "f_fit"])?;
    for i in 0..d.x.len() {
        out.row([d.x[i], d.f_true[i], d.f_fit[i]].map(|v| v.to_string()))?;
    }
    out.finish()?;
    io::write_stdout_json(&serde_json::json!({
        "seed": seed,
        "n": a.n,
        "c0_hat": d.c0_hat,
        "atoms": d.model.base.len(),
        "l2_prior": d.l2_prior,
        "tv_marginal": d.tv_marginal,
    }))
}
