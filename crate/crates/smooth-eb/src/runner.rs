//! Parallel drivers over the core's per-replication functions.
//!
//! Work items are independent and seeded by index, and results are gathered
//! in index order, so output does not depend on the number of threads.

use std::time::Instant;

use rayon::prelude::*;
use smooth_eb_core::coverage::{self, CoverageRule};
use smooth_eb_core::gof::Decision;
use smooth_eb_core::sim::{self, GofMethod, PriorSpec, RateRow, RepRow, Scenario, ScenarioReport};
use smooth_eb_core::{Result as CoreResult, Sample, SmoothModel};

use crate::error::{Error, Result};

/// A worker pool with `threads` threads; 0 lets rayon choose.
pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))
}

/// Maps `f` over `0..count` in parallel and keeps the first error by index.
pub fn par_indexed<R, F>(count: usize, f: F) -> CoreResult<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> CoreResult<R> + Sync + Send,
{
    let results: Vec<CoreResult<R>> = (0..count).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

pub fn scenario_rows(s: &Scenario) -> Result<Vec<RepRow>> {
    s.validate()?;
    Ok(par_indexed(s.reps, |rep| sim::run_replication(s, rep))?)
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let start = Instant::now();
    let rows = scenario_rows(s)?;
    let mut report = sim::summarize(s, rows);
    report.wall_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// Number of rejections over `reps` goodness-of-fit replications.
pub fn gof_rejections(
    prior: &PriorSpec,
    n: usize,
    c: f64,
    beta: f64,
    method: &GofMethod,
    seed: u64,
    reps: usize,
) -> Result<usize> {
    let decisions = par_indexed(reps, |rep| sim::gof_replication(prior, n, c, beta, method, seed, rep))?;
    Ok(decisions.iter().filter(|d| **d == Decision::Reject).count())
}

/// `(ĉ_U, ĉ_U ≥ c₀)` per replication.
pub fn ucb_study(s: &Scenario) -> Result<Vec<(f64, bool)>> {
    Ok(par_indexed(s.reps, |rep| sim::ucb_replication(s, rep))?)
}

/// One row per `(n, seed)` pair, `ns` outer.
pub fn rate_study(prior: &PriorSpec, ns: &[usize], seeds: &[u64]) -> Result<Vec<RateRow>> {
    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    Ok(par_indexed(jobs.len(), |i| sim::rate_replication(prior, jobs[i].0, jobs[i].1))?)
}

/// Calibrated rules for each distinct noise level of `sample`, ascending in
/// `σ`, with the same seeds as [`coverage::hetero_rules`].
pub fn calibrate_rules(
    model: &SmoothModel,
    sample: &Sample,
    beta: f64,
    b: usize,
    seed: u64,
) -> Result<Vec<CoverageRule>> {
    let sigmas = coverage::distinct_sigmas(sample);
    Ok(par_indexed(sigmas.len(), |k| {
        coverage::calibrate_threshold(model, sigmas[k], beta, b, coverage::rule_seed(seed, k))
    })?)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smooth_eb_core::sim::SmoothingMode;

    #[test]
    fn thread_count_does_not_change_results() {
        let mut s = Scenario::table1(2.0, SmoothingMode::Known(1.0));
        s.n = 200;
        s.reps = 3;
        s.calib_size = 2000;
        s.eval_size = 2000;
        let one = pool(1).unwrap().install(|| scenario_rows(&s)).unwrap();
        let three = pool(3).unwrap().install(|| scenario_rows(&s)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
