//! Inference on the largest Gaussian component `c₀` of the prior.
//!
//! The neighborhood procedure finds the largest `σ` such that some
//! `H ⋆ N(0, σ²)` lies within Kolmogorov–Smirnov distance `η` of the
//! empirical CDF. Feasibility at a given `σ` is a linear program over weights
//! on an atom grid, and feasibility is monotone in `σ`, so `σ̂₀` is found by
//! bisection. Then `ĉ₀ = √max(σ̂₀² − σ_floor², 0)` where `σ_floor` is the
//! smallest noise level.
//!
//! With the DKW radius this gives a finite-sample upper confidence bound;
//! with a cross-validated radius it gives a point estimate. A second upper
//! bound comes from a sequence of crossfit split likelihood ratio tests over
//! a descending grid of smoothing scales.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::linprog::{self, FeasibilityProblem};
use crate::math;
use crate::npmle::{self, FitOptions};
use crate::rng;
use crate::{DiscreteMixture, Error, Grid, Result, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodOptions {
    /// Atoms in the equispaced grid on `[X_(1), X_(n)]`.
    pub grid_size: usize,
    /// Bisection stops once the `σ` bracket is narrower than this.
    pub bisect_eps: f64,
    pub cv_folds: usize,
    /// Number of log-spaced radii searched by cross-validation.
    pub cv_grid: usize,
    /// Level defining the largest radius searched by cross-validation.
    pub cv_beta_cap: f64,
    /// Seed of the random fold assignment.
    pub seed: u64,
    pub lp_tol: f64,
}

impl Default for NeighborhoodOptions {
    fn default() -> Self {
        Self {
            grid_size: 200,
            bisect_eps: 1e-3,
            cv_folds: 5,
            cv_grid: 20,
            cv_beta_cap: 0.01,
            seed: 0,
            lp_tol: linprog::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C0Mode {
    PointEstimate,
    Ucb { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct C0Estimate {
    pub sigma0_hat: f64,
    pub c0_hat: f64,
    pub eta_used: f64,
    pub sigma_floor: f64,
    pub mode: C0Mode,
    /// Set when even the lower end of the `σ` bracket was infeasible, or
    /// the bracket was empty; `sigma0_hat` is then the lower end.
    pub at_floor: bool,
}

/// Result of the `σ` bisection at a fixed radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sigma: f64,
    pub at_floor: bool,
    /// Feasible mixing distribution at `sigma`, absent when `at_floor` is
    /// set because nothing was feasible.
    pub witness: Option<DiscreteMixture>,
    pub lp_solves: usize,
}

/// `Φ` mixture CDF `Σ w_j Φ((x − a_j)/σ)`.
fn mixture_cdf(mixture: &DiscreteMixture, sigma: f64, x: f64) -> f64 {
    mixture.iter().map(|(a, w)| w * math::std_normal_cdf((x - a) / sigma)).sum()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and
/// `mixture ⋆ N(0, σ²)`.
pub fn ks_distance_to_mixture(sample: &Sample, mixture: &DiscreteMixture, sigma: f64) -> f64 {
    let mut xs = sample.x().to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = mixture_cdf(mixture, sigma, x);
            let i = i as f64;
            (f - i / n).abs().max((f - (i + 1.0) / n).abs())
        })
        .fold(0.0, f64::max)
}

/// DKW radius `√(ln(2/β)/(2n))`, or the BDKW radius `√(ln(2e/β)/(2n))` for
/// heteroscedastic samples.
pub fn dkw_eta(beta: f64, n: usize, heteroscedastic: bool) -> f64 {
    let num = if heteroscedastic { 2.0 * core::f64::consts::E / beta } else { 2.0 / beta };
    math::sqrt(math::ln(num) / (2.0 * n as f64))
}

/// Bisection bracket for `σ̂₀` and the noise floor.
fn sigma_bracket(sample: &Sample) -> (f64, f64, f64) {
    let var = sample.variance();
    if sample.is_homoscedastic() {
        let floor = sample.sigma()[0];
        (floor, math::sqrt(var.max(0.0)), floor)
    } else {
        let floor = sample.min_sigma();
        let mean_var = sample.sigma().iter().map(|s| s * s).sum::<f64>() / sample.len() as f64;
        let hi2 = var - mean_var + floor * floor;
        (floor, math::sqrt(hi2.max(0.0)), floor)
    }
}

/// The feasibility problem at one `σ`, on sorted data.
struct KsSystem<'a> {
    sorted: &'a [f64],
    grid: Grid,
    eta: f64,
    tol: f64,
}

impl KsSystem<'_> {
    fn check(&self, sigma: f64) -> Result<Option<DiscreteMixture>> {
        let n = self.sorted.len();
        let nf = n as f64;
        if 2.0 * self.eta * nf < 1.0 {
            // No continuous CDF is closer than 1/(2n) to an empirical one.
            return Ok(None);
        }
        let pts = self.grid.points();
        let m = pts.len();
        let mut a = Vec::with_capacity(n * m);
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for (i, &x) in self.sorted.iter().enumerate() {
            a.extend(pts.iter().map(|&t| math::std_normal_cdf((x - t) / sigma)));
            lower.push((i + 1) as f64 / nf - self.eta);
            upper.push(i as f64 / nf + self.eta);
        }
        let p = FeasibilityProblem::new(a, m, lower, upper)?;
        let f = linprog::feasible(&p, self.tol)?;
        match f.witness {
            None => Ok(None),
            Some(h) => {
                let (atoms, weights): (Vec<f64>, Vec<f64>) =
                    pts.iter().zip(&h).filter(|(_, &w)| w > 0.0).map(|(&a, &w)| (a, w)).unzip();
                let s: f64 = weights.iter().sum();
                let weights = weights.into_iter().map(|w| w / s).collect();
                Ok(Some(DiscreteMixture::new(atoms, weights)?))
            }
        }
    }
}

fn sorted_x(sample: &Sample) -> Vec<f64> {
    let mut xs = sample.x().to_vec();
    xs.sort_by(f64::total_cmp);
    xs
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter { name: "eta", value: eta });
    }
    if eta >= 0.5 {
        return Err(Error::EtaTooLarge { eta });
    }
    Ok(())
}

/// Largest `σ` in the bracket for which some `H ⋆ N(0, σ²)` is within KS
/// distance `eta` of the data, to `opts.bisect_eps`.
pub fn sigma0_envelope(sample: &Sample, eta: f64, opts: &NeighborhoodOptions) -> Result<Envelope> {
    sample.require_nonempty()?;
    check_eta(eta)?;
    let (lo, hi, _) = sigma_bracket(sample);
    let xs = sorted_x(sample);
    bisect(&xs, eta, lo, None, hi, opts)
}

/// Bisection on `[lo, hi]`. `known` is a feasible point above `lo` with its
/// witness, used to warm-start a search at a larger radius.
fn bisect(
    xs: &[f64],
    eta: f64,
    lo: f64,
    known: Option<(f64, DiscreteMixture)>,
    hi: f64,
    opts: &NeighborhoodOptions,
) -> Result<Envelope> {
    if !(opts.bisect_eps > 0.0) {
        return Err(Error::InvalidParameter { name: "bisect_eps", value: opts.bisect_eps });
    }
    if opts.grid_size == 0 {
        return Err(Error::InvalidParameter { name: "grid_size", value: 0.0 });
    }
    let grid = Grid::equispaced(xs[0], xs[xs.len() - 1], opts.grid_size)?;
    let sys = KsSystem { sorted: xs, grid, eta, tol: opts.lp_tol };
    let mut solves = 0;
    let warm = known.is_some();
    let (mut lo, mut best) = match known {
        Some((s, w)) => (s, w),
        None => {
            solves += 1;
            match sys.check(lo)? {
                Some(w) => (lo, w),
                None => return Ok(Envelope { sigma: lo, at_floor: true, witness: None, lp_solves: solves }),
            }
        }
    };
    let mut hi = hi;
    if hi <= lo {
        return Ok(Envelope { sigma: lo, at_floor: !warm, witness: Some(best), lp_solves: solves });
    }
    solves += 1;
    if let Some(w) = sys.check(hi)? {
        return Ok(Envelope { sigma: hi, at_floor: false, witness: Some(w), lp_solves: solves });
    }
    while hi - lo >= opts.bisect_eps {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        match sys.check(mid)? {
            Some(w) => {
                lo = mid;
                best = w;
            }
            None => hi = mid,
        }
    }
    Ok(Envelope { sigma: lo, at_floor: false, witness: Some(best), lp_solves: solves })
}

fn estimate_from(sample: &Sample, env: &Envelope, eta: f64, mode: C0Mode) -> C0Estimate {
    let (lo, hi, floor) = sigma_bracket(sample);
    let c2 = env.sigma * env.sigma - floor * floor;
    C0Estimate {
        sigma0_hat: env.sigma,
        c0_hat: math::sqrt(c2.max(0.0)),
        eta_used: eta,
        sigma_floor: floor,
        mode,
        at_floor: env.at_floor || hi <= lo,
    }
}

/// Point estimate of `c₀` at a given radius.
pub fn c0_estimate(sample: &Sample, eta: f64, opts: &NeighborhoodOptions) -> Result<C0Estimate> {
    let env = sigma0_envelope(sample, eta, opts)?;
    Ok(estimate_from(sample, &env, eta, C0Mode::PointEstimate))
}

/// Point estimate of `c₀` at the cross-validated radius.
pub fn c0_estimate_cv(sample: &Sample, opts: &NeighborhoodOptions) -> Result<C0Estimate> {
    let eta = cv_eta(sample, opts.cv_beta_cap, opts)?;
    c0_estimate(sample, eta, opts)
}

/// Upper confidence bound for `c₀` at level `1 − β` from the (B)DKW radius.
pub fn c0_upper_bound(sample: &Sample, beta: f64, opts: &NeighborhoodOptions) -> Result<C0Estimate> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter { name: "beta", value: beta });
    }
    sample.require_nonempty()?;
    let eta = dkw_eta(beta, sample.len(), !sample.is_homoscedastic());
    if eta >= 0.5 {
        return Err(Error::SampleTooSmall { n: sample.len(), eta });
    }
    let env = sigma0_envelope(sample, eta, opts)?;
    Ok(estimate_from(sample, &env, eta, C0Mode::Ucb { beta }))
}

/// Radii searched by cross-validation: log-spaced on `[1/(2n), η̄]`.
pub fn cv_eta_grid(n: usize, beta_cap: f64, heteroscedastic: bool, points: usize) -> Vec<f64> {
    let lo = 1.0 / (2.0 * n as f64);
    let hi = dkw_eta(beta_cap, n, heteroscedastic).min(0.5 - 1e-9).max(lo);
    if points <= 1 {
        return vec![hi];
    }
    let (llo, lhi) = (math::ln(lo), math::ln(hi));
    (0..points)
        .map(|k| if k + 1 == points { hi } else { math::exp(llo + (lhi - llo) * k as f64 / (points - 1) as f64) })
        .collect()
}

/// Random fold labels, sizes differing by at most one.
fn fold_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, 0);
    idx.shuffle(&mut r);
    let mut labels = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        labels[i] = pos % k;
    }
    labels
}

/// Held-out log-likelihood of `validation` under `witness ⋆ N(0, ĉ² + σ_i²)`.
fn held_out_score(validation: &Sample, witness: &DiscreteMixture, c2: f64) -> f64 {
    validation.iter().map(|(x, s)| npmle::ln_mixture_density(witness, math::sqrt(c2 + s * s), x)).sum()
}

/// Cross-validated KS radius maximizing the held-out log-likelihood. Ties go
/// to the smallest radius; radii infeasible on some training fold score
/// `−∞`.
pub fn cv_eta(sample: &Sample, beta_cap: f64, opts: &NeighborhoodOptions) -> Result<f64> {
    let n = sample.len();
    let k = opts.cv_folds;
    if k < 2 || n < 2 * k {
        return Err(Error::DegenerateFolds { folds: k, n });
    }
    if !(beta_cap > 0.0 && beta_cap < 1.0) {
        return Err(Error::InvalidParameter { name: "beta_cap", value: beta_cap });
    }
    let hetero = !sample.is_homoscedastic();
    let etas = cv_eta_grid(n, beta_cap, hetero, opts.cv_grid.max(1));
    let labels = fold_labels(n, k, opts.seed);
    let mut scores = vec![0.0; etas.len()];
    for fold in 0..k {
        let train_idx: Vec<usize> = (0..n).filter(|&i| labels[i] != fold).collect();
        let valid_idx: Vec<usize> = (0..n).filter(|&i| labels[i] == fold).collect();
        if train_idx.is_empty() || valid_idx.is_empty() {
            return Err(Error::DegenerateFolds { folds: k, n });
        }
        let train = sample.select(&train_idx);
        let valid = sample.select(&valid_idx);
        let xs = sorted_x(&train);
        let (lo, hi, floor) = sigma_bracket(&train);
        // The envelope grows with η, so each search starts from the last
        // feasible σ.
        let mut known: Option<(f64, DiscreteMixture)> = None;
        for (e, &eta) in etas.iter().enumerate() {
            let env = bisect(&xs, eta, lo, known.clone(), hi, opts)?;
            match &env.witness {
                None => scores[e] = f64::NEG_INFINITY,
                Some(w) => {
                    let c2 = (env.sigma * env.sigma - floor * floor).max(0.0);
                    scores[e] += held_out_score(&valid, w, c2);
                    known = Some((env.sigma, w.clone()));
                }
            }
        }
    }
    let mut best = 0;
    for e in 1..etas.len() {
        if scores[e] > scores[best] {
            best = e;
        }
    }
    Ok(etas[best])
}

/// How a sample is divided into two halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// Even positions against odd positions.
    EvenOdd,
    /// Seeded random equal halves.
    Random { seed: u64 },
}

impl Split {
    pub fn halves(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        match *self {
            Split::EvenOdd => ((0..n).step_by(2).collect(), (1..n).step_by(2).collect()),
            Split::Random { seed } => {
                let mut idx: Vec<usize> = (0..n).collect();
                let mut r = rng::stream(seed, 0);
                idx.shuffle(&mut r);
                let (a, b) = idx.split_at(n / 2);
                let (mut a, mut b) = (a.to_vec(), b.to_vec());
                a.sort_unstable();
                b.sort_unstable();
                (a, b)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlrBound {
    pub c_upper: f64,
    /// 1-based index of the first retained test, `None` if every test
    /// rejected.
    pub first_retained: Option<usize>,
    /// `ln W_j` of each test performed, in order.
    pub log_w: Vec<f64>,
}

/// Default descending grid from `√max(s² − mean σ², 0)` to 0.
pub fn default_slr_grid(sample: &Sample, points: usize) -> Vec<f64> {
    let mean_var = sample.sigma().iter().map(|s| s * s).sum::<f64>() / sample.len() as f64;
    let top = math::sqrt((sample.variance() - mean_var).max(0.0));
    let points = points.max(2);
    (0..points).map(|j| top * (points - 1 - j) as f64 / (points - 1) as f64).collect()
}

/// Upper confidence bound for `c₀` from sequential crossfit split
/// likelihood ratio tests of `c_j` against `c_{j+1}` on a descending grid.
///
/// Returns `c_{ĵ−1}` for the first retained test `ĵ`. If the first test is
/// retained the bound is `c_1`; if every test rejects it is `c_{K−1}`.
pub fn c0_slr_upper_bound(
    sample: &Sample,
    beta: f64,
    c_grid: &[f64],
    split: Split,
    fit: &FitOptions,
) -> Result<SlrBound> {
    if c_grid.len() < 3 || c_grid.windows(2).any(|w| !(w[0] > w[1])) || c_grid.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::GridTooCoarse { len: c_grid.len() });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter { name: "beta", value: beta });
    }
    if sample.len() < 4 {
        return Err(Error::SplitTooSmall { n: sample.len() });
    }
    let (ia, ib) = split.halves(sample.len());
    let halves = [sample.select(&ia), sample.select(&ib)];
    let threshold = math::ln(1.0 / beta);

    // fits[j][h]: mixture fitted at c_j on half h.
    let mut fits: Vec<[DiscreteMixture; 2]> = Vec::new();
    let fit_at = |j: usize, fits: &mut Vec<[DiscreteMixture; 2]>| -> Result<()> {
        while fits.len() <= j {
            let c = c_grid[fits.len()];
            let a = npmle::solve_npmle(&halves[0], c, fit)?.mixture;
            let b = npmle::solve_npmle(&halves[1], c, fit)?.mixture;
            fits.push([a, b]);
        }
        Ok(())
    };
    let mut log_w = Vec::new();
    for j in 0..c_grid.len() - 1 {
        fit_at(j + 1, &mut fits)?;
        let (c0, c1) = (c_grid[j], c_grid[j + 1]);
        // U: alternative fitted on the other half against the null refit
        // on the evaluation half.
        let u = |eval: usize| -> Result<f64> {
            let other = 1 - eval;
            Ok(npmle::log_likelihood(&fits[j + 1][other], c1, &halves[eval])?
                - npmle::log_likelihood(&fits[j][eval], c0, &halves[eval])?)
        };
        let lw = math::log_add_exp(u(0)?, u(1)?) - core::f64::consts::LN_2;
        log_w.push(lw);
        if !(lw > threshold) {
            let c_upper = if j == 0 { c_grid[0] } else { c_grid[j - 1] };
            return Ok(SlrBound { c_upper, first_retained: Some(j + 1), log_w });
        }
    }
    Ok(SlrBound { c_upper: c_grid[c_grid.len() - 2], first_retained: None, log_w })
}
