//! Grid NPMLE of the mixing distribution.
//!
//! The marginal of `X_i` is `f_{H,s_i}(x) = Σ_j w_j φ_{s_i}(x − ξ_j)` with
//! `s_i = √(c² + σ_i²)`. On a fixed grid of candidate atoms the likelihood is
//! concave in the weights and is maximized by the EM fixed-point iteration
//! `w_j ← w_j ψ_j`, where
//!
//! ```text
//! ψ(ξ) = (1/n) Σ_i φ_{s_i}(X_i − ξ) / f(X_i).
//! ```
//!
//! At the maximizer `ψ ≤ 1` on the whole grid, so `max ψ − 1` is reported
//! as an optimality certificate.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::model::{DiscreteMixture, Grid, Sample, SmoothModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Number of grid points; `None` uses `min(300, n)`.
    pub grid_size: Option<usize>,
    /// Grid padding beyond the data range, in units of `max_i √(c² + σ_i²)`.
    pub grid_pad: f64,
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain of an iteration drops
    /// below this.
    pub tol: f64,
    /// Fitted atoms lighter than this are dropped.
    pub prune_eps: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { grid_size: None, grid_pad: 1.0, max_iter: 2000, tol: 1e-9, prune_eps: 1e-10 }
    }
}

impl FitOptions {
    pub const DEFAULT_GRID_SIZE: usize = 300;

    fn validate(&self) -> Result<()> {
        if self.grid_size == Some(0) {
            return Err(Error::InvalidParameter { name: "grid_size", value: 0.0 });
        }
        if !(self.grid_pad.is_finite() && self.grid_pad >= 0.0) {
            return Err(Error::InvalidParameter { name: "grid_pad", value: self.grid_pad });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter { name: "max_iter", value: 0.0 });
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", value: self.tol });
        }
        if !(self.prune_eps >= 0.0 && self.prune_eps < 1.0) {
            return Err(Error::InvalidParameter { name: "prune_eps", value: self.prune_eps });
        }
        Ok(())
    }

    pub fn effective_grid_size(&self, n: usize) -> usize {
        self.grid_size.unwrap_or_else(|| Self::DEFAULT_GRID_SIZE.min(n.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mixture: DiscreteMixture,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// `max_grid ψ − 1` at the returned mixture.
    pub optimality_gap: f64,
    /// Log-likelihood after each EM iteration, starting from the uniform
    /// initialization.
    pub ll_trace: Vec<f64>,
    pub converged: bool,
    pub grid: Grid,
}

impl FitResult {
    pub fn model(&self, c: f64) -> Result<SmoothModel> {
        SmoothModel::new(self.mixture.clone(), c)
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "c", value: c })
    }
}

/// Equi-spaced candidate atoms covering the data range padded by
/// `grid_pad · max_i √(c² + σ_i²)` on both sides.
pub fn build_grid(sample: &Sample, c: f64, opts: &FitOptions) -> Result<Grid> {
    sample.require_nonempty()?;
    check_c(c)?;
    opts.validate()?;
    let sbar = sample.iter().map(|(_, s)| math::sqrt(c * c + s * s)).fold(0.0, f64::max);
    let pad = opts.grid_pad * sbar;
    Grid::equispaced(sample.min_x() - pad, sample.max_x() + pad, opts.effective_grid_size(sample.len()))
}

/// `ln f_{H,s}(x)` with `s = √(c² + σ²)`, accumulated with a max shift.
pub fn ln_marginal_density(model: &SmoothModel, sigma: f64, x: f64) -> f64 {
    ln_mixture_density(&model.base, model.sigma_star(sigma), x)
}

/// `f_{H,s}(x) = Σ_j w_j φ_s(x − ξ_j)` with `s = √(c² + σ²)`.
pub fn marginal_density(model: &SmoothModel, sigma: f64, x: f64) -> f64 {
    math::exp(ln_marginal_density(model, sigma, x))
}

/// `ln Σ_j w_j φ_s(x − ξ_j)`.
pub(crate) fn ln_mixture_density(mixture: &DiscreteMixture, s: f64, x: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (a, w) in mixture.iter() {
        if w > 0.0 {
            let z = (x - a) / s;
            max = max.max(math::ln(w) - 0.5 * z * z);
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut sum = 0.0;
    for (a, w) in mixture.iter() {
        if w > 0.0 {
            let z = (x - a) / s;
            sum += math::exp(math::ln(w) - 0.5 * z * z - max);
        }
    }
    max + math::ln(sum) - math::ln(s) - math::LN_SQRT_2PI
}

/// `Σ_i ln f_{H,s_i}(X_i)`.
pub fn log_likelihood(mixture: &DiscreteMixture, c: f64, sample: &Sample) -> Result<f64> {
    sample.require_nonempty()?;
    check_c(c)?;
    Ok(sample.iter().map(|(x, s)| ln_mixture_density(mixture, math::sqrt(c * c + s * s), x)).sum())
}

/// Dot product with four independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-scaled Gaussian kernel matrix: `k[i][j] = φ_{s_i}(X_i − ξ_j) / e^{shift_i}`
/// with the shift chosen so each row peaks at 1.
struct Kernel {
    m: usize,
    k: Vec<f64>,
    shift: Vec<f64>,
}

impl Kernel {
    fn new(sample: &Sample, c: f64, points: &[f64]) -> Self {
        let m = points.len();
        let mut k = vec![0.0; sample.len() * m];
        let mut shift = Vec::with_capacity(sample.len());
        for (i, (x, s)) in sample.iter().enumerate() {
            let s = math::sqrt(c * c + s * s);
            let row = &mut k[i * m..(i + 1) * m];
            let mut max = f64::NEG_INFINITY;
            for (r, &p) in row.iter_mut().zip(points) {
                let z = (x - p) / s;
                *r = -0.5 * z * z;
                max = max.max(*r);
            }
            for r in row.iter_mut() {
                *r = math::exp(*r - max);
            }
            shift.push(max - math::ln(s) - math::LN_SQRT_2PI);
        }
        Self { m, k, shift }
    }

    /// The sub-matrix made of the listed columns.
    fn columns(&self, keep: &[usize]) -> Self {
        let mut k = Vec::with_capacity(self.shift.len() * keep.len());
        for row in self.rows() {
            k.extend(keep.iter().map(|&j| row[j]));
        }
        Self { m: keep.len(), k, shift: self.shift.clone() }
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.k.chunks_exact(self.m)
    }

    /// Scaled marginals `f_i e^{-shift_i}` and the log-likelihood.
    fn marginals(&self, w: &[f64], f: &mut [f64]) -> f64 {
        let mut ll = 0.0;
        for ((fi, row), sh) in f.iter_mut().zip(self.rows()).zip(&self.shift) {
            *fi = dot(row, w).max(f64::MIN_POSITIVE);
            ll += math::ln(*fi) + sh;
        }
        ll
    }

    /// `ψ_j` for every grid point given the scaled marginals.
    fn psi(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (row, fi) in self.rows().zip(f) {
            axpy(1.0 / fi, row, out);
        }
        let n = f.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
    }

    /// Marginals and `ψ` in one sweep over the rows; returns the
    /// log-likelihood at `w`.
    fn marginals_and_psi(&self, w: &[f64], psi: &mut [f64]) -> f64 {
        psi.iter_mut().for_each(|v| *v = 0.0);
        let mut ll = 0.0;
        for (row, sh) in self.rows().zip(&self.shift) {
            let fi = dot(row, w).max(f64::MIN_POSITIVE);
            ll += math::ln(fi) + sh;
            axpy(1.0 / fi, row, psi);
        }
        let n = self.shift.len() as f64;
        psi.iter_mut().for_each(|v| *v /= n);
        ll
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (o, r) in y.iter_mut().zip(x) {
        *o += a * r;
    }
}

struct EmState {
    f: Vec<f64>,
    psi: Vec<f64>,
}

impl EmState {
    fn new(n: usize, m: usize) -> Self {
        Self { f: vec![0.0; n], psi: vec![0.0; m] }
    }
}

/// One EM update `w ↦ w·ψ(w)`; returns the log-likelihood at the input.
fn em_map(kernel: &Kernel, w: &[f64], out: &mut [f64], st: &mut EmState) -> f64 {
    let ll = kernel.marginals_and_psi(w, &mut st.psi);
    let mut total = 0.0;
    for ((o, a), p) in out.iter_mut().zip(w).zip(&st.psi) {
        *o = a * p;
        total += *o;
    }
    out.iter_mut().for_each(|v| *v /= total);
    ll
}

/// Two EM updates followed by a squared extrapolation along their
/// differences and one stabilizing EM update. The extrapolated point is kept
/// only if it beats the second plain EM iterate, so the likelihood never
/// falls below that of ordinary EM.
fn squarem_cycle(kernel: &Kernel, w0: &[f64], st: &mut EmState) -> (Vec<f64>, f64) {
    let m = w0.len();
    let mut w1 = vec![0.0; m];
    let mut w2 = vec![0.0; m];
    em_map(kernel, w0, &mut w1, st);
    em_map(kernel, &w1, &mut w2, st);
    let ll2 = kernel.marginals(&w2, &mut st.f);
    let plain = |w2: Vec<f64>, _: &mut EmState| (w2, ll2);

    let mut rr = 0.0;
    let mut vv = 0.0;
    for j in 0..m {
        let r = w1[j] - w0[j];
        let v = w2[j] - 2.0 * w1[j] + w0[j];
        rr += r * r;
        vv += v * v;
    }
    if vv == 0.0 || rr == 0.0 {
        return plain(w2, st);
    }
    let mut alpha = -math::sqrt(rr / vv);
    if alpha > -1.0 {
        return plain(w2, st);
    }
    let mut wx = vec![0.0; m];
    loop {
        let mut ok = true;
        for j in 0..m {
            let r = w1[j] - w0[j];
            let v = w2[j] - 2.0 * w1[j] + w0[j];
            wx[j] = w0[j] - 2.0 * alpha * r + alpha * alpha * v;
            ok &= wx[j] >= 0.0;
        }
        if ok {
            break;
        }
        // Pull the step back toward the plain EM iterate (alpha = -1).
        alpha = 0.5 * (alpha - 1.0);
        if alpha > -1.0 - 1e-3 {
            return plain(w2, st);
        }
    }
    let total: f64 = wx.iter().sum();
    wx.iter_mut().for_each(|v| *v /= total);
    let mut w3 = vec![0.0; m];
    em_map(kernel, &wx, &mut w3, st);
    let ll3 = kernel.marginals(&w3, &mut st.f);
    if ll3.is_finite() && ll3 >= ll2 {
        (w3, ll3)
    } else {
        plain(w2, st)
    }
}

/// Weight below which a column is no longer swept.
const DORMANT_WEIGHT: f64 = 1e-14;
/// A dormant column returns when its `ψ` exceeds `1 + REVIVE_SLACK`.
const REVIVE_SLACK: f64 = 1e-7;
const MAX_REVIVALS: usize = 8;

fn scatter(active: &[usize], wa: &[f64], w: &mut [f64]) {
    w.iter_mut().for_each(|v| *v = 0.0);
    for (&j, &v) in active.iter().zip(wa) {
        w[j] = v;
    }
}

/// Moves a small amount of mass onto the `wake` columns (all have `ψ > 1`,
/// so the likelihood rises for small enough steps). Returns the new
/// log-likelihood, or `None` when no step improves on `ll`.
fn revive(kernel: &Kernel, w: &mut [f64], wake: &[usize], ll: f64, f: &mut [f64]) -> Option<f64> {
    if wake.is_empty() {
        return None;
    }
    let mut eps = 1e-3;
    let mut trial = w.to_vec();
    for _ in 0..20 {
        for (t, v) in trial.iter_mut().zip(w.iter()) {
            *t = v * (1.0 - eps);
        }
        for &j in wake {
            trial[j] = eps / wake.len() as f64;
        }
        let ll_t = kernel.marginals(&trial, f);
        if ll_t > ll {
            w.copy_from_slice(&trial);
            return Some(ll_t);
        }
        eps *= 0.25;
    }
    None
}

/// Fits the NPMLE on the grid from [`build_grid`].
pub fn solve_npmle(sample: &Sample, c: f64, opts: &FitOptions) -> Result<FitResult> {
    let grid = build_grid(sample, c, opts)?;
    solve_npmle_on_grid(sample, c, grid, opts)
}

/// Fits the NPMLE over distributions supported on `grid`.
pub fn solve_npmle_on_grid(sample: &Sample, c: f64, grid: Grid, opts: &FitOptions) -> Result<FitResult> {
    Ok(solve_monitored(sample, c, grid, opts, None)?.0)
}

/// Cycles between likelihood-bound checks in [`npmle_reaches`].
const BOUND_CHECK_EVERY: usize = 4;

/// Whether the maximum log-likelihood over mixtures on `grid` is at least
/// `level`.
///
/// The solver stops as soon as the answer is certain: the current
/// log-likelihood `ℓ` is a lower bound, and by concavity
/// `ℓ + n·(max_grid ψ − 1)` is an upper bound. Undecided runs fall back to
/// comparing the converged fit with `level`.
pub fn npmle_reaches(sample: &Sample, c: f64, grid: Grid, opts: &FitOptions, level: f64) -> Result<bool> {
    let (fit, early) = solve_monitored(sample, c, grid, opts, Some(level))?;
    Ok(early.unwrap_or(fit.log_likelihood >= level))
}

fn solve_monitored(
    sample: &Sample,
    c: f64,
    grid: Grid,
    opts: &FitOptions,
    level: Option<f64>,
) -> Result<(FitResult, Option<bool>)> {
    sample.require_nonempty()?;
    check_c(c)?;
    opts.validate()?;
    let m = grid.len();
    let kernel = Kernel::new(sample, c, grid.points());
    let mut em = EmState::new(sample.len(), m);
    let mut w = vec![1.0 / m as f64; m];

    let mut ll = kernel.marginals(&w, &mut em.f);
    if !ll.is_finite() {
        return Err(Error::Numerics("non-finite log-likelihood at initialization"));
    }
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    // Columns whose weight has collapsed are left out of the sweeps; the
    // full-grid ψ decides at the end whether any of them must come back.
    let mut active: Vec<usize> = (0..m).collect();
    let mut sub: Option<Kernel> = None;
    let mut wa = w.clone();
    let mut revivals = 0;
    let n = sample.len() as f64;
    let mut decided = None;
    while iterations < opts.max_iter {
        if let Some(level) = level {
            if ll >= level {
                decided = Some(true);
                break;
            }
            if iterations % BOUND_CHECK_EVERY == 0 {
                scatter(&active, &wa, &mut w);
                kernel.marginals(&w, &mut em.f);
                kernel.psi(&em.f, &mut em.psi);
                let gap = em.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0;
                if ll + n * gap.max(0.0) < level {
                    decided = Some(false);
                    break;
                }
            }
        }
        let k = sub.as_ref().unwrap_or(&kernel);
        let (next, ll_next) = squarem_cycle(k, &wa, &mut em);
        iterations += 1;
        if !ll_next.is_finite() {
            return Err(Error::Numerics("non-finite log-likelihood during EM"));
        }
        // Every accepted step is at least as good as a plain EM step, which
        // cannot lower the likelihood; a drop is round-off at the optimum.
        let settled = if ll_next < ll {
            true
        } else {
            let gain = (ll_next - ll) / ll.abs().max(f64::MIN_POSITIVE);
            wa = next;
            ll = ll_next;
            trace.push(ll);
            gain < opts.tol
        };

        if settled {
            scatter(&active, &wa, &mut w);
            if revivals < MAX_REVIVALS && active.len() < m {
                kernel.marginals(&w, &mut em.f);
                kernel.psi(&em.f, &mut em.psi);
                let wake: Vec<usize> = (0..m).filter(|&j| w[j] == 0.0 && em.psi[j] > 1.0 + REVIVE_SLACK).collect();
                if let Some(ll_new) = revive(&kernel, &mut w, &wake, ll, &mut em.f) {
                    revivals += 1;
                    ll = ll_new;
                    trace.push(ll);
                    active = (0..m).filter(|&j| w[j] > 0.0).collect();
                    sub = Some(kernel.columns(&active));
                    wa = active.iter().map(|&j| w[j]).collect();
                    continue;
                }
            }
            converged = true;
            break;
        }

        let dormant = wa.iter().filter(|&&v| v < DORMANT_WEIGHT).count();
        if dormant > 0 && dormant * 10 >= wa.len() {
            let keep: Vec<usize> = (0..wa.len()).filter(|&j| wa[j] >= DORMANT_WEIGHT).collect();
            let total: f64 = keep.iter().map(|&j| wa[j]).sum();
            let compact: Vec<f64> = keep.iter().map(|&j| wa[j] / total).collect();
            let k_new = sub.as_ref().unwrap_or(&kernel).columns(&keep);
            let ll_c = k_new.marginals(&compact, &mut em.f);
            if ll_c >= ll {
                active = keep.iter().map(|&j| active[j]).collect();
                sub = Some(k_new);
                wa = compact;
                ll = ll_c;
                trace.push(ll);
            }
        }
    }
    scatter(&active, &wa, &mut w);
    let mut f = em.f;
    let mut psi = em.psi;

    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (&p, &wj) in grid.points().iter().zip(&w) {
        if wj >= opts.prune_eps {
            atoms.push(p);
            weights.push(wj);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    let mixture = DiscreteMixture::new(atoms, weights)?;

    // Certificate and likelihood at the pruned mixture.
    let pruned: Vec<f64> =
        grid.points().iter().zip(&w).map(|(_, &wj)| if wj >= opts.prune_eps { wj / total } else { 0.0 }).collect();
    let log_likelihood = kernel.marginals(&pruned, &mut f);
    kernel.psi(&f, &mut psi);
    let optimality_gap = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0;

    let fit = FitResult { mixture, log_likelihood, iterations, optimality_gap, ll_trace: trace, converged, grid };
    Ok((fit, decided))
}

/// `ψ(ξ)` at each of `points` for the given mixture, evaluated directly in
/// the log domain.
pub fn psi(mixture: &DiscreteMixture, c: f64, sample: &Sample, points: &[f64]) -> Result<Vec<f64>> {
    sample.require_nonempty()?;
    check_c(c)?;
    let mut out = vec![0.0; points.len()];
    for (x, s) in sample.iter() {
        let s = math::sqrt(c * c + s * s);
        let ln_f = ln_mixture_density(mixture, s, x);
        for (o, &p) in out.iter_mut().zip(points) {
            *o += math::exp(math::normal_ln_pdf(x - p, s) - ln_f);
        }
    }
    let n = sample.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Recomputes `max_grid ψ − 1` for a fit without reusing solver state.
pub fn certify_optimality(fit: &FitResult, sample: &Sample, c: f64, grid: &Grid) -> Result<f64> {
    let scale = grid.points().iter().fold(1.0f64, |a, p| a.max(p.abs()));
    for &atom in fit.mixture.atoms() {
        if grid.position(atom, 1e-9 * scale).is_none() {
            return Err(Error::GridMismatch { atom });
        }
    }
    let psi = psi(&fit.mixture, c, sample, grid.points())?;
    Ok(psi.into_iter().fold(f64::NEG_INFINITY, f64::max) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_rule() {
        let s = Sample::homoscedastic(vec![-1.0, 1.0]).unwrap();
        let opts = FitOptions { grid_pad: 0.0, grid_size: Some(3), ..Default::default() };
        assert_eq!(build_grid(&s, 0.0, &opts).unwrap().points(), &[-1.0, 0.0, 1.0]);

        let s = Sample::homoscedastic(vec![0.0]).unwrap();
        assert_eq!(build_grid(&s, 1.0, &FitOptions::default()).unwrap().points(), &[0.0]);

        let s = Sample::homoscedastic(vec![-3.0, 3.0]).unwrap();
        let opts = FitOptions { grid_size: Some(5), ..Default::default() };
        let g = build_grid(&s, 1.0, &opts).unwrap();
        let r2 = core::f64::consts::SQRT_2;
        assert!(close(g.lo(), -3.0 - r2, 1e-12) && close(g.hi(), 3.0 + r2, 1e-12));
        assert!(close(g.points()[1] - g.points()[0], (6.0 + 2.0 * r2) / 4.0, 1e-12));

        assert_eq!(build_grid(&Sample::homoscedastic(vec![]).unwrap(), 1.0, &opts), Err(Error::EmptySample));
    }

    #[test]
    fn marginal_density_values() {
        let d0 = DiscreteMixture::point_mass(0.0);
        let m0 = SmoothModel::new(d0.clone(), 0.0).unwrap();
        assert!(close(marginal_density(&m0, 1.0, 0.0), 0.398_942_280_4, 1e-10));
        let m1 = SmoothModel::new(d0, 1.0).unwrap();
        assert!(close(marginal_density(&m1, 1.0, 0.0), 0.282_094_791_8, 1e-10));
        let two = SmoothModel::new(DiscreteMixture::symmetric_two_point(2.0), 1.0).unwrap();
        // Both atoms sit two units away, so the sum collapses to φ_√2(2).
        let oracle = math::normal_pdf(2.0, core::f64::consts::SQRT_2);
        assert!(close(marginal_density(&two, 1.0, 0.0), oracle, 1e-15));
        assert!(close(oracle, 0.103_776_874_4, 1e-10));
    }

    #[test]
    fn marginal_density_survives_far_tails() {
        let m = SmoothModel::new(DiscreteMixture::point_mass(0.0), 0.0).unwrap();
        let ln = ln_marginal_density(&m, 1.0, 60.0);
        assert!(close(ln, -1800.0 - math::LN_SQRT_2PI, 1e-9));
    }

    #[test]
    fn log_likelihood_values() {
        let d0 = DiscreteMixture::point_mass(0.0);
        let s1 = Sample::homoscedastic(vec![0.0]).unwrap();
        assert!(close(log_likelihood(&d0, 0.0, &s1).unwrap(), -0.918_938_5, 1e-7));
        let s2 = Sample::homoscedastic(vec![0.0, 0.0]).unwrap();
        let one = math::ln(marginal_density(&SmoothModel::new(d0.clone(), 1.0).unwrap(), 1.0, 0.0));
        assert!(close(log_likelihood(&d0, 1.0, &s2).unwrap(), 2.0 * one, 1e-12));
        assert!(close(2.0 * one, -2.531_024_2, 1e-7));
        assert_eq!(log_likelihood(&d0, 1.0, &Sample::homoscedastic(vec![]).unwrap()), Err(Error::EmptySample));
    }

    #[test]
    fn identical_observations_give_point_mass() {
        let s = Sample::homoscedastic(vec![0.0; 4]).unwrap();
        let opts = FitOptions { grid_size: Some(5), ..Default::default() };
        let fit = solve_npmle(&s, 1.0, &opts).unwrap();
        let grid = &fit.grid;
        let j = grid.position(0.0, 1e-12).unwrap();
        let wj = fit.mixture.atoms().iter().position(|&a| a == grid.points()[j]).map(|k| fit.mixture.weights()[k]);
        assert!(wj.unwrap() >= 1.0 - 1e-6, "{:?}", fit.mixture);
    }

    /// Brute-force maximization of f(−1)f(1) over weight triples on a
    /// 1e-4 lattice of the 2-simplex.
    fn lattice_optimum() -> [f64; 3] {
        let phi = |d: f64| math::normal_pdf(d, 1.0);
        let k = [[phi(0.0), phi(1.0), phi(2.0)], [phi(2.0), phi(1.0), phi(0.0)]];
        let steps = 10_000;
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let w = [a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
                let f0: f64 = (0..3).map(|j| w[j] * k[0][j]).sum();
                let f1: f64 = (0..3).map(|j| w[j] * k[1][j]).sum();
                let v = f0.ln() + f1.ln();
                if v > best.0 {
                    best = (v, w);
                }
            }
        }
        best.1
    }

    #[test]
    fn two_point_sample_matches_lattice_search() {
        let s = Sample::homoscedastic(vec![-1.0, 1.0]).unwrap();
        let grid = Grid::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let opts = FitOptions { tol: 1e-14, max_iter: 100_000, prune_eps: 0.0, ..Default::default() };
        let fit = solve_npmle_on_grid(&s, 0.0, grid.clone(), &opts).unwrap();
        let oracle = lattice_optimum();
        for (j, &p) in grid.points().iter().enumerate() {
            let w = fit.mixture.atoms().iter().position(|&a| a == p).map_or(0.0, |k| fit.mixture.weights()[k]);
            assert!(close(w, oracle[j], 1e-3), "atom {p}: {w} vs {}", oracle[j]);
        }
    }

    fn two_component_sample(n: usize, seed: u64) -> Sample {
        let model = SmoothModel::new(DiscreteMixture::symmetric_two_point(2.0), 1.0).unwrap();
        let prior = rng::PriorSampler::new(&model);
        let mut r = rng::stream(seed, 0);
        let x = (0..n).map(|_| prior.sample(&mut r) + rng::std_normal(&mut r)).collect();
        Sample::homoscedastic(x).unwrap()
    }

    #[test]
    fn certificate_and_monotone_trace() {
        let s = two_component_sample(1000, 11);
        let fit = solve_npmle(&s, 1.0, &FitOptions::default()).unwrap();
        assert!(fit.optimality_gap <= 1e-3, "gap {}", fit.optimality_gap);
        assert!(fit.ll_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(fit.mixture.len() <= s.len());
        let recomputed = certify_optimality(&fit, &s, 1.0, &fit.grid).unwrap();
        assert!(close(recomputed, fit.optimality_gap, 1e-8));
    }

    #[test]
    fn certificate_flags_bad_mixtures() {
        let s = two_component_sample(400, 5);
        let grid = build_grid(&s, 1.0, &FitOptions::default()).unwrap();
        let uniform = DiscreteMixture::new(grid.points().to_vec(), vec![1.0 / grid.len() as f64; grid.len()]).unwrap();
        let psi_uniform = psi(&uniform, 1.0, &s, grid.points()).unwrap();
        assert!(psi_uniform.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0 > 0.01);

        let wrong = DiscreteMixture::point_mass(grid.points()[0]);
        let psi_wrong = psi(&wrong, 1.0, &s, grid.points()).unwrap();
        assert!(psi_wrong.iter().copied().fold(f64::NEG_INFINITY, f64::max) > 10.0);

        let off_grid = FitResult {
            mixture: DiscreteMixture::point_mass(grid.points()[0] + 1e-3),
            log_likelihood: 0.0,
            iterations: 0,
            optimality_gap: 0.0,
            ll_trace: vec![],
            converged: false,
            grid: grid.clone(),
        };
        assert!(matches!(certify_optimality(&off_grid, &s, 1.0, &grid), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn scale_consistency_and_shift_equivariance() {
        let base = two_component_sample(200, 3);
        let sig: Vec<f64> = (0..base.len()).map(|i| 0.5 + (i % 4) as f64 * 0.25).collect();
        let c = 0.8f64;
        let s = Sample::new(base.x().to_vec(), sig.clone()).unwrap();
        // Same expression the solver uses, so both paths see identical σ*.
        let star: Vec<f64> = sig.iter().map(|v| (c * c + v * v).sqrt()).collect();
        let s_star = Sample::new(base.x().to_vec(), star).unwrap();
        let opts = FitOptions { grid_size: Some(80), ..Default::default() };
        let a = solve_npmle(&s, c, &opts).unwrap();
        let b = solve_npmle(&s_star, 0.0, &opts).unwrap();
        assert_eq!(a.mixture.len(), b.mixture.len());
        for ((x1, w1), (x2, w2)) in a.mixture.iter().zip(b.mixture.iter()) {
            assert!(close(x1, x2, 1e-10) && close(w1, w2, 1e-10));
        }

        // Dyadic data, grid and shift keep every difference x − ξ exact.
        let q = |v: f64| (v * 64.0).round() / 64.0;
        let xs: Vec<f64> = base.x().iter().map(|&v| q(v)).collect();
        let s = Sample::new(xs, sig).unwrap();
        let grid = Grid::new((-96..=96).map(|k| k as f64 / 16.0).collect()).unwrap();
        let t = 3.25;
        let fa = solve_npmle_on_grid(&s, c, grid.clone(), &opts).unwrap();
        let fb = solve_npmle_on_grid(&s.shifted(t), c, grid.shifted(t), &opts).unwrap();
        assert_eq!(fa.mixture.len(), fb.mixture.len());
        for ((x1, w1), (x2, w2)) in fa.mixture.iter().zip(fb.mixture.iter()) {
            assert!(close(x1 + t, x2, 1e-10) && close(w1, w2, 1e-10));
        }
    }
}
