//! Distances between densities on the real line: squared Hellinger, total
//! variation, L₁, squared L₂, and the weighted total variation between two
//! posterior families.
//!
//! Integrals use composite Simpson over the union of both densities'
//! windows. Total variation integrates `|f − g|` piecewise between sign
//! changes of `f − g`, so the kink does not cost accuracy.

use alloc::vec::Vec;

use crate::math;
use crate::npmle;
use crate::posterior::{self, PosteriorAt};
use crate::quad::{self, DEFAULT_NODES};
use crate::{Result, SmoothModel};

/// Width of density windows in standard deviations.
pub const WINDOW_SDS: f64 = 10.0;

/// A density evaluator with a window holding essentially all of its mass.
pub trait Density {
    fn density(&self, t: f64) -> f64;
    fn window(&self) -> (f64, f64);
}

/// A closure density with an explicit window.
#[derive(Debug, Clone, Copy)]
pub struct DensityFn<F> {
    f: F,
    lo: f64,
    hi: f64,
}

impl<F: Fn(f64) -> f64> DensityFn<F> {
    pub fn new(f: F, lo: f64, hi: f64) -> Self {
        Self { f, lo, hi }
    }
}

impl<F: Fn(f64) -> f64> Density for DensityFn<F> {
    fn density(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn window(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// `N(mean, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Density for Gaussian {
    fn density(&self, t: f64) -> f64 {
        math::normal_pdf(t - self.mean, self.sd)
    }
    fn window(&self) -> (f64, f64) {
        (self.mean - WINDOW_SDS * self.sd, self.mean + WINDOW_SDS * self.sd)
    }
}

/// Smooth prior density `g = H ⋆ N(0, c²)`; needs `c > 0`.
#[derive(Debug, Clone, Copy)]
pub struct PriorDensity<'a>(pub &'a SmoothModel);

impl Density for PriorDensity<'_> {
    fn density(&self, t: f64) -> f64 {
        posterior::prior_density(self.0, t).unwrap_or(0.0)
    }
    fn window(&self) -> (f64, f64) {
        let m = self.0;
        (m.base.min_atom() - WINDOW_SDS * m.c(), m.base.max_atom() + WINDOW_SDS * m.c())
    }
}

/// Marginal density `f = H ⋆ N(0, c² + σ²)`.
#[derive(Debug, Clone, Copy)]
pub struct MarginalDensity<'a> {
    pub model: &'a SmoothModel,
    pub sigma: f64,
}

impl Density for MarginalDensity<'_> {
    fn density(&self, t: f64) -> f64 {
        npmle::marginal_density(self.model, self.sigma, t)
    }
    fn window(&self) -> (f64, f64) {
        let s = self.model.sigma_star(self.sigma);
        (self.model.base.min_atom() - WINDOW_SDS * s, self.model.base.max_atom() + WINDOW_SDS * s)
    }
}

impl Density for PosteriorAt {
    fn density(&self, t: f64) -> f64 {
        PosteriorAt::density(self, t)
    }
    fn window(&self) -> (f64, f64) {
        PosteriorAt::window(self, WINDOW_SDS)
    }
}

fn union_window<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G) -> (f64, f64) {
    let (a, b) = f.window();
    let (c, d) = g.window();
    (a.min(c), b.max(d))
}

/// `½ ∫ (√f − √g)²`.
pub fn hellinger_sq<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G) -> f64 {
    let (a, b) = union_window(f, g);
    let v = quad::simpson(
        |t| {
            let d = math::sqrt(f.density(t).max(0.0)) - math::sqrt(g.density(t).max(0.0));
            d * d
        },
        a,
        b,
        DEFAULT_NODES,
    );
    (0.5 * v).clamp(0.0, 1.0)
}

/// `½ ∫ |f − g|`.
pub fn tv<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G) -> f64 {
    tv_with(f, g, DEFAULT_NODES)
}

/// `∫ |f − g|`.
pub fn l1<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G) -> f64 {
    2.0 * tv(f, g)
}

/// `∫ (f − g)²`.
pub fn l2_sq<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G) -> f64 {
    let (a, b) = union_window(f, g);
    quad::simpson(
        |t| {
            let d = f.density(t) - g.density(t);
            d * d
        },
        a,
        b,
        DEFAULT_NODES,
    )
}

fn tv_with<F: Density + ?Sized, G: Density + ?Sized>(f: &F, g: &G, nodes: usize) -> f64 {
    let (a, b) = union_window(f, g);
    let nodes = nodes.max(3) | 1;
    let h = (b - a) / (nodes - 1) as f64;
    let diff = |t: f64| f.density(t) - g.density(t);

    // Split [a, b] at the sign changes of f − g seen on the node grid.
    let mut cuts = Vec::new();
    cuts.push(a);
    let mut prev = diff(a);
    for k in 1..nodes {
        let t = a + k as f64 * h;
        let cur = diff(t);
        if (prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0) {
            let (mut lo, mut hi) = (t - h, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (diff(mid) > 0.0) == (prev > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        if cur != 0.0 {
            prev = cur;
        }
    }
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let seg_nodes = ((len / (b - a) * nodes as f64) as usize).max(33) | 1;
        total += quad::simpson(diff, w[0], w[1], seg_nodes).abs();
    }
    (0.5 * total).clamp(0.0, 1.0)
}

/// Quadrature sizes for [`wtv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WtvOptions {
    pub outer_nodes: usize,
    pub inner_nodes: usize,
}

impl Default for WtvOptions {
    fn default() -> Self {
        Self { outer_nodes: 801, inner_nodes: 2001 }
    }
}

/// Weighted total variation between the posterior families of `a` and `b`
/// at noise level `sigma`: `∫ TV(π_a(·|x), π_b(·|x)) f_w(x) dx` with `f_w`
/// the marginal density of `weight`.
pub fn wtv(a: &SmoothModel, b: &SmoothModel, weight: &SmoothModel, sigma: f64) -> Result<f64> {
    wtv_with(a, b, weight, sigma, &WtvOptions::default())
}

pub fn wtv_with(a: &SmoothModel, b: &SmoothModel, weight: &SmoothModel, sigma: f64, opts: &WtvOptions) -> Result<f64> {
    a.require_smooth()?;
    b.require_smooth()?;
    let marginal = MarginalDensity { model: weight, sigma };
    let (lo, hi) = marginal.window();
    let (xs, ws) = quad::simpson_rule(lo, hi, opts.outer_nodes);
    let mut total = 0.0;
    for (&x, &w) in xs.iter().zip(&ws) {
        let fx = marginal.density(x);
        if fx * w == 0.0 {
            continue;
        }
        let pa = PosteriorAt::new(a, sigma, x)?;
        let pb = PosteriorAt::new(b, sigma, x)?;
        total += w * fx * tv_with(&pa, &pb, opts.inner_nodes);
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DiscreteMixture;

    const N01: Gaussian = Gaussian { mean: 0.0, sd: 1.0 };
    const N11: Gaussian = Gaussian { mean: 1.0, sd: 1.0 };

    #[test]
    fn gaussian_closed_forms() {
        // Hellinger² = 1 − exp(−Δ²/8), TV = 2Φ(Δ/2) − 1 for equal variances.
        let h = 1.0 - (-0.125f64).exp();
        assert!((hellinger_sq(&N01, &N11) - h).abs() < 1e-6);
        let t = 2.0 * statrs_phi(0.5) - 1.0;
        assert!((tv(&N01, &N11) - t).abs() < 1e-6);
        assert!((l1(&N01, &N11) - 2.0 * t).abs() < 2e-6);
        // ∫(φ(t) − φ(t−1))² = (1 − e^{−1/4}) / √π.
        let l2 = (1.0 - (-0.25f64).exp()) / core::f64::consts::PI.sqrt();
        assert!((l2_sq(&N01, &N11) - l2).abs() < 1e-6);
    }

    fn statrs_phi(z: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0).unwrap().cdf(z)
    }

    #[test]
    fn identity_and_separation() {
        for d in [hellinger_sq(&N01, &N01), tv(&N01, &N01), l2_sq(&N01, &N01)] {
            assert!(d.abs() < 1e-15);
        }
        let far = Gaussian { mean: 50.0, sd: 1.0 };
        assert!(hellinger_sq(&N01, &far) > 1.0 - 1e-9);
        assert!(tv(&N01, &far) > 1.0 - 1e-9);
    }

    #[test]
    fn unequal_variances() {
        // TV between N(0,1) and N(0,4): crossings at ±√(8 ln 2 / 3).
        let g = Gaussian { mean: 0.0, sd: 2.0 };
        let r = (8.0 * core::f64::consts::LN_2 / 3.0).sqrt();
        let exact = 2.0 * (statrs_phi(r) - statrs_phi(r / 2.0));
        assert!((tv(&N01, &g) - exact).abs() < 1e-6);
        // Hellinger² = 1 − √(2σ₁σ₂/(σ₁² + σ₂²)).
        assert!((hellinger_sq(&N01, &g) - (1.0 - (4.0f64 / 5.0).sqrt())).abs() < 1e-6);
    }

    #[test]
    fn wtv_identical_models_is_zero() {
        let m = SmoothModel::new(DiscreteMixture::symmetric_two_point(2.0), 1.0).unwrap();
        assert!(wtv(&m, &m, &m, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn wtv_bounded_by_marginal_and_prior_tv() {
        let a = SmoothModel::new(DiscreteMixture::symmetric_two_point(2.0), 1.0).unwrap();
        let b = SmoothModel::new(DiscreteMixture::new(vec![-1.0, 1.5], vec![0.4, 0.6]).unwrap(), 0.8).unwrap();
        let w = wtv(&b, &a, &a, 1.0).unwrap();
        let bound = tv(&MarginalDensity { model: &b, sigma: 1.0 }, &MarginalDensity { model: &a, sigma: 1.0 })
            + tv(&PriorDensity(&b), &PriorDensity(&a));
        assert!(w > 0.0 && w <= bound + 1e-4, "wtv {w} bound {bound}");
    }
}
