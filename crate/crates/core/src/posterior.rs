//! Smooth prior, posterior densities and empirical Bayes posterior means.
//!
//! For `θ ~ H ⋆ N(0, c²)` and `X | θ ~ N(θ, σ²)` the posterior of `θ` given
//! `X = x` is again a Gaussian mixture:
//!
//! ```text
//! π(θ | x) = Σ_j p_j φ_τ(θ − m_j),
//! p_j ∝ w_j φ_s(x − ξ_j),  m_j = αx + (1 − α)ξ_j,  τ² = ασ²,
//! ```
//!
//! with `s² = c² + σ²` and `α = c²/s²`. Everything here evaluates that
//! representation.

use alloc::vec::Vec;

use crate::math;
use crate::model::{Sample, SmoothModel};
use crate::Result;

/// Posterior components lighter than this fraction of the heaviest are
/// dropped; their total contribution is far below `f64` resolution.
const COMPONENT_CUTOFF: f64 = 1e-17;

/// Prior density `g(θ) = Σ_j w_j φ_c(θ − ξ_j)`.
pub fn prior_density(model: &SmoothModel, theta: f64) -> Result<f64> {
    model.require_smooth()?;
    let c = model.c();
    Ok(model.base.iter().map(|(a, w)| w * math::normal_pdf(theta - a, c)).sum())
}

/// `π(θ | x)` for noise level `sigma`.
pub fn posterior_density(model: &SmoothModel, sigma: f64, x: f64, theta: f64) -> Result<f64> {
    Ok(PosteriorAt::new(model, sigma, x)?.density(theta))
}

/// Posterior mean of the latent atom, `E[ξ | X = x]`.
pub fn posterior_mean_xi(model: &SmoothModel, sigma: f64, x: f64) -> f64 {
    let (ln_p, max) = atom_log_weights(model, sigma, x);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&lp, &a) in ln_p.iter().zip(model.base.atoms()) {
        let p = math::exp(lp - max);
        num += p * a;
        den += p;
    }
    num / den
}

/// Posterior mean of `θ`, `αx + (1 − α) E[ξ | X = x]`.
pub fn posterior_mean_theta(model: &SmoothModel, sigma: f64, x: f64) -> f64 {
    let alpha = model.alpha(sigma);
    alpha * x + (1.0 - alpha) * posterior_mean_xi(model, sigma, x)
}

/// Posterior means `θ̂_i` for every observation, in sample order.
pub fn denoise(model: &SmoothModel, sample: &Sample) -> Vec<f64> {
    sample.iter().map(|(x, s)| posterior_mean_theta(model, s, x)).collect()
}

/// Unnormalized `ln w_j + ln φ_s(x − ξ_j)` and their maximum.
fn atom_log_weights(model: &SmoothModel, sigma: f64, x: f64) -> (Vec<f64>, f64) {
    let s = model.sigma_star(sigma);
    let mut max = f64::NEG_INFINITY;
    let v: Vec<f64> = model
        .base
        .iter()
        .map(|(a, w)| {
            let z = (x - a) / s;
            let l = if w > 0.0 { math::ln(w) - 0.5 * z * z } else { f64::NEG_INFINITY };
            max = max.max(l);
            l
        })
        .collect();
    (v, max)
}

/// The posterior `π(· | x)` of a smooth model, stored as its Gaussian
/// mixture components.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorAt {
    x: f64,
    sigma: f64,
    means: Vec<f64>,
    weights: Vec<f64>,
    sd: f64,
}

impl PosteriorAt {
    pub fn new(model: &SmoothModel, sigma: f64, x: f64) -> Result<Self> {
        model.require_smooth()?;
        let alpha = model.alpha(sigma);
        let (ln_p, max) = atom_log_weights(model, sigma, x);
        let cutoff = math::ln(COMPONENT_CUTOFF);
        let mut means = Vec::new();
        let mut weights = Vec::new();
        for (&lp, &a) in ln_p.iter().zip(model.base.atoms()) {
            if lp - max >= cutoff {
                means.push(alpha * x + (1.0 - alpha) * a);
                weights.push(math::exp(lp - max));
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { x, sigma, means, weights, sd: math::sqrt(alpha) * sigma })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Common standard deviation `√α σ` of the components.
    pub fn component_sd(&self) -> f64 {
        self.sd
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.means.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.components().map(|(m, p)| p * math::normal_pdf(theta - m, self.sd)).sum()
    }

    /// `P(θ ≤ t | x)`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.components().map(|(m, p)| p * math::std_normal_cdf((t - m) / self.sd)).sum()
    }

    /// Posterior mass of `[a, b]`, computed from upper tails when that is
    /// more accurate.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.components()
            .map(|(m, p)| {
                let (za, zb) = ((a - m) / self.sd, (b - m) / self.sd);
                let v = if za > 0.0 {
                    math::std_normal_cdf(-za) - math::std_normal_cdf(-zb)
                } else {
                    math::std_normal_cdf(zb) - math::std_normal_cdf(za)
                };
                p * v
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components().map(|(m, p)| m * p).sum()
    }

    /// Upper bound `1/(τ√(2π))` on the density.
    pub fn density_bound(&self) -> f64 {
        1.0 / (self.sd * math::SQRT_2PI)
    }

    /// `[min m_j − k τ, max m_j + k τ]`.
    pub fn window(&self, k: f64) -> (f64, f64) {
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - k * self.sd, hi + k * self.sd)
    }

    /// Draws `θ ~ π(· | x)`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = crate::rng::uniform(rng);
        let mut acc = 0.0;
        let mut pick = self.means.len() - 1;
        for (j, &p) in self.weights.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = j;
                break;
            }
        }
        self.means[pick] + self.sd * crate::rng::std_normal(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiscreteMixture;
    use crate::quad;
    use crate::Error;
    use alloc::vec;

    fn model(atoms: Vec<f64>, weights: Vec<f64>, c: f64) -> SmoothModel {
        SmoothModel::new(DiscreteMixture::new(atoms, weights).unwrap(), c).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prior_density_values() {
        let d0 = model(vec![0.0], vec![1.0], 1.0);
        assert!(close(prior_density(&d0, 0.0).unwrap(), 0.398_942_3, 1e-7));
        let two = model(vec![-2.0, 2.0], vec![0.5, 0.5], 1.0);
        assert!(close(prior_density(&two, 0.0).unwrap(), 0.053_991_0, 1e-7));
        let flat = model(vec![0.0], vec![1.0], 0.0);
        assert_eq!(prior_density(&flat, 0.0), Err(Error::ZeroSmoothing));
        assert_eq!(posterior_density(&flat, 1.0, 0.0, 0.0), Err(Error::ZeroSmoothing));
    }

    #[test]
    fn conjugate_posterior() {
        let d0 = model(vec![0.0], vec![1.0], 1.0);
        let inv_sqrt_pi = 1.0 / core::f64::consts::PI.sqrt();
        assert!(close(posterior_density(&d0, 1.0, 0.0, 0.0).unwrap(), inv_sqrt_pi, 1e-12));
        assert!(close(posterior_density(&d0, 1.0, 2.0, 1.0).unwrap(), inv_sqrt_pi, 1e-12));
        let two = model(vec![-2.0, 2.0], vec![0.5, 0.5], 1.0);
        for t in [0.3, 1.1, 2.5] {
            let a = posterior_density(&two, 1.0, 0.0, t).unwrap();
            let b = posterior_density(&two, 1.0, 0.0, -t).unwrap();
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn density_matches_bayes_formula() {
        let m = model(vec![-1.0, 0.5, 3.0], vec![0.2, 0.5, 0.3], 0.7);
        let sigma = 1.3;
        let x = 0.9;
        let f = crate::npmle::marginal_density(&m, sigma, x);
        let post = PosteriorAt::new(&m, sigma, x).unwrap();
        for t in [-2.0, 0.0, 0.4, 1.7, 4.0] {
            let direct = math::normal_pdf(x - t, sigma) * prior_density(&m, t).unwrap() / f;
            assert!(close(post.density(t), direct, 1e-13));
        }
    }

    #[test]
    fn posterior_means() {
        let pm = model(vec![1.5], vec![1.0], 1.0);
        for x in [-3.0, 0.0, 2.0] {
            assert!(close(posterior_mean_xi(&pm, 1.0, x), 1.5, 1e-15));
            assert!(close(posterior_mean_theta(&pm, 1.0, x), x / 2.0 + 0.75, 1e-15));
        }
        let two = model(vec![-2.0, 2.0], vec![0.5, 0.5], 1.0);
        assert!(close(posterior_mean_xi(&two, 1.0, 0.0), 0.0, 1e-15));

        let m02 = model(vec![0.0, 2.0], vec![0.5, 0.5], 1.0);
        let s = core::f64::consts::SQRT_2;
        let oracle = 2.0 * math::normal_pdf(0.0, s) / (math::normal_pdf(2.0, s) + math::normal_pdf(0.0, s));
        assert!(close(posterior_mean_xi(&m02, 1.0, 2.0), oracle, 1e-14));
        assert!(close(oracle, 1.462_12, 1e-5));
        assert!(close(posterior_mean_theta(&m02, 1.0, 2.0), 1.0 + 0.5 * oracle, 1e-14));
        assert!(close(1.0 + 0.5 * oracle, 1.731_06, 1e-5));

        // Vanishing smoothing leaves pure mixing-distribution shrinkage.
        let flat = model(vec![0.0, 2.0], vec![0.5, 0.5], 0.0);
        assert_eq!(posterior_mean_theta(&flat, 1.0, 2.0), posterior_mean_xi(&flat, 1.0, 2.0));
    }

    #[test]
    fn denoise_is_pointwise_and_odd() {
        let two = model(vec![-2.0, 2.0], vec![0.5, 0.5], 1.0);
        let s = Sample::homoscedastic(vec![1.3, 1.3, -1.3]).unwrap();
        let d = denoise(&two, &s);
        assert_eq!(d[0], d[1]);
        assert!(close(d[0], -d[2], 1e-14));
    }

    #[test]
    fn normalization_and_mean_by_quadrature() {
        let m = model(vec![-2.0, 0.1, 2.5], vec![0.3, 0.3, 0.4], 0.6);
        for &(x, sigma) in &[(0.0, 1.0), (1.7, 0.5), (-4.0, 2.0)] {
            let post = PosteriorAt::new(&m, sigma, x).unwrap();
            let (a, b) = post.window(10.0);
            let mass = quad::simpson(|t| post.density(t), a, b, quad::DEFAULT_NODES);
            let mean = quad::simpson(|t| t * post.density(t), a, b, quad::DEFAULT_NODES);
            assert!(close(mass, 1.0, 1e-6));
            assert!(close(mean, posterior_mean_theta(&m, sigma, x), 1e-6));
            assert!(close(post.cdf(b) - post.cdf(a), 1.0, 1e-12));
            assert!(close(post.mass(a, b), 1.0, 1e-12));
        }
    }
}
