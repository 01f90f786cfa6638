//! Scalar special functions and Gaussian helpers.
//!
//! Routed through `libm` so the crate stays `no_std`; with the `std`
//! feature the elementary functions use the platform implementations.

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
}

pub use imp::{exp, ln, sqrt};

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Density of `N(0, sd²)` at `x`.
#[inline]
pub fn normal_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    exp(-0.5 * z * z) / (sd * SQRT_2PI)
}

/// Log density of `N(0, sd²)` at `x`.
#[inline]
pub fn normal_ln_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    -0.5 * z * z - ln(sd) - LN_SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * core::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Σ exp(v)`, stable for very negative entries. Returns `-∞` for an
/// empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = v.iter().map(|&t| exp(t - max)).sum();
    max + ln(s)
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + ln(1.0 + exp(lo - hi))
}
