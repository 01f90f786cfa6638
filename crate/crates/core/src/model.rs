//! Domain values shared by every module: mixing distributions, smooth
//! models, samples, atom grids and unions of intervals.
//!
//! Everything here is an immutable value after construction.

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::{Error, Result};

/// Atoms closer than this are treated as the same support point.
pub const DUPLICATE_ATOM_TOL: f64 = 1e-12;
/// Weight sums within this distance of 1 are renormalized, beyond it rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-8;

/// A discrete probability distribution on the real line.
///
/// Canonical form: atoms strictly increasing, weights nonnegative and
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMixture {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMixture {
    /// Validates and canonicalizes `atoms`/`weights`: sorts, merges atoms
    /// within [`DUPLICATE_ATOM_TOL`] by adding their weights, and
    /// renormalizes when the sum is within [`WEIGHT_SUM_TOL`] of one but
    /// not already one up to round-off.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch { what: "weights", expected: atoms.len(), got: weights.len() });
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMixture);
        }
        for (index, (&a, &w)) in atoms.iter().zip(&weights).enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFiniteData { what: "atoms", index });
            }
            if !w.is_finite() {
                return Err(Error::NonFiniteData { what: "weights", index });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index, weight: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum { sum });
        }

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&prev) if a - prev <= DUPLICATE_ATOM_TOL => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        // A sum off by summation round-off only is left alone, which keeps
        // canonicalization idempotent and serialization exact.
        if (sum - 1.0).abs() > weights.len() as f64 * f64::EPSILON {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(at: f64) -> Self {
        Self { atoms: alloc::vec![at], weights: alloc::vec![1.0] }
    }

    /// Equal-weight two-point distribution `δ_{-a}/2 + δ_a/2`.
    pub fn symmetric_two_point(a: f64) -> Self {
        if a == 0.0 {
            return Self::point_mass(0.0);
        }
        let a = a.abs();
        Self { atoms: alloc::vec![-a, a], weights: alloc::vec![0.5, 0.5] }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// Same weights, atoms moved by `t`.
    pub fn shifted(&self, t: f64) -> Self {
        Self { atoms: self.atoms.iter().map(|a| a + t).collect(), weights: self.weights.clone() }
    }
}

/// A mixing distribution plus a Gaussian smoothing scale `c ≥ 0`; it stands
/// for the prior `g = H ⋆ N(0, c²)` and every density derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothModel {
    pub base: DiscreteMixture,
    c: f64,
}

impl SmoothModel {
    pub fn new(base: DiscreteMixture, c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::InvalidParameter { name: "c", value: c });
        }
        Ok(Self { base, c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Total standard deviation `√(c² + σ²)` of `X | ξ`.
    pub fn sigma_star(&self, sigma: f64) -> f64 {
        math::sqrt(self.c * self.c + sigma * sigma)
    }

    /// Weight `c²/(c² + σ²)` a posterior mean puts on the observation.
    pub fn alpha(&self, sigma: f64) -> f64 {
        let c2 = self.c * self.c;
        c2 / (c2 + sigma * sigma)
    }

    pub(crate) fn require_smooth(&self) -> Result<()> {
        if self.c > 0.0 {
            Ok(())
        } else {
            Err(Error::ZeroSmoothing)
        }
    }
}

/// Observations with their known noise standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    sigma: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if x.len() != sigma.len() {
            return Err(Error::LengthMismatch { what: "sigma", expected: x.len(), got: sigma.len() });
        }
        for (index, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData { what: "x", index });
            }
        }
        for (index, &s) in sigma.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidSigma { index, value: s });
            }
        }
        Ok(Self { x, sigma })
    }

    /// Unit-noise sample.
    pub fn homoscedastic(x: Vec<f64>) -> Result<Self> {
        let sigma = alloc::vec![1.0; x.len()];
        Self::new(x, sigma)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_homoscedastic(&self) -> bool {
        self.sigma.windows(2).all(|w| w[0] == w[1])
    }

    pub fn min_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_x(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_x(&self) -> f64 {
        self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }

    /// Unbiased sample variance (0 for a single observation).
    pub fn variance(&self) -> f64 {
        let n = self.x.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptySample)
        } else {
            Ok(())
        }
    }

    /// Observations at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            x: indices.iter().map(|&i| self.x[i]).collect(),
            sigma: indices.iter().map(|&i| self.sigma[i]).collect(),
        }
    }

    /// The sample with every observation moved by `t`.
    pub fn shifted(&self, t: f64) -> Self {
        Self { x: self.x.iter().map(|v| v + t).collect(), sigma: self.sigma.clone() }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.sigma.iter().copied())
    }
}

/// Strictly increasing candidate atom locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteData { what: "grid", index });
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| *a - *b <= DUPLICATE_ATOM_TOL);
        Ok(Self { points })
    }

    /// `size` equi-spaced points on `[lo, hi]`; a single midpoint when the
    /// range is degenerate or `size == 1`.
    pub fn equispaced(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::InvalidParameter { name: "grid range", value: hi - lo });
        }
        if size == 0 {
            return Err(Error::InvalidParameter { name: "grid_size", value: 0.0 });
        }
        if size == 1 || hi - lo <= DUPLICATE_ATOM_TOL {
            return Ok(Self { points: alloc::vec![0.5 * (lo + hi)] });
        }
        let step = (hi - lo) / (size - 1) as f64;
        let mut points: Vec<f64> = (0..size).map(|k| lo + step * k as f64).collect();
        points[size - 1] = hi;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of a grid point within `tol` of `value`.
    pub fn position(&self, value: f64, tol: f64) -> Option<usize> {
        let i = self.points.partition_point(|&p| p < value);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.points.len())
            .find(|&j| (self.points[j] - value).abs() <= tol)
    }

    /// The grid with `p` added (no-op if already present).
    pub fn with_point(&self, p: f64) -> Result<Self> {
        let mut points = self.points.clone();
        points.push(p);
        Self::new(points)
    }

    pub fn shifted(&self, t: f64) -> Self {
        Self { points: self.points.iter().map(|p| p + t).collect() }
    }
}

/// A closed interval `[lo, hi]`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// A finite union of disjoint closed intervals, kept sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn real_line() -> Self {
        Self { intervals: alloc::vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    /// Builds the union of arbitrary intervals; overlapping or touching
    /// pieces are merged. Pairs with `lo > hi` or NaN endpoints are dropped.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(pieces: I) -> Self {
        let mut v: Vec<Interval> =
            pieces.into_iter().filter(|(a, b)| a <= b).map(|(a, b)| Interval::new(a, b)).collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => out.push(iv),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total Lebesgue length.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.hi < t);
        i < self.intervals.len() && self.intervals[i].contains(t)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.intervals.iter().chain(&other.intervals).map(|iv| (iv.lo, iv.hi)))
    }

    /// True when every interval of `self` lies inside some interval of
    /// `other`, allowing endpoints to differ by `tol`.
    pub fn is_subset_of(&self, other: &Self, tol: f64) -> bool {
        self.intervals.iter().all(|iv| other.intervals.iter().any(|ov| ov.lo - tol <= iv.lo && iv.hi <= ov.hi + tol))
    }
}

impl fmt::Display for IntervalUnion {
    /// Semicolon-separated `a..b` pieces; empty string for the empty set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}..{}", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}
