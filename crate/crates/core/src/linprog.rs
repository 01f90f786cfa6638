//! Feasibility of `lower ≤ A h ≤ upper`, `h ≥ 0`, `Σ h = 1`.
//!
//! A bounded-variable primal simplex on a condensed tableau. Each constraint
//! row gets a variable `r_i = a_iᵀ h` boxed in `[lower_i, upper_i]`, and the
//! simplex row `Σ h = 1` is a variable boxed in `[1, 1]`. Starting from the
//! slack basis (`h = 0`), phase 1 minimizes the total bound violation of the
//! basic variables, moving each entering variable to the first breakpoint.
//! Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots so cycling cannot persist.
//!
//! Large systems are solved with lazy rows: a strided subset of the
//! constraints is solved first, violated rows of the full system are then
//! appended to the warm tableau, until the witness satisfies every row.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;
/// Smallest tableau entry accepted as a pivot.
const PIVOT_TOL: f64 = 1e-9;
/// Rows solved before any lazy additions.
const INITIAL_ROWS: usize = 64;
/// Most violated rows appended per round.
const ROWS_PER_ROUND: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    n: usize,
    m: usize,
    a: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FeasibilityProblem {
    /// `a` is row-major `n × m`.
    pub fn new(a: Vec<f64>, m: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter { name: "columns", value: 0.0 });
        }
        if a.len() % m != 0 {
            return Err(Error::LengthMismatch { what: "matrix", expected: m * (a.len() / m + 1), got: a.len() });
        }
        let n = a.len() / m;
        if lower.len() != n {
            return Err(Error::LengthMismatch { what: "lower", expected: n, got: lower.len() });
        }
        if upper.len() != n {
            return Err(Error::LengthMismatch { what: "upper", expected: n, got: upper.len() });
        }
        if let Some(index) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData { what: "matrix", index });
        }
        for i in 0..n {
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::NonFiniteData { what: "bounds", index: i });
            }
            if lower[i] > upper[i] {
                return Err(Error::InvalidParameter { name: "lower > upper", value: lower[i] - upper[i] });
            }
        }
        Ok(Self { n, m, a, lower, upper })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.m..(i + 1) * self.m]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest violation of any constraint by `h`, including `h ≥ 0` and
    /// `Σ h = 1`.
    pub fn max_violation(&self, h: &[f64]) -> f64 {
        let mut worst = (h.iter().sum::<f64>() - 1.0).abs();
        for &v in h {
            worst = worst.max(-v);
        }
        for i in 0..self.n {
            let r: f64 = self.row(i).iter().zip(h).map(|(a, b)| a * b).sum();
            worst = worst.max(self.lower[i] - r).max(r - self.upper[i]);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// A point satisfying every constraint within `10·tol`, when feasible.
    pub witness: Option<Vec<f64>>,
    pub pivots: usize,
    /// Constraint rows that were part of the final tableau.
    pub rows_used: usize,
}

/// Decides feasibility with lazy row generation.
pub fn feasible(p: &FeasibilityProblem, tol: f64) -> Result<Feasibility> {
    solve(p, tol, true)
}

/// Decides feasibility with every row in the tableau from the start.
pub fn feasible_dense(p: &FeasibilityProblem, tol: f64) -> Result<Feasibility> {
    solve(p, tol, false)
}

fn solve(p: &FeasibilityProblem, tol: f64, lazy: bool) -> Result<Feasibility> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter { name: "tol", value: tol });
    }
    let initial: Vec<usize> = if lazy && p.n > INITIAL_ROWS {
        let stride = p.n.div_ceil(INITIAL_ROWS);
        let mut v: Vec<usize> = (0..p.n).step_by(stride).collect();
        if *v.last().unwrap() != p.n - 1 {
            v.push(p.n - 1);
        }
        v
    } else {
        (0..p.n).collect()
    };
    let mut in_tableau = vec![false; p.n];
    let mut tab = Tableau::new(p.m, p.n + p.m);
    tab.add_row(&vec![1.0; p.m], 1.0, 1.0);
    for &i in &initial {
        tab.add_row(p.row(i), p.lower[i], p.upper[i]);
        in_tableau[i] = true;
    }
    let cap = 50 * (p.n + p.m);
    loop {
        if !tab.phase_one(tol, cap)? {
            return Ok(Feasibility { feasible: false, witness: None, pivots: tab.pivots, rows_used: tab.rows() - 1 });
        }
        let h = tab.witness();
        let mut violated: Vec<(f64, usize)> = (0..p.n)
            .filter(|&i| !in_tableau[i])
            .filter_map(|i| {
                let r: f64 = p.row(i).iter().zip(&h).map(|(a, b)| a * b).sum();
                let v = (p.lower[i] - r).max(r - p.upper[i]);
                (v > tol).then_some((v, i))
            })
            .collect();
        if violated.is_empty() {
            let h = clean_witness(p, h, tol)?;
            return Ok(Feasibility { feasible: true, witness: Some(h), pivots: tab.pivots, rows_used: tab.rows() - 1 });
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violated.iter().take(ROWS_PER_ROUND) {
            tab.add_row(p.row(i), p.lower[i], p.upper[i]);
            in_tableau[i] = true;
        }
    }
}

/// Clips round-off negatives, renormalizes, and verifies the witness.
fn clean_witness(p: &FeasibilityProblem, mut h: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    h.iter_mut().for_each(|v| *v = v.max(0.0));
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        h.iter_mut().for_each(|v| *v /= s);
    }
    if p.max_violation(&h) <= 10.0 * tol {
        Ok(h)
    } else {
        Err(Error::Numerics("simplex witness fails verification"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Basic(usize),
    Nonbasic(usize),
}

/// Condensed tableau: basic values satisfy `x_B = T x_N`.
struct Tableau {
    m: usize,
    /// Bounds per variable; variables `0..m` are `h`, the rest are rows.
    lo: Vec<f64>,
    hi: Vec<f64>,
    slot: Vec<Slot>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    nb_val: Vec<f64>,
    t: Vec<f64>,
    beta: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn new(m: usize, capacity: usize) -> Self {
        let mut slot = Vec::with_capacity(capacity);
        slot.extend((0..m).map(Slot::Nonbasic));
        Self {
            m,
            lo: vec![0.0; m],
            hi: vec![f64::INFINITY; m],
            slot,
            basis: Vec::new(),
            nonbasic: (0..m).collect(),
            nb_val: vec![0.0; m],
            t: Vec::new(),
            beta: Vec::new(),
            pivots: 0,
        }
    }

    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.m..(i + 1) * self.m]
    }

    /// Appends the variable `aᵀh ∈ [lo, hi]` as a new basic row expressed in
    /// the current nonbasic variables.
    fn add_row(&mut self, a: &[f64], lo: f64, hi: f64) {
        let m = self.m;
        let mut row = vec![0.0; m];
        for (q, &aq) in a.iter().enumerate() {
            if aq == 0.0 {
                continue;
            }
            match self.slot[q] {
                Slot::Nonbasic(j) => row[j] += aq,
                Slot::Basic(i) => {
                    for (r, t) in row.iter_mut().zip(&self.t[i * m..(i + 1) * m]) {
                        *r += aq * t;
                    }
                }
            }
        }
        let value = row.iter().zip(&self.nb_val).map(|(r, v)| r * v).sum();
        let var = self.lo.len();
        self.lo.push(lo);
        self.hi.push(hi);
        self.slot.push(Slot::Basic(self.basis.len()));
        self.basis.push(var);
        self.t.extend_from_slice(&row);
        self.beta.push(value);
    }

    fn witness(&self) -> Vec<f64> {
        (0..self.m)
            .map(|q| match self.slot[q] {
                Slot::Basic(i) => self.beta[i],
                Slot::Nonbasic(j) => self.nb_val[j],
            })
            .collect()
    }

    fn refresh_values(&mut self) {
        for i in 0..self.basis.len() {
            self.beta[i] = self.row(i).iter().zip(&self.nb_val).map(|(r, v)| r * v).sum();
        }
    }

    /// `-1` below the lower bound, `+1` above the upper bound, else 0.
    fn status(&self, i: usize, tol: f64) -> f64 {
        let v = self.basis[i];
        if self.beta[i] < self.lo[v] - tol {
            -1.0
        } else if self.beta[i] > self.hi[v] + tol {
            1.0
        } else {
            0.0
        }
    }

    /// Runs phase 1 from the current basis. Returns whether every basic
    /// variable ends within `tol` of its bounds.
    fn phase_one(&mut self, tol: f64, cap: usize) -> Result<bool> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut since_refresh = 0usize;
        let mut d = vec![0.0; m];
        let mut cost = vec![0.0; self.rows()];
        loop {
            if since_refresh >= 100 {
                self.refresh_values();
                since_refresh = 0;
            }
            cost.resize(self.rows(), 0.0);
            let mut any = false;
            for (i, c) in cost.iter_mut().enumerate() {
                *c = self.status(i, tol);
                any |= *c != 0.0;
            }
            if !any {
                return Ok(true);
            }
            if self.pivots >= cap {
                return Err(Error::Numerics("simplex iteration cap reached"));
            }

            // Reduced costs of the infeasibility sum.
            d.iter_mut().for_each(|v| *v = 0.0);
            for (i, &c) in cost.iter().enumerate() {
                if c != 0.0 {
                    for (dj, t) in d.iter_mut().zip(self.row(i)) {
                        *dj += c * t;
                    }
                }
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for (j, &dj) in d.iter().enumerate().take(m) {
                let var = self.nonbasic[j];
                let can_up = self.nb_val[j] < self.hi[var];
                let can_down = self.nb_val[j] > self.lo[var];
                let dir = if dj < -1e-9 && can_up {
                    1.0
                } else if dj > 1e-9 && can_down {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    let better = match enter {
                        None => true,
                        Some((k, _)) => var < self.nonbasic[k],
                    };
                    if better {
                        enter = Some((j, dir));
                    }
                } else if dj.abs() > best {
                    best = dj.abs();
                    enter = Some((j, dir));
                }
            }
            let Some((s, dir)) = enter else {
                self.refresh_values();
                let feasible = (0..self.rows()).all(|i| self.status(i, tol) == 0.0);
                return Ok(feasible);
            };

            // First breakpoint along the entering direction.
            let evar = self.nonbasic[s];
            let mut step = self.hi[evar] - self.lo[evar];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_piv = 0.0;
            for i in 0..self.rows() {
                let rate = self.t[i * m + s] * dir;
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let v = self.basis[i];
                let x = self.beta[i];
                let (lo, hi) = (self.lo[v], self.hi[v]);
                let hit = if rate > 0.0 {
                    if x < lo - tol {
                        Some(((lo - x) / rate, lo))
                    } else if x <= hi + tol {
                        Some((((hi - x) / rate).max(0.0), hi))
                    } else {
                        None
                    }
                } else if x > hi + tol {
                    Some(((x - hi) / -rate, hi))
                } else if x >= lo - tol {
                    Some((((x - lo) / -rate).max(0.0), lo))
                } else {
                    None
                };
                let Some((tt, bound)) = hit else { continue };
                if !tt.is_finite() {
                    continue;
                }
                let piv = self.t[i * m + s].abs();
                let better = if tt < step - 1e-12 {
                    true
                } else if tt <= step + 1e-12 {
                    match leave {
                        None => true,
                        Some((k, _)) => {
                            if bland {
                                v < self.basis[k]
                            } else {
                                piv > leave_piv
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    step = step.min(tt);
                    leave = Some((i, bound));
                    leave_piv = piv;
                }
            }
            if !step.is_finite() {
                return Err(Error::Numerics("unbounded phase-1 direction"));
            }
            degenerate = if step <= 0.0 { degenerate + 1 } else { 0 };
            for i in 0..self.rows() {
                self.beta[i] += self.t[i * m + s] * dir * step;
            }
            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.nb_val[s] = if dir > 0.0 { self.hi[evar] } else { self.lo[evar] };
                }
                Some((r, bound)) => {
                    let enter_val = self.nb_val[s] + dir * step;
                    self.pivot(r, s);
                    self.beta[r] = enter_val;
                    self.nb_val[s] = bound;
                }
            }
            self.pivots += 1;
            since_refresh += 1;
        }
    }

    /// Exchanges basic row `r` with nonbasic column `s`.
    fn pivot(&mut self, r: usize, s: usize) {
        let m = self.m;
        let p = self.t[r * m + s];
        let inv = 1.0 / p;
        let mut prow: Vec<f64> = self.row(r).to_vec();
        for (j, v) in prow.iter_mut().enumerate() {
            *v = if j == s { inv } else { -*v * inv };
        }
        for i in 0..self.rows() {
            if i == r {
                continue;
            }
            let f = self.t[i * m + s];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * m..(i + 1) * m];
            for (j, (x, pr)) in row.iter_mut().zip(&prow).enumerate() {
                if j == s {
                    *x = f * inv;
                } else {
                    *x += f * pr;
                }
            }
        }
        self.t[r * m..(r + 1) * m].copy_from_slice(&prow);
        let bvar = self.basis[r];
        let nvar = self.nonbasic[s];
        self.basis[r] = nvar;
        self.nonbasic[s] = bvar;
        self.slot[nvar] = Slot::Basic(r);
        self.slot[bvar] = Slot::Nonbasic(s);
    }
}
