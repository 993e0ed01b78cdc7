//! Bounded-variable linear programming by revised simplex.
//!
//! The engine keeps the basis inverse as a product of eta factors grown from
//! the all-slack identity basis, with periodic reinversion. Phase 1 minimizes
//! the total bound violation of the basic variables (composite objective);
//! phase 2 prices with Dantzig's rule and falls back to Bland's rule after a
//! run of degenerate pivots. All tie-breaks are by lowest index, so a solve
//! is bit-reproducible.

use std::fmt;

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
pub const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_THRESHOLD: usize = 1000;
const REINVERT_EVERY: usize = 120;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Column bounds; ±infinity allowed.
#[derive(Clone, Copy, Debug)]
pub struct ColBound {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub cols: Vec<ColBound>,
    pub obj: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_col(&mut self, lo: f64, hi: f64, obj: f64) -> usize {
        self.cols.push(ColBound { lo, hi });
        self.obj.push(obj);
        self.cols.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, sense, rhs });
        self.rows.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Where each column sits. Slack columns are indexed after the structural
/// ones, so a basis taken from a solve stays meaningful when rows are
/// appended later.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

pub type Basis = Vec<ColStatus>;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values.
    pub x: Vec<f64>,
    pub obj: f64,
    /// Row duals y = c_B B⁻¹.
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    /// Phase-1 optimum when status is Infeasible (> 0 certifies).
    pub infeasibility: Option<f64>,
}

impl LpSolution {
    /// Dual objective yᵀb + Σ reduced-cost·bound over nonbasic structurals.
    /// Available only through `solve_lp`'s bookkeeping; recomputed in tests.
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_iters: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_iters: 200_000 }
    }
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        };
        f.write_str(s)
    }
}

struct Eta {
    row: usize,
    d: Vec<(usize, f64)>,
    d_r: f64,
}

struct Simplex<'a> {
    prob: &'a LpProblem,
    n: usize,
    m: usize,
    /// Sparse columns, structural only; slack j has the single entry (j−n, 1).
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    state: Vec<ColStatus>,
    basic: Vec<usize>,
    basic_row: Vec<usize>,
    x: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

enum Step {
    Done,
    Pivoted,
    Unbounded,
    Limit,
}

impl<'a> Simplex<'a> {
    fn new(prob: &'a LpProblem, warm: Option<&Basis>) -> Simplex<'a> {
        let n = prob.cols.len();
        let m = prob.rows.len();
        let mut cols = vec![Vec::new(); n];
        for (r, row) in prob.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    cols[j].push((r, v));
                }
            }
        }
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        let mut cost = vec![0.0; n + m];
        for (j, b) in prob.cols.iter().enumerate() {
            lo.push(b.lo);
            hi.push(b.hi);
            cost[j] = prob.obj[j];
        }
        for row in &prob.rows {
            match row.sense {
                RowSense::Le => {
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                }
                RowSense::Eq => {
                    lo.push(0.0);
                    hi.push(0.0);
                }
                RowSense::Ge => {
                    lo.push(f64::NEG_INFINITY);
                    hi.push(0.0);
                }
            }
        }
        let rhs: Vec<f64> = prob.rows.iter().map(|r| r.rhs).collect();

        let mut state = vec![ColStatus::AtLower; n + m];
        let mut basic = Vec::with_capacity(m);
        let mut ok_warm = false;
        if let Some(w) = warm {
            if w.len() <= n + m {
                // Mapped prefix: same structural columns, old slacks at the
                // same indices; new rows get fresh basic slacks.
                let mut count = 0usize;
                for (j, &s) in w.iter().enumerate() {
                    state[j] = s;
                    if s == ColStatus::Basic {
                        count += 1;
                    }
                }
                for j in w.len()..n + m {
                    state[j] = ColStatus::Basic;
                    count += 1;
                }
                ok_warm = count == m;
            }
        }
        if ok_warm {
            for (j, &s) in state.iter().enumerate() {
                if s == ColStatus::Basic {
                    basic.push(j);
                }
            }
        } else {
            for (j, s) in state.iter_mut().enumerate() {
                *s = if j < n {
                    if lo[j].is_finite() {
                        ColStatus::AtLower
                    } else if hi[j].is_finite() {
                        ColStatus::AtUpper
                    } else {
                        ColStatus::Free
                    }
                } else {
                    ColStatus::Basic
                };
            }
            basic = (n..n + m).collect();
        }
        // Fix up nonbasic states pointing at infinite bounds.
        for j in 0..n + m {
            match state[j] {
                ColStatus::AtLower if !lo[j].is_finite() => {
                    state[j] = if hi[j].is_finite() { ColStatus::AtUpper } else { ColStatus::Free };
                }
                ColStatus::AtUpper if !hi[j].is_finite() => {
                    state[j] = if lo[j].is_finite() { ColStatus::AtLower } else { ColStatus::Free };
                }
                _ => {}
            }
        }

        let mut s = Simplex {
            prob,
            n,
            m,
            cols,
            lo,
            hi,
            cost,
            rhs,
            state,
            basic,
            basic_row: vec![usize::MAX; n + m],
            x: vec![0.0; n + m],
            etas: Vec::new(),
            eta_nnz: 0,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        };
        if !s.reinvert() {
            // Degenerate warm basis; fall back to the slack basis.
            for j in 0..s.n + s.m {
                s.state[j] = if j < s.n {
                    if s.lo[j].is_finite() {
                        ColStatus::AtLower
                    } else if s.hi[j].is_finite() {
                        ColStatus::AtUpper
                    } else {
                        ColStatus::Free
                    }
                } else {
                    ColStatus::Basic
                };
            }
            s.basic = (s.n..s.n + s.m).collect();
            assert!(s.reinvert(), "slack basis is always invertible");
        }
        s
    }

    fn col_entries(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    /// v := B⁻¹ v through the eta chain.
    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let t = v[eta.row] / eta.d_r;
            if t != 0.0 {
                for &(i, di) in &eta.d {
                    v[i] -= di * t;
                }
            }
            v[eta.row] = t;
        }
    }

    /// u := uᵀB⁻¹ through the eta chain, reversed.
    fn btran(&self, u: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = 0.0;
            for &(i, di) in &eta.d {
                s += di * u[i];
            }
            u[eta.row] = (u[eta.row] - s) / eta.d_r;
        }
    }

    /// Rebuilds the eta chain from scratch for the current basis set and
    /// recomputes basic values. Returns false if the basis is singular.
    ///
    /// Basic slacks are unit columns: pivoted on their own rows first they
    /// contribute identity factors that need no eta at all, which confines
    /// fill-in to the structural core of the basis. Structural columns are
    /// processed sparsest-first (a cheap triangularization) with partial
    /// pivoting over the remaining rows.
    fn reinvert(&mut self) -> bool {
        self.etas.clear();
        self.eta_nnz = 0;
        let mut assigned = vec![false; self.m];
        let mut new_basic = vec![usize::MAX; self.m];
        let mut structural: Vec<usize> = Vec::new();
        for &j in &self.basic {
            if j >= self.n {
                let r = j - self.n;
                if !assigned[r] {
                    assigned[r] = true;
                    new_basic[r] = j;
                    continue;
                }
            }
            structural.push(j);
        }
        structural.sort_by_key(|&j| {
            let nnz = if j < self.n { self.cols[j].len() } else { 1 };
            (nnz, j)
        });
        let mut d = vec![0.0; self.m];
        for j in structural {
            d.fill(0.0);
            for (i, v) in self.col_entries(j) {
                d[i] = v;
            }
            self.ftran(&mut d);
            // Partial pivoting over still-unassigned rows.
            let mut best = usize::MAX;
            let mut best_abs = PIVOT_TOL;
            for (r, &dr) in d.iter().enumerate() {
                if !assigned[r] && dr.abs() > best_abs {
                    best = r;
                    best_abs = dr.abs();
                }
            }
            if best == usize::MAX {
                return false;
            }
            self.push_eta(best, &d);
            assigned[best] = true;
            new_basic[best] = j;
        }
        self.basic = new_basic;
        for r in 0..self.m {
            self.basic_row[self.basic[r]] = r;
        }
        self.recompute_values();
        true
    }

    /// Stores an eta factor, dropping numerical dust and unit factors.
    fn push_eta(&mut self, row: usize, d: &[f64]) {
        let sparse: Vec<(usize, f64)> = d
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != row && v.abs() > 1e-12)
            .map(|(i, &v)| (i, v))
            .collect();
        if sparse.is_empty() && (d[row] - 1.0).abs() < 1e-14 {
            return;
        }
        self.eta_nnz += sparse.len() + 1;
        self.etas.push(Eta { row, d: sparse, d_r: d[row] });
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColStatus::AtLower => self.lo[j],
            ColStatus::AtUpper => self.hi[j],
            ColStatus::Free => 0.0,
            ColStatus::Basic => unreachable!(),
        }
    }

    fn recompute_values(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.n + self.m {
            if self.state[j] != ColStatus::Basic {
                let v = self.nonbasic_value(j);
                self.x[j] = v;
                if v != 0.0 {
                    for (i, a) in self.col_entries(j) {
                        r[i] -= a * v;
                    }
                }
            }
        }
        self.ftran(&mut r);
        for row in 0..self.m {
            self.x[self.basic[row]] = r[row];
        }
    }

    /// Phase-1 cost of basic variable in `row`: −1 below lower, +1 above
    /// upper, 0 when within bounds.
    fn phase1_cost(&self, row: usize) -> f64 {
        let j = self.basic[row];
        let v = self.x[j];
        if v < self.lo[j] - FEAS_TOL {
            -1.0
        } else if v > self.hi[j] + FEAS_TOL {
            1.0
        } else {
            0.0
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut w = 0.0;
        for row in 0..self.m {
            let j = self.basic[row];
            let v = self.x[j];
            w += (self.lo[j] - v).max(0.0).min(f64::INFINITY);
            w += (v - self.hi[j]).max(0.0);
        }
        w
    }

    fn duals_for(&self, phase1: bool) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for row in 0..self.m {
            y[row] = if phase1 { self.phase1_cost(row) } else { self.cost[self.basic[row]] };
        }
        self.btran(&mut y);
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        let mut d = c;
        if j < self.n {
            for &(i, v) in &self.cols[j] {
                d -= y[i] * v;
            }
        } else {
            d -= y[j - self.n];
        }
        d
    }

    /// One pricing + ratio-test + pivot round. `phase1` switches both the
    /// pricing costs and the ratio rules.
    fn step(&mut self, phase1: bool, limits: &Limits) -> Step {
        if self.iterations >= limits.max_iters {
            return Step::Limit;
        }
        self.iterations += 1;
        if self.etas.len() > REINVERT_EVERY + self.m / 4 || self.eta_nnz > 24 * self.m + 2048 {
            self.reinvert();
        }

        let y = self.duals_for(phase1);

        // Entering column: Dantzig (largest violation) or Bland (first).
        let mut enter = usize::MAX;
        let mut enter_dir = 1.0;
        let mut best = OPT_TOL;
        for j in 0..self.n + self.m {
            let s = self.state[j];
            if s == ColStatus::Basic {
                continue;
            }
            if self.lo[j] == self.hi[j] && s != ColStatus::Free {
                continue; // fixed
            }
            let d = self.reduced_cost(j, &y, phase1);
            let (elig, dir) = match s {
                ColStatus::AtLower => (d < -OPT_TOL, 1.0),
                ColStatus::AtUpper => (d > OPT_TOL, -1.0),
                ColStatus::Free => (d.abs() > OPT_TOL, if d > 0.0 { -1.0 } else { 1.0 }),
                ColStatus::Basic => unreachable!(),
            };
            if !elig {
                continue;
            }
            if self.bland {
                enter = j;
                enter_dir = dir;
                break;
            }
            if d.abs() > best {
                best = d.abs();
                enter = j;
                enter_dir = dir;
            }
        }
        if enter == usize::MAX {
            return Step::Done;
        }

        // Column update direction.
        let mut d = vec![0.0; self.m];
        for (i, v) in self.col_entries(enter) {
            d[i] = v;
        }
        self.ftran(&mut d);

        // Ratio test. Basic row i moves at rate −σ·d_i.
        let sigma = enter_dir;
        let mut t_best = f64::INFINITY;
        let mut leave_row = usize::MAX;
        let mut leave_to_upper = false;
        for (r, &dr) in d.iter().enumerate() {
            if dr.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.basic[r];
            let rate = -sigma * dr;
            let v = self.x[j];
            // Target bound in the direction of movement. A basic variable
            // currently violating a bound may travel to that bound (phase 1).
            let (limit, to_upper) = if rate > 0.0 {
                if phase1 && v > self.hi[j] + FEAS_TOL {
                    continue; // moving further up from an upper violation is never chosen
                } else if phase1 && v < self.lo[j] - FEAS_TOL {
                    (self.lo[j], false)
                } else {
                    (self.hi[j], true)
                }
            } else if phase1 && v < self.lo[j] - FEAS_TOL {
                continue;
            } else if phase1 && v > self.hi[j] + FEAS_TOL {
                (self.hi[j], true)
            } else {
                (self.lo[j], false)
            };
            if !limit.is_finite() {
                continue;
            }
            let t = (limit - v) / rate;
            let t = t.max(0.0);
            if t < t_best - 1e-12 || (t < t_best + 1e-12 && r < leave_row) {
                t_best = t;
                leave_row = r;
                leave_to_upper = to_upper;
            }
        }

        // Bound flip of the entering variable.
        let flip = self.hi[enter] - self.lo[enter];
        let flip_possible = flip.is_finite() && self.state[enter] != ColStatus::Free;
        if flip_possible && flip < t_best - 1e-12 {
            self.state[enter] =
                if sigma > 0.0 { ColStatus::AtUpper } else { ColStatus::AtLower };
            self.apply_move(enter, sigma, flip, &d);
            if flip <= DEGENERATE_STEP {
                self.bump_degenerate();
            } else {
                self.degenerate_run = 0;
            }
            return Step::Pivoted;
        }

        if leave_row == usize::MAX {
            return Step::Unbounded;
        }

        // Pivot: entering becomes basic in leave_row.
        let t = t_best;
        self.apply_move(enter, sigma, t, &d);
        let leaving = self.basic[leave_row];
        self.state[leaving] = if leave_to_upper { ColStatus::AtUpper } else { ColStatus::AtLower };
        // Snap the leaving variable onto its bound to kill drift.
        self.x[leaving] = if leave_to_upper { self.hi[leaving] } else { self.lo[leaving] };
        self.state[enter] = ColStatus::Basic;
        self.basic[leave_row] = enter;
        self.basic_row[enter] = leave_row;
        self.push_eta(leave_row, &d);

        if t <= DEGENERATE_STEP {
            self.bump_degenerate();
        } else {
            self.degenerate_run = 0;
        }
        Step::Pivoted
    }

    fn bump_degenerate(&mut self) {
        self.degenerate_run += 1;
        if self.degenerate_run >= BLAND_THRESHOLD {
            self.bland = true;
        }
    }

    /// Moves the entering variable by σ·t and updates the basic values.
    fn apply_move(&mut self, enter: usize, sigma: f64, t: f64, d: &[f64]) {
        if t > 0.0 {
            for (r, &dr) in d.iter().enumerate() {
                if dr != 0.0 {
                    let j = self.basic[r];
                    self.x[j] -= sigma * t * dr;
                }
            }
            self.x[enter] += sigma * t;
        }
    }

    fn solve(&mut self, limits: &Limits) -> LpSolution {
        // Phase 1: drive the composite bound violation to zero.
        loop {
            if self.infeasibility() <= FEAS_TOL {
                break;
            }
            match self.step(true, limits) {
                Step::Pivoted => continue,
                Step::Done => {
                    let w = self.infeasibility();
                    if w > FEAS_TOL {
                        return self.finish(LpStatus::Infeasible, Some(w));
                    }
                    break;
                }
                Step::Unbounded => {
                    // Phase-1 objective is bounded below; treat as blocked.
                    let w = self.infeasibility();
                    return self.finish(LpStatus::Infeasible, Some(w));
                }
                Step::Limit => return self.finish(LpStatus::IterationLimit, None),
            }
        }
        // Phase 2.
        loop {
            match self.step(false, limits) {
                Step::Pivoted => {
                    // A pivot can re-expose infeasibility only through drift;
                    // periodic reinversion keeps it in check.
                    continue;
                }
                Step::Done => {
                    self.reinvert();
                    if self.infeasibility() > FEAS_TOL {
                        // Numerical drift pushed a basic out of bounds; one
                        // more composite round fixes it.
                        let w0 = self.infeasibility();
                        loop {
                            match self.step(true, limits) {
                                Step::Pivoted => {
                                    if self.infeasibility() <= FEAS_TOL {
                                        break;
                                    }
                                }
                                _ => break,
                            }
                        }
                        if self.infeasibility() > FEAS_TOL && self.infeasibility() >= w0 {
                            return self.finish(LpStatus::Infeasible, Some(self.infeasibility()));
                        }
                        continue;
                    }
                    return self.finish(LpStatus::Optimal, None);
                }
                Step::Unbounded => return self.finish(LpStatus::Unbounded, None),
                Step::Limit => return self.finish(LpStatus::IterationLimit, None),
            }
        }
    }

    fn finish(&mut self, status: LpStatus, infeasibility: Option<f64>) -> LpSolution {
        let duals = self.duals_for(false);
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let obj = x.iter().zip(&self.prob.obj).map(|(a, b)| a * b).sum();
        LpSolution {
            status,
            x,
            obj,
            duals,
            basis: self.state.clone(),
            iterations: self.iterations,
            infeasibility,
        }
    }
}

/// Solves a bounded-variable LP, optionally warm-starting from a basis of a
/// previous solve over the same columns (possibly with fewer rows).
pub fn solve_lp(prob: &LpProblem, warm: Option<&Basis>, limits: &Limits) -> LpSolution {
    let mut s = Simplex::new(prob, warm);
    s.solve(limits)
}

/// Appends rows to the problem and reoptimizes from the prior basis; the new
/// slacks start basic, so only the added rows can be violated.
pub fn resolve_with_added_rows(
    prob: &mut LpProblem,
    prior: &LpSolution,
    rows: Vec<LpRow>,
    limits: &Limits,
) -> LpSolution {
    for r in rows {
        prob.rows.push(r);
    }
    solve_lp(prob, Some(&prior.basis), limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cols: &[(f64, f64, f64)], rows: &[(&[(usize, f64)], RowSense, f64)]) -> LpProblem {
        let mut p = LpProblem::new();
        for &(lo, hi, c) in cols {
            p.add_col(lo, hi, c);
        }
        for (coeffs, sense, rhs) in rows {
            p.add_row(coeffs.to_vec(), *sense, *rhs);
        }
        p
    }

    #[test]
    fn single_variable_floor() {
        // min x s.t. x >= 3, 0 <= x <= 10
        let p = lp(&[(0.0, 10.0, 1.0)], &[(&[(0, 1.0)], RowSense::Ge, 3.0)]);
        let s = solve_lp(&p, None, &Limits::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.obj - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let p = lp(
            &[(0.0, 10.0, 0.0)],
            &[(&[(0, 1.0)], RowSense::Ge, 3.0), (&[(0, 1.0)], RowSense::Le, 2.0)],
        );
        let s = solve_lp(&p, None, &Limits::default());
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.infeasibility.unwrap() > 0.5);
    }

    #[test]
    fn unbounded_direction_detected() {
        let p = lp(&[(f64::NEG_INFINITY, f64::INFINITY, 1.0)], &[(&[(0, 1.0)], RowSense::Le, 5.0)]);
        let s = solve_lp(&p, None, &Limits::default());
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_maximization_via_negation() {
        // max x + 2y s.t. x + y <= 4, 2x + y >= 2, 0<=x, 0<=y<=3 -> obj 7 at (1,3)
        let p = lp(
            &[(0.0, f64::INFINITY, -1.0), (0.0, 3.0, -2.0)],
            &[
                (&[(0, 1.0), (1, 1.0)], RowSense::Le, 4.0),
                (&[(0, 2.0), (1, 1.0)], RowSense::Ge, 2.0),
            ],
        );
        let s = solve_lp(&p, None, &Limits::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.obj + 7.0).abs() < 1e-9, "obj {}", s.obj);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!((s.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_added_row_keeps_solution() {
        let mut p = lp(&[(0.0, 10.0, 1.0)], &[(&[(0, 1.0)], RowSense::Ge, 3.0)]);
        let s = solve_lp(&p, None, &Limits::default());
        let s2 = resolve_with_added_rows(
            &mut p,
            &s,
            vec![LpRow { coeffs: vec![(0, 1.0)], sense: RowSense::Ge, rhs: 1.0 }],
            &Limits::default(),
        );
        assert_eq!(s2.status, LpStatus::Optimal);
        assert!((s2.obj - s.obj).abs() < 1e-9);
    }

    #[test]
    fn violated_added_row_weakly_increases_objective() {
        let mut p = lp(&[(0.0, 10.0, 1.0)], &[(&[(0, 1.0)], RowSense::Ge, 3.0)]);
        let s = solve_lp(&p, None, &Limits::default());
        let s2 = resolve_with_added_rows(
            &mut p,
            &s,
            vec![LpRow { coeffs: vec![(0, 1.0)], sense: RowSense::Ge, rhs: 5.0 }],
            &Limits::default(),
        );
        assert_eq!(s2.status, LpStatus::Optimal);
        assert!(s2.obj >= s.obj - 1e-9);
        assert!((s2.obj - 5.0).abs() < 1e-9);
    }

    #[test]
    fn determinism_bitwise() {
        let p = lp(
            &[(0.0, 4.0, -3.0), (0.0, 4.0, 1.5), (-2.0, 2.0, -0.5)],
            &[
                (&[(0, 1.0), (1, 2.0), (2, -1.0)], RowSense::Le, 5.0),
                (&[(0, 2.0), (1, -1.0), (2, 1.0)], RowSense::Ge, -1.0),
                (&[(0, 1.0), (1, 1.0), (2, 1.0)], RowSense::Eq, 3.0),
            ],
        );
        let a = solve_lp(&p, None, &Limits::default());
        let b = solve_lp(&p, None, &Limits::default());
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.x, b.x);
        assert_eq!(a.obj, b.obj);
    }
}
