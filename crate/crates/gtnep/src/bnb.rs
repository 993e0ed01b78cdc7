//! Branch-and-bound over linear outer approximations of the cone rows.
//!
//! Every node solves a bounded-variable LP: binaries relaxed to [0,1] with
//! branching fixings applied as column bounds, cone rows replaced by an
//! accumulating pool of tangent cuts. Violated cones are separated at the LP
//! point until the worst violation is below tolerance, nodes are explored
//! best-bound-first, and branching picks the most fractional binary with a
//! documented tie-break (direction binaries before build binaries before
//! valve switches, then lowest index). Single-threaded and deterministic:
//! the same program and parameters reproduce the same node sequence.

use crate::lp::{self, Basis, ColStatus, Limits, LpProblem, LpRow, LpSolution, LpStatus, RowSense};
use crate::model::{ConeForm, ConeRow, LinRow, MathProgram, RowTag, Sense};
use std::collections::BinaryHeap;
use std::time::Instant;

/// Floor on the build variable when deriving a perspective slope point.
const Z_FLOOR: f64 = 1e-6;
/// Tangents flatter than this separate nothing; chord initialization covers.
const ZERO_SLOPE: f64 = 1e-6;
const INT_TOL: f64 = 1e-6;
const ROW_FEAS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct BnbParams {
    /// Optimality gap target for (incumbent − bound)/max(1, |incumbent|).
    pub gap_tol: f64,
    /// Accepted violation of the exact cone rows.
    pub cone_tol: f64,
    pub time_limit_s: f64,
    pub node_limit: usize,
    /// Separation rounds per node.
    pub cut_rounds: usize,
    /// Alternative integral solutions retained for recovery.
    pub pool_size: usize,
    /// Accepted for interface compatibility; the tree search itself runs on
    /// one thread so results are reproducible.
    pub threads: usize,
}

impl Default for BnbParams {
    fn default() -> Self {
        BnbParams {
            gap_tol: 1e-6,
            cone_tol: 1e-6,
            time_limit_s: 3600.0,
            node_limit: usize::MAX,
            cut_rounds: 50,
            pool_size: 5,
            threads: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    LowerBoundOnly,
    UpperBoundOnly,
    Infeasible,
    Unknown,
}

impl SolveStatus {
    /// ASCII token used in CSV output.
    pub fn token(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPT",
            SolveStatus::LowerBoundOnly => "LB",
            SolveStatus::UpperBoundOnly => "UB",
            SolveStatus::Infeasible => "INF",
            SolveStatus::Unknown => "UNK",
        }
    }

    /// Presentation glyph used in rendered tables.
    pub fn glyph(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "★",
            SolveStatus::LowerBoundOnly => "△",
            SolveStatus::UpperBoundOnly => "▽",
            SolveStatus::Infeasible => "†",
            SolveStatus::Unknown => "‡",
        }
    }
}

/// A feasible integral point of the relaxation: full variable vector plus
/// its objective.
#[derive(Clone, Debug)]
pub struct Incumbent {
    pub objective: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    /// Certified lower bound (minimum over pruned-open frontier).
    pub bound: f64,
    /// (incumbent − bound)/max(1, |incumbent|), when both exist.
    pub gap: f64,
    pub nodes: usize,
    pub wall_time_s: f64,
    /// Up to `pool_size` best integral points, incumbent first.
    pub pool: Vec<Incumbent>,
    pub cuts_added: usize,
}

impl SolveReport {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.objective)
    }
}

/// Emits one valid tangent cut per violated cone at the given point.
///
/// Plain cone `γ ≥ w·φ²` at φ̂: `γ ≥ 2wφ̂·φ − wφ̂²`. Perspective cone
/// `z·γ ≥ w·φ²` at slope point φ̄ = φ̂/max(ẑ, floor): `γ ≥ 2wφ̄·φ − wφ̄²·z`
/// (valid for every cone point: at z = 0 the cone forces φ = 0 and the cut
/// reads γ ≥ 0). Near-zero tangent points are skipped; the chord cuts added
/// at the root keep those separable states bounded.
pub fn separate_cone_cuts(x: &[f64], cones: &[ConeRow], cone_tol: f64) -> Vec<LinRow> {
    let mut out = Vec::new();
    for cone in cones {
        match cone.form {
            ConeForm::Plain { gamma, phi, w } => {
                let p = x[phi.0];
                if w * p * p - x[gamma.0] > cone_tol && p.abs() > ZERO_SLOPE {
                    out.push(LinRow {
                        coeffs: vec![(gamma, 1.0), (phi, -2.0 * w * p)],
                        sense: Sense::Ge,
                        rhs: -w * p * p,
                        tag: RowTag::OaCut,
                    });
                }
            }
            ConeForm::Perspective { z, gamma, phi, w } => {
                let p = x[phi.0];
                let zv = x[z.0].max(Z_FLOOR);
                let bar = p / zv;
                if w * p * p - x[z.0] * x[gamma.0] > cone_tol && bar.abs() > ZERO_SLOPE {
                    out.push(LinRow {
                        coeffs: vec![(gamma, 1.0), (phi, -2.0 * w * bar), (z, w * bar * bar)],
                        sense: Sense::Ge,
                        rhs: 0.0,
                        tag: RowTag::OaCut,
                    });
                }
            }
        }
    }
    out
}

/// Verifies an integral point against every linear row and the exact cone
/// rows (not just their accumulated cuts). Returns the verdict and the
/// objective value at the point.
pub fn check_candidate(x: &[f64], prog: &MathProgram, cone_tol: f64) -> (bool, f64) {
    let obj = prog.objective_value(x);
    for row in &prog.lin {
        if row.violation(x) > ROW_FEAS_TOL * (1.0 + row.rhs.abs()) {
            return (false, obj);
        }
    }
    for cone in &prog.cones {
        if cone.violation(x) > cone_tol {
            return (false, obj);
        }
    }
    (true, obj)
}

fn to_lp_sense(s: Sense) -> RowSense {
    match s {
        Sense::Le => RowSense::Le,
        Sense::Eq => RowSense::Eq,
        Sense::Ge => RowSense::Ge,
    }
}

fn to_lp_row(row: &LinRow) -> LpRow {
    LpRow {
        coeffs: row.coeffs.iter().map(|&(v, c)| (v.0, c)).collect(),
        sense: to_lp_sense(row.sense),
        rhs: row.rhs,
    }
}

struct Node {
    fixings: Vec<(usize, f64)>,
    basis: Option<Basis>,
    depth: u32,
}

struct HeapEntry {
    bound: f64,
    id: u64,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert for best-bound-first. Ties go to
        // the newest node, so plateaus are explored depth-first and an
        // incumbent appears early.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.id.cmp(&other.id))
    }
}

struct Search<'a> {
    prog: &'a MathProgram,
    params: BnbParams,
    lp: LpProblem,
    binaries: Vec<usize>,
    /// Slope points already used per cone, to avoid duplicate cuts.
    used_points: Vec<Vec<f64>>,
    incumbent: Option<Incumbent>,
    pool: Vec<Incumbent>,
    heap: BinaryHeap<HeapEntry>,
    next_id: u64,
    nodes: usize,
    cuts_added: usize,
    start: Instant,
    lp_limits: Limits,
}

enum NodeOutcome {
    Pruned,
    Branched,
    Requeued,
}

impl<'a> Search<'a> {
    fn new(prog: &'a MathProgram, params: BnbParams) -> Search<'a> {
        let mut lp = LpProblem::new();
        for v in &prog.vars {
            let (lo, hi) = v.domain.bounds();
            lp.add_col(lo, hi, 0.0);
        }
        for &(v, c) in &prog.objective {
            lp.obj[v.0] += c;
        }
        for row in &prog.lin {
            lp.rows.push(to_lp_row(row));
        }
        let mut search = Search {
            prog,
            params,
            lp,
            binaries: prog.binaries().map(|v| v.0).collect(),
            used_points: vec![Vec::new(); prog.cones.len()],
            incumbent: None,
            pool: Vec::new(),
            heap: BinaryHeap::new(),
            next_id: 0,
            nodes: 0,
            cuts_added: 0,
            start: Instant::now(),
            lp_limits: Limits::default(),
        };
        search.add_root_chords();
        search
    }

    /// Tangents at ±Φ and ±Φ/2 for every cone so the relaxation of γ is
    /// meaningful before any separation runs.
    fn add_root_chords(&mut self) {
        let phi_max = self.prog.phi_max.max(1.0);
        for (c, cone) in self.prog.cones.iter().enumerate() {
            for point in [-phi_max, -phi_max / 2.0, phi_max / 2.0, phi_max] {
                let row = match cone.form {
                    ConeForm::Plain { gamma, phi, w } => LpRow {
                        coeffs: vec![(gamma.0, 1.0), (phi.0, -2.0 * w * point)],
                        sense: RowSense::Ge,
                        rhs: -w * point * point,
                    },
                    ConeForm::Perspective { z, gamma, phi, w } => LpRow {
                        coeffs: vec![(gamma.0, 1.0), (phi.0, -2.0 * w * point), (z.0, w * point * point)],
                        sense: RowSense::Ge,
                        rhs: 0.0,
                    },
                };
                self.lp.rows.push(row);
                self.used_points[c].push(point);
                self.cuts_added += 1;
            }
        }
    }

    fn out_of_budget(&self) -> bool {
        self.nodes >= self.params.node_limit
            || self.start.elapsed().as_secs_f64() > self.params.time_limit_s
    }

    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            Some(inc) => {
                inc.objective - 0.5 * self.params.gap_tol * inc.objective.abs().max(1.0)
            }
            None => f64::INFINITY,
        }
    }

    /// Separation loop at one node. Returns the final LP solution, or None
    /// when the node's LP is infeasible.
    fn solve_node(&mut self, node: &Node) -> Option<LpSolution> {
        // Apply fixings as column bounds.
        let saved: Vec<(usize, f64, f64)> = node
            .fixings
            .iter()
            .map(|&(c, _)| (c, self.lp.cols[c].lo, self.lp.cols[c].hi))
            .collect();
        for &(c, v) in &node.fixings {
            self.lp.cols[c].lo = v;
            self.lp.cols[c].hi = v;
        }

        let mut sol = lp::solve_lp(&self.lp, node.basis.as_ref(), &self.lp_limits);
        let mut rounds = 0;
        while sol.status == LpStatus::Optimal && rounds < self.params.cut_rounds {
            let cuts = self.fresh_cuts(&sol.x);
            if cuts.is_empty() {
                break;
            }
            rounds += 1;
            self.cuts_added += cuts.len();
            sol = lp::resolve_with_added_rows(&mut self.lp, &sol, cuts, &self.lp_limits);
        }

        for (c, lo, hi) in saved {
            self.lp.cols[c].lo = lo;
            self.lp.cols[c].hi = hi;
        }
        match sol.status {
            LpStatus::Optimal => Some(sol),
            _ => None,
        }
    }

    /// Separates violated cones at `x`, deduplicating slope points.
    fn fresh_cuts(&mut self, x: &[f64]) -> Vec<LpRow> {
        let mut rows = Vec::new();
        for (c, cone) in self.prog.cones.iter().enumerate() {
            let (violation, slope_point) = match cone.form {
                ConeForm::Plain { gamma, phi, w } => {
                    (w * x[phi.0] * x[phi.0] - x[gamma.0], x[phi.0])
                }
                ConeForm::Perspective { z, gamma, phi, w } => (
                    w * x[phi.0] * x[phi.0] - x[z.0] * x[gamma.0],
                    x[phi.0] / x[z.0].max(Z_FLOOR),
                ),
            };
            if violation <= self.params.cone_tol || slope_point.abs() <= ZERO_SLOPE {
                continue;
            }
            let dup = self.used_points[c]
                .iter()
                .any(|&p| (p - slope_point).abs() <= 1e-9 * slope_point.abs().max(1.0));
            if dup {
                continue;
            }
            self.used_points[c].push(slope_point);
            let row = match cone.form {
                ConeForm::Plain { gamma, phi, w } => LpRow {
                    coeffs: vec![(gamma.0, 1.0), (phi.0, -2.0 * w * slope_point)],
                    sense: RowSense::Ge,
                    rhs: -w * slope_point * slope_point,
                },
                ConeForm::Perspective { z, gamma, phi, w } => LpRow {
                    coeffs: vec![
                        (gamma.0, 1.0),
                        (phi.0, -2.0 * w * slope_point),
                        (z.0, w * slope_point * slope_point),
                    ],
                    sense: RowSense::Ge,
                    rhs: 0.0,
                },
            };
            rows.push(row);
        }
        rows
    }

    fn max_cone_violation(&self, x: &[f64]) -> f64 {
        self.prog.cones.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }

    /// Most fractional binary; ties broken by kind rank then index.
    fn branch_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, u8, usize)> = None;
        for &c in &self.binaries {
            let frac = (x[c] - x[c].round()).abs();
            if frac <= INT_TOL {
                continue;
            }
            let dist = 0.5 - (x[c] - 0.5).abs(); // larger = more fractional
            let rank = self.prog.vars[c].kind.branch_rank();
            let key = (dist, rank, c);
            let better = match best {
                None => true,
                Some((d, r, i)) => {
                    dist > d + 1e-12
                        || ((dist - d).abs() <= 1e-12 && (rank, c) < (r, i))
                }
            };
            if better {
                best = Some(key);
            }
        }
        best.map(|(_, _, c)| c)
    }

    fn accept_incumbent(&mut self, x: Vec<f64>, objective: f64) {
        let rounded: Vec<u8> = self.binaries.iter().map(|&c| x[c].round() as u8).collect();
        if !self
            .pool
            .iter()
            .any(|p| self.binaries.iter().enumerate().all(|(k, &c)| p.x[c].round() as u8 == rounded[k]))
        {
            self.pool.push(Incumbent { objective, x: x.clone() });
            self.pool.sort_by(|a, b| a.objective.total_cmp(&b.objective));
            self.pool.truncate(self.params.pool_size.max(1));
        }
        let better = match &self.incumbent {
            None => true,
            Some(inc) => objective < inc.objective - 1e-12,
        };
        if better {
            self.incumbent = Some(Incumbent { objective, x });
        }
    }

    /// Fix all binaries to rounded LP values and test the resulting point.
    fn try_rounding(&mut self, x: &[f64], depth: u32) {
        let mut fixings = Vec::with_capacity(self.binaries.len());
        for &c in &self.binaries {
            fixings.push((c, x[c].round()));
        }
        let probe = Node { fixings, basis: None, depth };
        if let Some(sol) = self.solve_node(&probe) {
            let (ok, obj) = check_candidate(&sol.x, self.prog, self.params.cone_tol);
            if ok {
                self.accept_incumbent(sol.x, obj);
            }
        }
    }

    fn process(&mut self, node: Node) -> NodeOutcome {
        let Some(sol) = self.solve_node(&node) else {
            return NodeOutcome::Pruned; // LP infeasible: cuts are valid, so the cone program is too
        };
        if sol.obj >= self.prune_threshold() {
            return NodeOutcome::Pruned;
        }
        match self.branch_var(&sol.x) {
            None => {
                if self.max_cone_violation(&sol.x) > self.params.cone_tol {
                    // Separation budget ran out on an integral point; requeue
                    // with the improved bound and keep cutting next visit.
                    let id = self.next_id;
                    self.next_id += 1;
                    self.heap.push(HeapEntry {
                        bound: sol.obj,
                        id,
                        node: Node {
                            fixings: node.fixings,
                            basis: Some(sol.basis),
                            depth: node.depth,
                        },
                    });
                    return NodeOutcome::Requeued;
                }
                let (ok, obj) = check_candidate(&sol.x, self.prog, self.params.cone_tol);
                if ok {
                    self.accept_incumbent(sol.x, obj);
                }
                NodeOutcome::Pruned
            }
            Some(col) => {
                if self.nodes == 1 || self.nodes % 50 == 0 {
                    self.try_rounding(&sol.x, node.depth);
                    if sol.obj >= self.prune_threshold() {
                        return NodeOutcome::Pruned;
                    }
                }
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((col, v));
                    let id = self.next_id;
                    self.next_id += 1;
                    self.heap.push(HeapEntry {
                        bound: sol.obj,
                        id,
                        node: Node {
                            fixings,
                            basis: Some(sol.basis.clone()),
                            depth: node.depth + 1,
                        },
                    });
                }
                NodeOutcome::Branched
            }
        }
    }

    fn run(mut self) -> SolveReport {
        let root = Node { fixings: Vec::new(), basis: None, depth: 0 };
        self.next_id = 1;
        self.heap.push(HeapEntry { bound: f64::NEG_INFINITY, id: 0, node: root });

        let mut exhausted = true;
        while let Some(entry) = self.heap.pop() {
            // Prune against the current incumbent before solving.
            if entry.bound >= self.prune_threshold() {
                continue;
            }
            if self.out_of_budget() {
                self.heap.push(entry);
                exhausted = false;
                break;
            }
            self.nodes += 1;
            self.process(entry.node);
        }

        let frontier_bound = self.heap.iter().map(|e| e.bound).fold(f64::INFINITY, f64::min);
        let bound = if self.heap.is_empty() {
            match &self.incumbent {
                Some(inc) => inc.objective,
                None => f64::INFINITY,
            }
        } else {
            frontier_bound
        };
        let (status, gap) = match (&self.incumbent, exhausted) {
            (Some(inc), true) => (SolveStatus::Optimal, relative_gap(inc.objective, bound)),
            (Some(inc), false) => {
                let gap = relative_gap(inc.objective, bound);
                if gap <= self.params.gap_tol {
                    (SolveStatus::Optimal, gap)
                } else {
                    (SolveStatus::UpperBoundOnly, gap)
                }
            }
            (None, true) => (SolveStatus::Infeasible, 0.0),
            (None, false) => {
                if bound.is_finite() {
                    (SolveStatus::LowerBoundOnly, f64::INFINITY)
                } else {
                    (SolveStatus::Unknown, f64::INFINITY)
                }
            }
        };
        SolveReport {
            status,
            incumbent: self.incumbent,
            bound,
            gap,
            nodes: self.nodes,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            pool: self.pool,
            cuts_added: self.cuts_added,
        }
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !bound.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

/// Solves a built program (the conic relaxation, or any pure MIP such as the
/// piecewise model, whose cone list is simply empty).
pub fn branch_and_bound(prog: &MathProgram, params: &BnbParams) -> SolveReport {
    Search::new(prog, *params).run()
}

/// Entry point for the conic relaxation.
pub fn solve_misocp(prog: &MathProgram, params: &BnbParams) -> SolveReport {
    debug_assert_eq!(prog.kind, crate::model::ProgramKind::Misocp);
    branch_and_bound(prog, params)
}

/// Root relaxation only: LP plus separation, no branching. Gives a valid
/// global lower bound (or proves infeasibility).
pub fn root_relaxation(prog: &MathProgram, params: &BnbParams) -> SolveReport {
    let mut search = Search::new(prog, *params);
    let root = Node { fixings: Vec::new(), basis: None, depth: 0 };
    let start = search.start;
    let sol = search.solve_node(&root);
    let (status, bound, incumbent) = match sol {
        None => (SolveStatus::Infeasible, f64::INFINITY, None),
        Some(sol) => {
            let integral = search.branch_var(&sol.x).is_none();
            if integral && search.max_cone_violation(&sol.x) <= params.cone_tol {
                let (ok, obj) = check_candidate(&sol.x, prog, params.cone_tol);
                if ok {
                    (SolveStatus::Optimal, sol.obj, Some(Incumbent { objective: obj, x: sol.x }))
                } else {
                    (SolveStatus::LowerBoundOnly, sol.obj, None)
                }
            } else {
                (SolveStatus::LowerBoundOnly, sol.obj, None)
            }
        }
    };
    let gap = incumbent
        .as_ref()
        .map(|i| relative_gap(i.objective, bound))
        .unwrap_or(f64::INFINITY);
    let pool = incumbent.clone().into_iter().collect();
    SolveReport {
        status,
        incumbent,
        bound,
        gap,
        nodes: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        pool,
        cuts_added: search.cuts_added,
    }
}

/// Returns basis statuses in a stable textual form, for debugging dumps.
pub fn basis_summary(basis: &Basis) -> String {
    basis
        .iter()
        .map(|s| match s {
            ColStatus::Basic => 'B',
            ColStatus::AtLower => 'L',
            ColStatus::AtUpper => 'U',
            ColStatus::Free => 'F',
        })
        .collect()
}
