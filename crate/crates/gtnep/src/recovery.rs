//! Feasibility recovery: fix the discrete design from a relaxation incumbent
//! and solve the remaining nonlinear network system.
//!
//! With binaries fixed, what is left is classical network analysis: flow
//! conservation, the drop equality on active pipes, and ratio windows at
//! active machines. The solver is a projected damped Gauss-Newton on the
//! residual vector with Armijo backtracking on ‖r‖²; machine ratios enter as
//! bounded slack variables so projection keeps them inside their windows.

use crate::bnb::Incumbent;
use crate::model::{MathProgram, RowTag, VarKind};
use crate::network::{ArcKind, ArcStatus, GasNetwork};
use std::collections::BTreeMap;

/// Discrete design extracted from an integral relaxation point: direction,
/// and build/switch state per arc.
#[derive(Clone, Debug)]
pub struct Assignment {
    /// y⁺ per arc.
    pub forward: Vec<bool>,
    /// Arc is present and open: existing non-valves always; candidates by z;
    /// valves by v.
    pub active: Vec<bool>,
}

impl Assignment {
    /// Reads the binaries of `prog` out of an integral point.
    pub fn from_point(net: &GasNetwork, prog: &MathProgram, x: &[f64]) -> Assignment {
        let mut forward = Vec::with_capacity(net.arcs().len());
        let mut active = Vec::with_capacity(net.arcs().len());
        for (a, arc) in net.arcs().iter().enumerate() {
            let yp = prog.var(VarKind::YPlus(a)).expect("direction var");
            forward.push(x[yp.0] >= 0.5);
            let on = match (&arc.status, &arc.kind) {
                (ArcStatus::Candidate { .. }, k) if k.is_pipe_family() => {
                    x[prog.var(VarKind::PipeBuild(a)).expect("zp").0] >= 0.5
                }
                (ArcStatus::Candidate { .. }, ArcKind::Compressor { .. }) => {
                    x[prog.var(VarKind::CompBuild(a)).expect("zc").0] >= 0.5
                }
                (ArcStatus::Existing, k) if k.is_valve_family() => {
                    x[prog.var(VarKind::ValveOpen(a)).expect("v").0] >= 0.5
                }
                _ => true,
            };
            active.push(on);
        }
        Assignment { forward, active }
    }

    /// Expansion cost of the design.
    pub fn cost(&self, net: &GasNetwork) -> f64 {
        net.arcs()
            .iter()
            .enumerate()
            .filter(|(a, arc)| self.active[*a] && arc.status.is_candidate())
            .map(|(_, arc)| arc.status.cost())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryStatus {
    Feasible,
    Failed,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub status: RecoveryStatus,
    /// Squared pressures per node (best attempt if Failed).
    pub beta: Vec<f64>,
    /// Fluxes per arc, zero on inactive arcs.
    pub phi: Vec<f64>,
    pub max_residual: f64,
    /// Expansion cost of the recovered design (fixed by the binaries).
    pub objective: f64,
    /// Design the result belongs to.
    pub assignment: Option<Assignment>,
    /// Pool entries tried before success (or total tried on failure).
    pub attempts: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct RecoveryOptions {
    pub max_iters: usize,
    pub damping_floor: f64,
    /// Base residual tolerance, scaled by max(1, w·Φ²).
    pub res_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions { max_iters: 200, damping_floor: 1e-10, res_tol: 1e-6 }
    }
}

/// One fixed-design nonlinear system. In strict mode pipe fluxes are
/// sign-boxed by the fixed directions and the drop law reads s·w·φ²; in
/// refine mode pipes obey the signed law w·φ|φ| with free flux sign and the
/// directions are recovered from the solution.
struct FixedSystem<'a> {
    net: &'a GasNetwork,
    assignment: &'a Assignment,
    free_pipes: bool,
    /// Variable layout: β per node, then φ per active arc, then a ratio
    /// slack per active machine with a proper window.
    n_nodes: usize,
    phi_var: Vec<Option<usize>>,
    ratio_var: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Residual layout: conservation per node, then one relation per active
    /// arc.
    arc_rows: Vec<Option<usize>>,
    n_res: usize,
}

impl<'a> FixedSystem<'a> {
    fn new(net: &'a GasNetwork, assignment: &'a Assignment, free_pipes: bool) -> FixedSystem<'a> {
        let n_nodes = net.nodes().len();
        let phi_max = net.phi_max();
        let mut lo: Vec<f64> = net.nodes().iter().map(|n| n.beta_lo).collect();
        let mut hi: Vec<f64> = net.nodes().iter().map(|n| n.beta_hi).collect();
        let mut phi_var = vec![None; net.arcs().len()];
        let mut ratio_var = vec![None; net.arcs().len()];
        for (a, _) in net.arcs().iter().enumerate() {
            if !assignment.active[a] {
                continue;
            }
            phi_var[a] = Some(lo.len());
            if free_pipes && net.arcs()[a].kind.is_pipe_family() {
                lo.push(-phi_max);
                hi.push(phi_max);
            } else if assignment.forward[a] {
                lo.push(0.0);
                hi.push(phi_max);
            } else {
                lo.push(-phi_max);
                hi.push(0.0);
            }
        }
        for (a, arc) in net.arcs().iter().enumerate() {
            if !assignment.active[a] {
                continue;
            }
            if let Some((alo, ahi)) = arc.kind.ratio_bounds() {
                if alo != ahi {
                    ratio_var[a] = Some(lo.len());
                    lo.push(alo * alo);
                    hi.push(ahi * ahi);
                }
            }
        }
        let mut arc_rows = vec![None; net.arcs().len()];
        let mut n_res = n_nodes;
        for (a, arc) in net.arcs().iter().enumerate() {
            if assignment.active[a] && (arc.kind.is_pipe_family() || arc.kind.ratio_bounds().is_some()) {
                arc_rows[a] = Some(n_res);
                n_res += 1;
            }
        }
        FixedSystem { net, assignment, free_pipes, n_nodes, phi_var, ratio_var, lo, hi, arc_rows, n_res }
    }

    fn n_vars(&self) -> usize {
        self.lo.len()
    }

    fn project(&self, x: &mut [f64]) {
        for (v, x) in x.iter_mut().enumerate() {
            *x = x.clamp(self.lo[v], self.hi[v]);
        }
    }

    fn residuals(&self, x: &[f64], r: &mut [f64]) {
        r.fill(0.0);
        for (i, n) in self.net.nodes().iter().enumerate() {
            r[i] = -n.q;
        }
        for (a, _) in self.net.arcs().iter().enumerate() {
            let Some(pv) = self.phi_var[a] else { continue };
            let (i, j) = self.net.arc_endpoints(a).expect("validated");
            r[i] += x[pv];
            r[j] -= x[pv];
        }
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let Some(row) = self.arc_rows[a] else { continue };
            let (i, j) = self.net.arc_endpoints(a).expect("validated");
            let s = if self.assignment.forward[a] { 1.0 } else { -1.0 };
            if arc.kind.is_pipe_family() {
                let pv = self.phi_var[a].expect("active pipe has a flux var");
                r[row] = if self.free_pipes {
                    x[i] - x[j] - arc.kind.w() * x[pv] * x[pv].abs()
                } else {
                    x[i] - x[j] - s * arc.kind.w() * x[pv] * x[pv]
                };
            } else {
                // Machine ratio: downstream = t · upstream along the flow.
                let (up, dn) = if s > 0.0 { (i, j) } else { (j, i) };
                let t = match self.ratio_var[a] {
                    Some(tv) => x[tv],
                    None => {
                        let (alo, _) = arc.kind.ratio_bounds().expect("machine");
                        alo * alo
                    }
                };
                r[row] = x[dn] - t * x[up];
            }
        }
    }

    /// Dense Jacobian (row-major n_res × n_vars). Sizes here are tiny.
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) {
        let nv = self.n_vars();
        jac.fill(0.0);
        for (a, _) in self.net.arcs().iter().enumerate() {
            let Some(pv) = self.phi_var[a] else { continue };
            let (i, j) = self.net.arc_endpoints(a).expect("validated");
            jac[i * nv + pv] += 1.0;
            jac[j * nv + pv] -= 1.0;
        }
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let Some(row) = self.arc_rows[a] else { continue };
            let (i, j) = self.net.arc_endpoints(a).expect("validated");
            let s = if self.assignment.forward[a] { 1.0 } else { -1.0 };
            if arc.kind.is_pipe_family() {
                let pv = self.phi_var[a].expect("active pipe");
                jac[row * nv + i] = 1.0;
                jac[row * nv + j] = -1.0;
                jac[row * nv + pv] = if self.free_pipes {
                    -2.0 * arc.kind.w() * x[pv].abs()
                } else {
                    -2.0 * s * arc.kind.w() * x[pv]
                };
            } else {
                let (up, dn) = if s > 0.0 { (i, j) } else { (j, i) };
                let t = match self.ratio_var[a] {
                    Some(tv) => {
                        jac[row * nv + tv] = -x[up];
                        x[tv]
                    }
                    None => {
                        let (alo, _) = arc.kind.ratio_bounds().expect("machine");
                        alo * alo
                    }
                };
                jac[row * nv + dn] = 1.0;
                jac[row * nv + up] -= t;
            }
        }
    }

    fn initial_point(&self, prog: &MathProgram, inc: &Incumbent) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        for i in 0..self.n_nodes {
            let id = prog.var(VarKind::Beta(i)).expect("beta var");
            x[i] = inc.x[id.0];
        }
        for (a, _) in self.net.arcs().iter().enumerate() {
            if let Some(pv) = self.phi_var[a] {
                let id = prog.var(VarKind::Phi(a)).expect("phi var");
                x[pv] = inc.x[id.0];
            }
        }
        for (a, _) in self.net.arcs().iter().enumerate() {
            if let Some(tv) = self.ratio_var[a] {
                let (i, j) = self.net.arc_endpoints(a).expect("validated");
                let (up, dn) = if self.assignment.forward[a] { (i, j) } else { (j, i) };
                x[tv] = if x[up] > 1e-9 { x[dn] / x[up] } else { 1.0 };
            }
        }
        self.project(&mut x);
        x
    }
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solves (JᵀJ + λI)d = −Jᵀr in place; returns false when the ridge system
/// is numerically singular even after boosting λ.
fn normal_step(jac: &[f64], r: &[f64], n_res: usize, nv: usize, lambda: f64, d: &mut [f64]) -> bool {
    let mut ata = vec![0.0; nv * nv];
    let mut rhs = vec![0.0; nv];
    for row in 0..n_res {
        let jr = &jac[row * nv..(row + 1) * nv];
        for a in 0..nv {
            if jr[a] == 0.0 {
                continue;
            }
            rhs[a] -= jr[a] * r[row];
            for b in a..nv {
                ata[a * nv + b] += jr[a] * jr[b];
            }
        }
    }
    for a in 0..nv {
        ata[a * nv + a] += lambda;
        for b in 0..a {
            ata[a * nv + b] = ata[b * nv + a];
        }
    }
    // Cholesky.
    let mut l = ata;
    for c in 0..nv {
        for r2 in c..nv {
            let mut sum = l[r2 * nv + c];
            for k in 0..c {
                sum -= l[r2 * nv + k] * l[c * nv + k];
            }
            if r2 == c {
                if sum <= 0.0 {
                    return false;
                }
                l[c * nv + c] = sum.sqrt();
            } else {
                l[r2 * nv + c] = sum / l[c * nv + c];
            }
        }
    }
    for i in 0..nv {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * nv + k] * d[k];
        }
        d[i] = sum / l[i * nv + i];
    }
    for i in (0..nv).rev() {
        let mut sum = d[i];
        for k in i + 1..nv {
            sum -= l[k * nv + i] * d[k];
        }
        d[i] = sum / l[i * nv + i];
    }
    true
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Gauss-Newton descent on one fixed design. Returns (point, max residual).
///
/// Box handling is an active-set projection: variables sitting on a bound
/// with the gradient pushing outward are frozen for the step, so the Newton
/// direction is computed in the free subspace and does not fight the
/// projection (ratio slacks routinely end up exactly on their bounds).
fn solve_fixed(sys: &FixedSystem, x0: Vec<f64>, opts: &RecoveryOptions) -> (Vec<f64>, f64) {
    let nv = sys.n_vars();
    let mut x = x0;
    let mut r = vec![0.0; sys.n_res];
    let mut jac = vec![0.0; sys.n_res * nv];
    let mut d = vec![0.0; nv];
    sys.residuals(&x, &mut r);
    let mut f = norm2(&r);
    let mut lambda = opts.damping_floor;
    let target = 1e-22; // keep polishing; caller judges against its tolerance

    for _ in 0..opts.max_iters {
        if f <= target {
            break;
        }
        sys.jacobian(&x, &mut jac);
        // Gradient of ‖r‖² is 2·Jᵀr; freeze outward-pushing bound-active vars.
        let mut grad = vec![0.0; nv];
        for row in 0..sys.n_res {
            if r[row] == 0.0 {
                continue;
            }
            for v in 0..nv {
                grad[v] += jac[row * nv + v] * r[row];
            }
        }
        let mut frozen = vec![false; nv];
        for v in 0..nv {
            let eps = 1e-10 * (1.0 + sys.lo[v].abs().min(sys.hi[v].abs()));
            if (x[v] <= sys.lo[v] + eps && grad[v] > 0.0)
                || (x[v] >= sys.hi[v] - eps && grad[v] < 0.0)
            {
                frozen[v] = true;
            }
        }
        for row in 0..sys.n_res {
            for (v, &fz) in frozen.iter().enumerate() {
                if fz {
                    jac[row * nv + v] = 0.0;
                }
            }
        }
        if !normal_step(&jac, &r, sys.n_res, nv, lambda.max(1e-12), &mut d) {
            lambda = (lambda * 1e4).max(1e-8);
            continue;
        }
        for (v, &fz) in frozen.iter().enumerate() {
            if fz {
                d[v] = 0.0;
            }
        }
        // Armijo backtracking on ‖r‖² with projection onto the boxes.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            sys.project(&mut xt);
            let mut rt = vec![0.0; sys.n_res];
            sys.residuals(&xt, &mut rt);
            let ft = norm2(&rt);
            if ft <= f * (1.0 - 1e-4 * alpha) || ft < f - 1e-30 {
                x = xt;
                r = rt;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if accepted {
            lambda = (lambda / 3.0).max(opts.damping_floor);
        } else {
            lambda *= 100.0;
            if lambda > 1e14 {
                break;
            }
        }
    }
    let worst = max_abs(&r);
    (x, worst)
}

/// Runs one Gauss-Newton descent for a concrete system and packages the
/// outcome.
fn attempt(
    net: &GasNetwork,
    misocp: &MathProgram,
    inc: &Incumbent,
    assignment: &Assignment,
    free_pipes: bool,
    opts: &RecoveryOptions,
    tol: f64,
) -> RecoveryResult {
    let sys = FixedSystem::new(net, assignment, free_pipes);
    let x0 = sys.initial_point(misocp, inc);
    let (x, worst) = solve_fixed(&sys, x0, opts);
    let beta = x[..sys.n_nodes].to_vec();
    let mut phi = vec![0.0; net.arcs().len()];
    for (a, pv) in sys.phi_var.iter().enumerate() {
        if let Some(pv) = *pv {
            phi[a] = x[pv];
        }
    }
    // Directions on pipes follow the realized flow signs in refine mode.
    let mut assignment = assignment.clone();
    if free_pipes {
        let flow_tol = 1e-9 * net.phi_max().max(1.0);
        for (a, arc) in net.arcs().iter().enumerate() {
            if arc.kind.is_pipe_family() && assignment.active[a] && phi[a].abs() > flow_tol {
                assignment.forward[a] = phi[a] > 0.0;
            }
        }
    }
    let objective = assignment.cost(net);
    RecoveryResult {
        status: if worst <= tol { RecoveryStatus::Feasible } else { RecoveryStatus::Failed },
        beta,
        phi,
        max_residual: worst,
        objective,
        assignment: Some(assignment),
        attempts: 0,
    }
}

/// Machine arcs whose orientation matters (everything with a ratio window
/// other than the symmetric 1:1 of a plain valve).
fn directed_machines(net: &GasNetwork, assignment: &Assignment) -> Vec<usize> {
    net.arcs()
        .iter()
        .enumerate()
        .filter(|(a, arc)| {
            assignment.active[*a]
                && match arc.kind.ratio_bounds() {
                    Some((lo, hi)) => !(lo == 1.0 && hi == 1.0),
                    None => false,
                }
        })
        .map(|(a, _)| a)
        .collect()
}

/// Attempts each pooled design in order and accepts the first one whose
/// residuals meet the scaled tolerance. The objective is fixed by the design
/// alone.
///
/// Per design the ladder is: (1) all directions fixed as pooled; (2) pipe
/// directions freed (signed drop law) over every admissible machine-direction
/// pattern, nearest patterns first. The relaxation can report slack drops
/// with reversed directions on a perfectly recoverable design, so refinement
/// is the "repeat the process" step when only one pooled point exists.
pub fn recover(
    net: &GasNetwork,
    misocp: &MathProgram,
    pool: &[Incumbent],
    opts: &RecoveryOptions,
) -> RecoveryResult {
    let w_max = net.arcs().iter().map(|a| a.kind.w()).fold(0.0_f64, f64::max);
    let scale = (w_max * net.phi_max() * net.phi_max()).max(1.0);
    // The scaled tolerance alone would accept stalled descents that can never
    // certify; align acceptance with the certification tolerance.
    let tol = (opts.res_tol * scale).min(opts.res_tol.max(1e-6));

    let mut best: Option<RecoveryResult> = None;
    let mut keep_best = |r: RecoveryResult, best: &mut Option<RecoveryResult>| {
        let keep = match best {
            None => true,
            Some(b) => r.max_residual < b.max_residual,
        };
        if keep {
            *best = Some(r);
        }
    };
    for (attempt_no, inc) in pool.iter().enumerate() {
        let assignment = Assignment::from_point(net, misocp, &inc.x);

        let mut r = attempt(net, misocp, inc, &assignment, false, opts, tol);
        r.attempts = attempt_no + 1;
        if r.status == RecoveryStatus::Feasible {
            return r;
        }
        keep_best(r, &mut best);

        let machines = directed_machines(net, &assignment);
        let reversible: Vec<usize> = machines
            .iter()
            .copied()
            .filter(|&a| match net.arcs()[a].kind {
                crate::network::ArcKind::Compressor { bidirectional, .. } => bidirectional,
                _ => true,
            })
            .collect();
        if reversible.len() > 14 {
            continue; // pattern enumeration is for desk-size designs
        }
        // Patterns ordered by Hamming distance from the pooled directions.
        let mut patterns: Vec<u32> = (0..(1u32 << reversible.len())).collect();
        patterns.sort_by_key(|p| (p.count_ones(), *p));
        for pattern in patterns {
            let mut flipped = assignment.clone();
            for (bit, &a) in reversible.iter().enumerate() {
                if pattern & (1 << bit) != 0 {
                    flipped.forward[a] = !assignment.forward[a];
                }
            }
            let mut r = attempt(net, misocp, inc, &flipped, true, opts, tol);
            r.attempts = attempt_no + 1;
            if r.status == RecoveryStatus::Feasible {
                return r;
            }
            keep_best(r, &mut best);
        }
    }
    best.unwrap_or(RecoveryResult {
        status: RecoveryStatus::Failed,
        beta: net.nodes().iter().map(|n| n.beta_lo).collect(),
        phi: vec![0.0; net.arcs().len()],
        max_residual: f64::INFINITY,
        objective: f64::INFINITY,
        assignment: None,
        attempts: 0,
    })
}

/// Assembles a full variable vector of the exact model from a recovered
/// operating point. Directions on arcs with (near-)zero flux are completed
/// from the pressure ordering, which every such arc admits.
pub fn assemble_point(
    net: &GasNetwork,
    minlp: &MathProgram,
    beta: &[f64],
    phi: &[f64],
    assignment: &Assignment,
) -> Vec<f64> {
    let flow_tol = 1e-9 * net.phi_max().max(1.0);
    let mut x = vec![0.0; minlp.vars.len()];
    for (i, _) in net.nodes().iter().enumerate() {
        x[minlp.var(VarKind::Beta(i)).expect("beta").0] = beta[i];
    }
    for (a, arc) in net.arcs().iter().enumerate() {
        x[minlp.var(VarKind::Phi(a)).expect("phi").0] = phi[a];
        let (i, j) = net.arc_endpoints(a).expect("validated");
        let forward = if phi[a] > flow_tol {
            true
        } else if phi[a] < -flow_tol {
            false
        } else if arc.kind.is_pipe_family() {
            beta[i] >= beta[j]
        } else {
            assignment.forward[a]
        };
        x[minlp.var(VarKind::YPlus(a)).expect("yplus").0] = if forward { 1.0 } else { 0.0 };
        x[minlp.var(VarKind::YMinus(a)).expect("yminus").0] = if forward { 0.0 } else { 1.0 };
        let on = if assignment.active[a] { 1.0 } else { 0.0 };
        if let Some(z) = minlp.var(VarKind::PipeBuild(a)) {
            x[z.0] = on;
        }
        if let Some(z) = minlp.var(VarKind::CompBuild(a)) {
            x[z.0] = on;
        }
        if let Some(v) = minlp.var(VarKind::ValveOpen(a)) {
            x[v.0] = on;
        }
    }
    x
}

#[derive(Clone, Copy, Debug)]
pub struct CertifyTols {
    pub linear: f64,
    pub bilinear: f64,
}

impl Default for CertifyTols {
    fn default() -> Self {
        CertifyTols { linear: 1e-6, bilinear: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct CertifyReport {
    /// Worst violation per linear-row family.
    pub by_family: BTreeMap<RowTag, f64>,
    /// Worst |residual| over the drop equalities.
    pub bilinear: f64,
    pub max_violation: f64,
    pub pass: bool,
}

/// Evaluates every row of the exact model at a complete point and reports
/// the worst violation per family.
pub fn certify(minlp: &MathProgram, x: &[f64], tols: CertifyTols) -> CertifyReport {
    let mut by_family: BTreeMap<RowTag, f64> = BTreeMap::new();
    for row in &minlp.lin {
        let v = row.violation(x);
        let e = by_family.entry(row.tag).or_insert(0.0);
        if v > *e {
            *e = v;
        }
    }
    let bilinear = minlp.bilinear.iter().map(|b| b.residual(x).abs()).fold(0.0, f64::max);
    let lin_worst = by_family.values().fold(0.0_f64, |m, &v| m.max(v));
    CertifyReport {
        pass: lin_worst <= tols.linear && bilinear <= tols.bilinear,
        max_violation: lin_worst.max(bilinear),
        by_family,
        bilinear,
    }
}
