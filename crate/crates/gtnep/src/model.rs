//! Mathematical-program builders.
//!
//! Three programs share one linear skeleton (flow conservation, direction
//! binaries, direction/flow and direction/pressure coupling, compressor and
//! valve windows, candidate gating, exclusivity and structural cuts):
//!
//! * the conic relaxation (`build_misocp`): an auxiliary γ per pipe carries
//!   the signed pressure drop through an exact McCormick linearization, and
//!   the drop law relaxes to `γ ≥ w·φ²` (existing) or the on/off convex hull
//!   `z·γ ≥ w·φ²` (candidate);
//! * the exact nonconvex form (`build_minlp`): the drop equalities are kept
//!   as bilinear rows, used for certification and recovery, never solved
//!   globally here;
//! * a piecewise-linear MIP (`build_pla_mip`): the drop law is replaced by an
//!   incremental-formulation chord interpolant of `φ|φ|`.

use crate::network::{ArcKind, ArcStatus, GasNetwork};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Role of a variable; the payload indexes into the network's node/arc lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    /// Squared pressure at a node.
    Beta(usize),
    /// Signed mass flux on an arc.
    Phi(usize),
    /// Signed-drop auxiliary on a pipe-family arc.
    Gamma(usize),
    /// Direction binary: flux runs from -> to.
    YPlus(usize),
    /// Direction binary: flux runs to -> from.
    YMinus(usize),
    /// Build binary for a candidate pipe.
    PipeBuild(usize),
    /// Build binary for a candidate compressor.
    CompBuild(usize),
    /// Switch binary for a valve.
    ValveOpen(usize),
    /// Piecewise fill amount for segment k of an arc's drop interpolant.
    PlaFill(usize, usize),
    /// Piecewise fill-order binary.
    PlaStep(usize, usize),
}

impl VarKind {
    /// Branching tie-break order: direction before build before switch.
    pub fn branch_rank(&self) -> u8 {
        match self {
            VarKind::YPlus(_) | VarKind::YMinus(_) => 0,
            VarKind::PipeBuild(_) | VarKind::CompBuild(_) => 1,
            VarKind::ValveOpen(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Continuous { lo: f64, hi: f64 },
    Binary,
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Continuous { lo, hi } => (lo, hi),
            Domain::Binary => (0.0, 1.0),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Domain::Binary)
    }
}

#[derive(Clone, Debug)]
pub struct VarInfo {
    pub kind: VarKind,
    pub name: String,
    pub domain: Domain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Constraint family label, for diagnostics and certification reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowTag {
    Conservation,
    DirectionChoice,
    FlowDirection,
    PressureDirection,
    McCormick,
    Compressor,
    CompressorGate,
    Valve,
    ValveGate,
    PipeGate,
    Exclusivity,
    ColumnLink,
    InjectionCut,
    DemandCut,
    DegreeTwoCut,
    ParallelCut,
    PlaShape,
    OaCut,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RowTag::Conservation => "conservation",
            RowTag::DirectionChoice => "direction-choice",
            RowTag::FlowDirection => "flow-direction",
            RowTag::PressureDirection => "pressure-direction",
            RowTag::McCormick => "mccormick",
            RowTag::Compressor => "compressor",
            RowTag::CompressorGate => "compressor-gate",
            RowTag::Valve => "valve",
            RowTag::ValveGate => "valve-gate",
            RowTag::PipeGate => "pipe-gate",
            RowTag::Exclusivity => "exclusivity",
            RowTag::ColumnLink => "column-link",
            RowTag::InjectionCut => "injection-cut",
            RowTag::DemandCut => "demand-cut",
            RowTag::DegreeTwoCut => "degree-two-cut",
            RowTag::ParallelCut => "parallel-cut",
            RowTag::PlaShape => "pla-shape",
            RowTag::OaCut => "oa-cut",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct LinRow {
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

impl LinRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Violation of the row at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.eval(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A conic drop row: plain `γ ≥ w·φ²` or the on/off form `z·γ ≥ w·φ²`.
#[derive(Clone, Copy, Debug)]
pub enum ConeForm {
    Plain { gamma: VarId, phi: VarId, w: f64 },
    Perspective { z: VarId, gamma: VarId, phi: VarId, w: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct ConeRow {
    pub arc: usize,
    pub form: ConeForm,
}

impl ConeRow {
    /// Violation `w·φ² − (z)·γ` at a point, clipped at 0.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self.form {
            ConeForm::Plain { gamma, phi, w } => (w * x[phi.0] * x[phi.0] - x[gamma.0]).max(0.0),
            ConeForm::Perspective { z, gamma, phi, w } => {
                (w * x[phi.0] * x[phi.0] - x[z.0] * x[gamma.0]).max(0.0)
            }
        }
    }
}

/// A drop equality of the exact model: `[z·](y⁺−y⁻)(βi−βj) = w·φ²`.
#[derive(Clone, Copy, Debug)]
pub struct BilinearRow {
    pub arc: usize,
    pub z: Option<VarId>,
    pub y_plus: VarId,
    pub y_minus: VarId,
    pub beta_i: VarId,
    pub beta_j: VarId,
    pub phi: VarId,
    pub w: f64,
}

impl BilinearRow {
    pub fn residual(&self, x: &[f64]) -> f64 {
        let s = x[self.y_plus.0] - x[self.y_minus.0];
        let drop = s * (x[self.beta_i.0] - x[self.beta_j.0]);
        let gate = self.z.map_or(1.0, |z| x[z.0]);
        gate * drop - self.w * x[self.phi.0] * x[self.phi.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgramKind {
    Misocp,
    Minlp,
    PlaMip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSize {
    pub binary_vars: usize,
    pub continuous_vars: usize,
    pub linear_rows: usize,
    pub quadratic_rows: usize,
}

/// Solver-agnostic intermediate representation of one built model.
#[derive(Clone, Debug)]
pub struct MathProgram {
    pub kind: ProgramKind,
    pub vars: Vec<VarInfo>,
    pub lin: Vec<LinRow>,
    pub cones: Vec<ConeRow>,
    pub bilinear: Vec<BilinearRow>,
    /// Sparse minimize objective over build binaries.
    pub objective: Vec<(VarId, f64)>,
    /// Flow big-M Σ_{q>0} q of the source network.
    pub phi_max: f64,
    lookup: BTreeMap<VarKind, VarId>,
}

impl MathProgram {
    pub fn var(&self, kind: VarKind) -> Option<VarId> {
        self.lookup.get(&kind).copied()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.domain.is_binary())
            .map(|(i, _)| VarId(i))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    /// Size report in the convention of the benchmark tables: binaries,
    /// continuous variables, linear rows, and quadratic rows. Quadratic rows
    /// are the cone count for the relaxation and, for the exact model, four
    /// direction-gated one-sided forms per stored drop equality.
    pub fn size(&self) -> ModelSize {
        let binary_vars = self.binaries().count();
        ModelSize {
            binary_vars,
            continuous_vars: self.vars.len() - binary_vars,
            linear_rows: self.lin.len(),
            quadratic_rows: match self.kind {
                ProgramKind::Misocp => self.cones.len(),
                ProgramKind::Minlp => 4 * self.bilinear.len(),
                ProgramKind::PlaMip => 0,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BuildError {
    CandidateValve { arc: String },
    InvalidNetwork { first: String },
    BadSegmentCount { segments: usize },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::CandidateValve { arc } => {
                write!(f, "arc {arc}: candidate valves are outside the formulation")
            }
            BuildError::InvalidNetwork { first } => write!(f, "invalid network: {first}"),
            BuildError::BadSegmentCount { segments } => {
                write!(f, "piecewise approximation needs at least 2 segments, got {segments}")
            }
        }
    }
}

impl std::error::Error for BuildError {}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Attach the structural integer cuts (on by default).
    pub cuts: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { cuts: true }
    }
}

struct Builder<'a> {
    net: &'a GasNetwork,
    prog: MathProgram,
    beta: Vec<VarId>,
    phi: Vec<VarId>,
    y_plus: Vec<VarId>,
    y_minus: Vec<VarId>,
    /// Build/switch binary per arc, when the arc has one.
    gate: Vec<Option<VarId>>,
    gamma: Vec<Option<VarId>>,
}

impl<'a> Builder<'a> {
    fn new(net: &'a GasNetwork, kind: ProgramKind) -> Result<Builder<'a>, BuildError> {
        let violations = net.validate();
        if let Some(v) = violations.first() {
            return Err(BuildError::InvalidNetwork { first: v.to_string() });
        }
        for a in net.arcs() {
            if a.kind.is_valve_family() && a.status.is_candidate() {
                return Err(BuildError::CandidateValve { arc: a.id.0.clone() });
            }
        }
        Ok(Builder {
            net,
            prog: MathProgram {
                kind,
                vars: Vec::new(),
                lin: Vec::new(),
                cones: Vec::new(),
                bilinear: Vec::new(),
                objective: Vec::new(),
                phi_max: net.phi_max(),
                lookup: BTreeMap::new(),
            },
            beta: Vec::new(),
            phi: Vec::new(),
            y_plus: Vec::new(),
            y_minus: Vec::new(),
            gate: Vec::new(),
            gamma: Vec::new(),
        })
    }

    fn add_var(&mut self, kind: VarKind, name: String, domain: Domain) -> VarId {
        let id = VarId(self.prog.vars.len());
        self.prog.vars.push(VarInfo { kind, name, domain });
        self.prog.lookup.insert(kind, id);
        id
    }

    fn row(&mut self, coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64, tag: RowTag) {
        self.prog.lin.push(LinRow { coeffs, sense, rhs, tag });
    }

    fn endpoints(&self, arc: usize) -> (usize, usize) {
        self.net.arc_endpoints(arc).expect("validated network")
    }

    fn beta_bounds(&self, node: usize) -> (f64, f64) {
        let n = &self.net.nodes()[node];
        (n.beta_lo, n.beta_hi)
    }

    /// Variables shared by every program: β, φ, directions, build binaries,
    /// and (when requested) the γ auxiliaries on the pipe family.
    fn add_core_vars(&mut self, with_gamma: bool) {
        let phi_max = self.prog.phi_max;
        for (i, n) in self.net.nodes().iter().enumerate() {
            let id = self.add_var(
                VarKind::Beta(i),
                format!("beta({})", n.id),
                Domain::Continuous { lo: n.beta_lo, hi: n.beta_hi },
            );
            self.beta.push(id);
        }
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let id = self.add_var(
                VarKind::Phi(a),
                format!("phi({})", arc.id),
                Domain::Continuous { lo: -phi_max, hi: phi_max },
            );
            self.phi.push(id);
        }
        if with_gamma {
            for (a, arc) in self.net.arcs().iter().enumerate() {
                let g = if arc.kind.is_pipe_family() {
                    let (i, j) = self.endpoints(a);
                    let (lo_i, hi_i) = self.beta_bounds(i);
                    let (lo_j, hi_j) = self.beta_bounds(j);
                    let hi = (hi_i - lo_j).max(hi_j - lo_i).max(0.0);
                    Some(self.add_var(
                        VarKind::Gamma(a),
                        format!("gamma({})", arc.id),
                        Domain::Continuous { lo: 0.0, hi },
                    ))
                } else {
                    None
                };
                self.gamma.push(g);
            }
        } else {
            self.gamma = vec![None; self.net.arcs().len()];
        }
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let p = self.add_var(VarKind::YPlus(a), format!("yplus({})", arc.id), Domain::Binary);
            let m = self.add_var(VarKind::YMinus(a), format!("yminus({})", arc.id), Domain::Binary);
            self.y_plus.push(p);
            self.y_minus.push(m);
        }
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let gate = match (&arc.status, &arc.kind) {
                (ArcStatus::Candidate { .. }, k) if k.is_pipe_family() => {
                    Some(self.add_var(VarKind::PipeBuild(a), format!("zp({})", arc.id), Domain::Binary))
                }
                (ArcStatus::Candidate { .. }, ArcKind::Compressor { .. }) => {
                    Some(self.add_var(VarKind::CompBuild(a), format!("zc({})", arc.id), Domain::Binary))
                }
                (ArcStatus::Existing, k) if k.is_valve_family() => {
                    Some(self.add_var(VarKind::ValveOpen(a), format!("v({})", arc.id), Domain::Binary))
                }
                _ => None,
            };
            self.gate.push(gate);
        }
    }

    fn add_objective(&mut self) {
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if let ArcStatus::Candidate { cost } = arc.status {
                let z = self.gate[a].expect("candidate has a build binary");
                self.prog.objective.push((z, cost));
            }
        }
    }

    /// Σ_out φ − Σ_in φ = q at every node.
    fn add_conservation(&mut self) {
        for i in 0..self.net.nodes().len() {
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for &a in self.net.arcs_out(i) {
                coeffs.push((self.phi[a], 1.0));
            }
            for &a in self.net.arcs_in(i) {
                coeffs.push((self.phi[a], -1.0));
            }
            let q = self.net.nodes()[i].q;
            self.row(coeffs, Sense::Eq, q, RowTag::Conservation);
        }
    }

    /// y⁺ + y⁻ = 1 and the flow/direction window per arc.
    fn add_direction_rows(&mut self) {
        let phi_max = self.prog.phi_max;
        for a in 0..self.net.arcs().len() {
            self.row(
                vec![(self.y_plus[a], 1.0), (self.y_minus[a], 1.0)],
                Sense::Eq,
                1.0,
                RowTag::DirectionChoice,
            );
            // −(1−y⁺)·Φ ≤ φ ≤ (1−y⁻)·Φ
            self.row(
                vec![(self.phi[a], 1.0), (self.y_plus[a], -phi_max)],
                Sense::Ge,
                -phi_max,
                RowTag::FlowDirection,
            );
            self.row(
                vec![(self.phi[a], 1.0), (self.y_minus[a], phi_max)],
                Sense::Le,
                phi_max,
                RowTag::FlowDirection,
            );
        }
    }

    /// Sign of the pressure differential follows the direction binaries on
    /// the pipe family, with valid big-M spans.
    fn add_pressure_direction_rows(&mut self) {
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if !arc.kind.is_pipe_family() {
                continue;
            }
            let (i, j) = self.endpoints(a);
            let (lo_i, hi_i) = self.beta_bounds(i);
            let (lo_j, hi_j) = self.beta_bounds(j);
            let m_minus = (hi_j - lo_i).max(0.0);
            let m_plus = (hi_i - lo_j).max(0.0);
            // βi − βj ≥ −(1−y⁺)·M⁻
            self.row(
                vec![(self.beta[i], 1.0), (self.beta[j], -1.0), (self.y_plus[a], -m_minus)],
                Sense::Ge,
                -m_minus,
                RowTag::PressureDirection,
            );
            // βi − βj ≤ (1−y⁻)·M⁺
            self.row(
                vec![(self.beta[i], 1.0), (self.beta[j], -1.0), (self.y_minus[a], m_plus)],
                Sense::Le,
                m_plus,
                RowTag::PressureDirection,
            );
        }
    }

    /// The four-row exact linearization of γ = (y⁺−y⁻)(βi−βj) per pipe.
    fn add_mccormick(&mut self) {
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if !arc.kind.is_pipe_family() {
                continue;
            }
            let g = self.gamma[a].expect("gamma on pipe family");
            let (i, j) = self.endpoints(a);
            let (lo_i, hi_i) = self.beta_bounds(i);
            let (lo_j, hi_j) = self.beta_bounds(j);
            let c1 = lo_i - hi_j;
            let c2 = hi_i - lo_j;
            let (bi, bj) = (self.beta[i], self.beta[j]);
            let (yp, ym) = (self.y_plus[a], self.y_minus[a]);
            // γ ≥ βj − βi + c1·(y⁺ − y⁻ + 1)
            self.row(
                vec![(g, 1.0), (bj, -1.0), (bi, 1.0), (yp, -c1), (ym, c1)],
                Sense::Ge,
                c1,
                RowTag::McCormick,
            );
            // γ ≥ βi − βj + c2·(y⁺ − y⁻ − 1)
            self.row(
                vec![(g, 1.0), (bi, -1.0), (bj, 1.0), (yp, -c2), (ym, c2)],
                Sense::Ge,
                -c2,
                RowTag::McCormick,
            );
            // γ ≤ βj − βi + c2·(y⁺ − y⁻ + 1)
            self.row(
                vec![(g, 1.0), (bj, -1.0), (bi, 1.0), (yp, -c2), (ym, c2)],
                Sense::Le,
                c2,
                RowTag::McCormick,
            );
            // γ ≤ βi − βj + c1·(y⁺ − y⁻ − 1)
            self.row(
                vec![(g, 1.0), (bi, -1.0), (bj, 1.0), (yp, -c1), (ym, c1)],
                Sense::Le,
                -c1,
                RowTag::McCormick,
            );
        }
    }

    /// Ratio windows for compressors and valves, both orientations, gated by
    /// direction (and build/switch state where applicable), plus flow gates.
    fn add_machine_rows(&mut self) {
        let phi_max = self.prog.phi_max;
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let Some((alo, ahi)) = arc.kind.ratio_bounds() else { continue };
            // Rows live in squared-pressure space.
            let (rl, rh) = (alo * alo, ahi * ahi);
            let (i, j) = self.endpoints(a);
            let (lo_i, hi_i) = self.beta_bounds(i);
            let (lo_j, hi_j) = self.beta_bounds(j);
            let (bi, bj) = (self.beta[i], self.beta[j]);
            let (yp, ym) = (self.y_plus[a], self.y_minus[a]);
            let (tag, gate_tag) = if arc.kind.is_compressor() {
                (RowTag::Compressor, RowTag::CompressorGate)
            } else {
                (RowTag::Valve, RowTag::ValveGate)
            };
            // Switch/build binary participating in the slack term, if any.
            let gate = self.gate[a];
            let slack = if gate.is_some() { 2.0 } else { 1.0 };

            let bidirectional = match arc.kind {
                ArcKind::Compressor { bidirectional, .. } => bidirectional,
                _ => true,
            };

            let window = |bi: VarId,
                              bj: VarId,
                              hi_i: f64,
                              lo_i: f64,
                              hi_j: f64,
                              lo_j: f64,
                              y: VarId,
                              builder: &mut Self| {
                // rl·βi ≤ βj when active: rl·βi − βj ≤ K·(slack − y − z)
                let k1 = (rl * hi_i - lo_j).max(0.0);
                let mut c = vec![(bi, rl), (bj, -1.0), (y, k1)];
                if let Some(z) = gate {
                    c.push((z, k1));
                }
                builder.row(c, Sense::Le, slack * k1, tag);
                // βj ≤ rh·βi when active: βj − rh·βi ≤ K·(slack − y − z)
                let k2 = (hi_j - rh * lo_i).max(0.0);
                let mut c = vec![(bj, 1.0), (bi, -rh), (y, k2)];
                if let Some(z) = gate {
                    c.push((z, k2));
                }
                builder.row(c, Sense::Le, slack * k2, tag);
            };

            window(bi, bj, hi_i, lo_i, hi_j, lo_j, yp, self);
            if bidirectional {
                window(bj, bi, hi_j, lo_j, hi_i, lo_i, ym, self);
            } else {
                self.row(vec![(ym, 1.0)], Sense::Eq, 0.0, tag);
            }

            // −gate·Φ ≤ φ ≤ gate·Φ for candidates and valves.
            if let Some(z) = gate {
                self.row(
                    vec![(self.phi[a], 1.0), (z, -phi_max)],
                    Sense::Le,
                    0.0,
                    gate_tag,
                );
                self.row(
                    vec![(self.phi[a], 1.0), (z, phi_max)],
                    Sense::Ge,
                    0.0,
                    gate_tag,
                );
            }
        }
    }

    /// −z·Φ ≤ φ ≤ z·Φ on candidate pipes (implied by the perspective cone;
    /// kept explicit so the linear relaxation is bounded before cuts).
    fn add_pipe_gates(&mut self) {
        let phi_max = self.prog.phi_max;
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if !(arc.kind.is_pipe_family() && arc.status.is_candidate()) {
                continue;
            }
            let z = self.gate[a].expect("candidate pipe binary");
            self.row(vec![(self.phi[a], 1.0), (z, -phi_max)], Sense::Le, 0.0, RowTag::PipeGate);
            self.row(vec![(self.phi[a], 1.0), (z, phi_max)], Sense::Ge, 0.0, RowTag::PipeGate);
        }
    }

    /// Diameter-choice rows (Σz = 1, or ≤ 1 for optional groups) and
    /// same-column build links across paired corridors.
    fn add_exclusivity(&mut self) {
        for (gid, members) in self.net.exclusivity_groups() {
            let coeffs: Vec<(VarId, f64)> = members
                .iter()
                .map(|&a| (self.gate[a].expect("grouped arcs are candidates"), 1.0))
                .collect();
            let sense = if self.net.is_optional_group(&gid) { Sense::Le } else { Sense::Eq };
            self.row(coeffs, sense, 1.0, RowTag::Exclusivity);
        }
        for (_col, members) in self.net.parallel_columns() {
            for pair in members.windows(2) {
                let za = self.gate[pair[0]].expect("linked arcs are candidates");
                let zb = self.gate[pair[1]].expect("linked arcs are candidates");
                self.row(vec![(za, 1.0), (zb, -1.0)], Sense::Eq, 0.0, RowTag::ColumnLink);
            }
        }
    }

    fn add_cones(&mut self) {
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let w = arc.kind.w();
            if !arc.kind.is_pipe_family() || w <= 0.0 {
                continue;
            }
            let gamma = self.gamma[a].expect("gamma on pipe family");
            let phi = self.phi[a];
            let form = match arc.status {
                ArcStatus::Existing => ConeForm::Plain { gamma, phi, w },
                ArcStatus::Candidate { .. } => ConeForm::Perspective {
                    z: self.gate[a].expect("candidate pipe binary"),
                    gamma,
                    phi,
                    w,
                },
            };
            self.prog.cones.push(ConeRow { arc: a, form });
        }
    }

    fn add_bilinear(&mut self) {
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if !arc.kind.is_pipe_family() {
                continue;
            }
            let (i, j) = self.endpoints(a);
            self.prog.bilinear.push(BilinearRow {
                arc: a,
                z: if arc.status.is_candidate() { self.gate[a] } else { None },
                y_plus: self.y_plus[a],
                y_minus: self.y_minus[a],
                beta_i: self.beta[i],
                beta_j: self.beta[j],
                phi: self.phi[a],
                w: arc.kind.w(),
            });
        }
    }

    /// Incremental chord interpolant of φ|φ| on [−Φ, Φ] for each pipe with
    /// w > 0, tied into the drop equality (big-M gated for candidates).
    fn add_pla(&mut self, segments: usize) {
        let phi_max = self.prog.phi_max;
        let h = 2.0 * phi_max / segments as f64;
        let f = |x: f64| x * x.abs();
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if !arc.kind.is_pipe_family() {
                continue;
            }
            let w = arc.kind.w();
            let (i, j) = self.endpoints(a);
            let (lo_i, hi_i) = self.beta_bounds(i);
            let (lo_j, hi_j) = self.beta_bounds(j);
            let arc_id = &self.net.arcs()[a].id.clone();

            if w <= 0.0 {
                // Lossless pipe: βi = βj when present.
                match self.gate[a] {
                    None => {
                        self.row(
                            vec![(self.beta[i], 1.0), (self.beta[j], -1.0)],
                            Sense::Eq,
                            0.0,
                            RowTag::PlaShape,
                        );
                    }
                    Some(z) => {
                        let m_hi = (hi_i - lo_j).max(0.0);
                        let m_lo = (hi_j - lo_i).max(0.0);
                        self.row(
                            vec![(self.beta[i], 1.0), (self.beta[j], -1.0), (z, m_hi)],
                            Sense::Le,
                            m_hi,
                            RowTag::PlaShape,
                        );
                        self.row(
                            vec![(self.beta[i], 1.0), (self.beta[j], -1.0), (z, -m_lo)],
                            Sense::Ge,
                            -m_lo,
                            RowTag::PlaShape,
                        );
                    }
                }
                continue;
            }

            let fills: Vec<VarId> = (0..segments)
                .map(|k| {
                    self.add_var(
                        VarKind::PlaFill(a, k),
                        format!("pla_fill({arc_id},{k})"),
                        Domain::Continuous { lo: 0.0, hi: h },
                    )
                })
                .collect();
            let steps: Vec<VarId> = (0..segments.saturating_sub(1))
                .map(|k| {
                    self.add_var(
                        VarKind::PlaStep(a, k),
                        format!("pla_segment({arc_id},{k})"),
                        Domain::Binary,
                    )
                })
                .collect();

            // φ = −Φ + Σ δ_k
            let mut c = vec![(self.phi[a], 1.0)];
            for &d in &fills {
                c.push((d, -1.0));
            }
            self.row(c, Sense::Eq, -phi_max, RowTag::PlaShape);

            // Fill order: δ_k ≥ h·u_k and δ_{k+1} ≤ h·u_k.
            for k in 0..segments - 1 {
                self.row(
                    vec![(fills[k], 1.0), (steps[k], -h)],
                    Sense::Ge,
                    0.0,
                    RowTag::PlaShape,
                );
                self.row(
                    vec![(fills[k + 1], 1.0), (steps[k], -h)],
                    Sense::Le,
                    0.0,
                    RowTag::PlaShape,
                );
            }

            // Drop row: βi − βj − w·(f(−Φ) + Σ s_k·δ_k) = 0, gated for
            // candidates with the pressure-span big-M (φ is force-gated to
            // 0 when unbuilt, and 0 is a breakpoint for even counts).
            let mut coeffs = vec![(self.beta[i], 1.0), (self.beta[j], -1.0)];
            let mut x_prev = -phi_max;
            for (k, &d) in fills.iter().enumerate() {
                let x_next = -phi_max + (k + 1) as f64 * h;
                let slope = (f(x_next) - f(x_prev)) / h;
                coeffs.push((d, -w * slope));
                x_prev = x_next;
            }
            let rhs = w * f(-phi_max);
            match self.gate[a] {
                None => self.row(coeffs, Sense::Eq, rhs, RowTag::PlaShape),
                Some(z) => {
                    let chord0 = if segments % 2 == 0 { 0.0 } else { h * h / 4.0 };
                    let m_hi = (hi_i - lo_j).max(0.0) + w * chord0;
                    let m_lo = (hi_j - lo_i).max(0.0) + w * chord0;
                    let mut up = coeffs.clone();
                    up.push((z, m_hi));
                    self.row(up, Sense::Le, rhs + m_hi, RowTag::PlaShape);
                    let mut dn = coeffs;
                    dn.push((z, -m_lo));
                    self.row(dn, Sense::Ge, rhs - m_lo, RowTag::PlaShape);
                }
            }
        }
    }

    fn finish(self) -> MathProgram {
        self.prog
    }
}

/// Builds the conic relaxation of the expansion problem.
pub fn build_misocp(net: &GasNetwork, options: BuildOptions) -> Result<MathProgram, BuildError> {
    let mut b = Builder::new(net, ProgramKind::Misocp)?;
    b.add_core_vars(true);
    b.add_objective();
    b.add_conservation();
    b.add_direction_rows();
    b.add_pressure_direction_rows();
    b.add_mccormick();
    b.add_machine_rows();
    b.add_pipe_gates();
    b.add_exclusivity();
    b.add_cones();
    let mut prog = b.finish();
    if options.cuts {
        add_integer_cuts(&mut prog, net);
    }
    Ok(prog)
}

/// Builds the exact nonconvex model: the shared linear skeleton plus the
/// drop equalities as bilinear rows. Used for certification and recovery.
pub fn build_minlp(net: &GasNetwork) -> Result<MathProgram, BuildError> {
    let mut b = Builder::new(net, ProgramKind::Minlp)?;
    b.add_core_vars(false);
    b.add_objective();
    b.add_conservation();
    b.add_direction_rows();
    b.add_pressure_direction_rows();
    b.add_machine_rows();
    b.add_pipe_gates();
    b.add_exclusivity();
    b.add_bilinear();
    Ok(b.finish())
}

/// Builds the piecewise-linear MIP comparison model with `segments` uniform
/// chords of φ|φ| on [−Φ, Φ].
pub fn build_pla_mip(
    net: &GasNetwork,
    segments: usize,
    options: BuildOptions,
) -> Result<MathProgram, BuildError> {
    if segments < 2 {
        return Err(BuildError::BadSegmentCount { segments });
    }
    let mut b = Builder::new(net, ProgramKind::PlaMip)?;
    b.add_core_vars(false);
    b.add_objective();
    b.add_conservation();
    b.add_direction_rows();
    b.add_pressure_direction_rows();
    b.add_machine_rows();
    b.add_pipe_gates();
    b.add_exclusivity();
    b.add_pla(segments);
    let mut prog = b.finish();
    if options.cuts {
        add_integer_cuts(&mut prog, net);
    }
    Ok(prog)
}

/// Attaches the structural integer cuts to an already-built program and
/// returns how many rows were added: outgoing-flow rows at injections and
/// demands, direction propagation at throughflow nodes of degree two, and
/// direction equality on parallel pipes.
pub fn add_integer_cuts(prog: &mut MathProgram, net: &GasNetwork) -> usize {
    let before = prog.lin.len();
    let yp = |a: usize| prog.var(VarKind::YPlus(a)).expect("direction var");
    let ym = |a: usize| prog.var(VarKind::YMinus(a)).expect("direction var");

    let mut rows: Vec<LinRow> = Vec::new();

    // At least one arc carries flow away from every injection (resp. into
    // every demand), orientation-adjusted.
    for (set, tag, swap) in [
        (net.injections(), RowTag::InjectionCut, false),
        (net.demands(), RowTag::DemandCut, true),
    ] {
        for i in set {
            let mut coeffs = Vec::new();
            for &a in net.arcs_out(i) {
                coeffs.push((if swap { ym(a) } else { yp(a) }, 1.0));
            }
            for &a in net.arcs_in(i) {
                coeffs.push((if swap { yp(a) } else { ym(a) }, 1.0));
            }
            if !coeffs.is_empty() {
                rows.push(LinRow { coeffs, sense: Sense::Ge, rhs: 1.0, tag });
            }
        }
    }

    // Degree-2 throughflow nodes: the incoming direction determines the
    // outgoing one. Four orientation cases collapse to one equality.
    for i in 0..net.nodes().len() {
        if net.nodes()[i].q != 0.0 {
            continue;
        }
        let incident: Vec<(usize, bool)> = net
            .arcs_in(i)
            .iter()
            .map(|&a| (a, true))
            .chain(net.arcs_out(i).iter().map(|&a| (a, false)))
            .collect();
        if incident.len() != 2 {
            continue;
        }
        let ((a, a_in), (b, b_in)) = (incident[0], incident[1]);
        // "Toward i" on each arc: y⁺ if the arc points at i, else y⁻.
        let toward_a = if a_in { yp(a) } else { ym(a) };
        let toward_b = if b_in { yp(b) } else { ym(b) };
        // Flow through i: toward on one arc = away on the other, i.e.
        // toward_a = 1 − toward_b, i.e. toward_a + toward_b = 1.
        rows.push(LinRow {
            coeffs: vec![(toward_a, 1.0), (toward_b, 1.0)],
            sense: Sense::Eq,
            rhs: 1.0,
            tag: RowTag::DegreeTwoCut,
        });
    }

    // Same-direction equality across parallel pipes (same oriented pair).
    let mut by_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (a, arc) in net.arcs().iter().enumerate() {
        if !arc.kind.is_pipe_family() {
            continue;
        }
        let (i, j) = net.arc_endpoints(a).expect("validated");
        by_pair.entry((i, j)).or_default().push(a);
    }
    for (_, arcs) in by_pair {
        for pair in arcs.windows(2) {
            rows.push(LinRow {
                coeffs: vec![(yp(pair[0]), 1.0), (yp(pair[1]), -1.0)],
                sense: Sense::Eq,
                rhs: 0.0,
                tag: RowTag::ParallelCut,
            });
        }
    }

    prog.lin.extend(rows);
    prog.lin.len() - before
}
