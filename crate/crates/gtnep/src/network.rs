//! Domain model of a gas transmission network under steady state.
//!
//! A network is a set of nodes carrying mass-flux injections (positive),
//! demands (negative) and squared-pressure windows, connected by arcs that
//! are either already installed or candidates for installation. Pipes and
//! resistors obey the quadratic pressure-drop law `βi − βj = w·φ|φ|` in
//! squared-pressure space; compressors, short pipes and valves are lossless.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Stable node identifier, unique within a network.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub String);

/// Stable arc identifier; distinguishes parallel arcs between the same pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArcId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }
}

impl ArcId {
    pub fn new(s: impl Into<String>) -> Self {
        ArcId(s.into())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A connection point with an injection/demand and a squared-pressure window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Mass-flux injection; positive = injection, negative = demand, 0 = junction.
    pub q: f64,
    /// Lower bound on squared pressure (bar²).
    pub beta_lo: f64,
    /// Upper bound on squared pressure (bar²).
    pub beta_hi: f64,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    /// Structural junction introduced for zero-length station arcs, not a town.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dummy: bool,
}

/// What kind of element an arc is. Ratio bounds are on pressure (not squared
/// pressure); model builders square them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArcKind {
    Pipe { w: f64 },
    Resistor { w: f64 },
    ShortPipe,
    Compressor {
        alpha_lo: f64,
        alpha_hi: f64,
        #[serde(default = "default_true")]
        bidirectional: bool,
    },
    Valve,
    ControlValve { alpha_lo: f64, alpha_hi: f64 },
}

fn default_true() -> bool {
    true
}

impl ArcKind {
    /// Pipes, resistors and short pipes form the pressure-drop family `P`.
    pub fn is_pipe_family(&self) -> bool {
        matches!(self, ArcKind::Pipe { .. } | ArcKind::Resistor { .. } | ArcKind::ShortPipe)
    }

    /// Drop coefficient; 0 for lossless elements.
    pub fn w(&self) -> f64 {
        match *self {
            ArcKind::Pipe { w } | ArcKind::Resistor { w } => w,
            _ => 0.0,
        }
    }

    pub fn is_compressor(&self) -> bool {
        matches!(self, ArcKind::Compressor { .. })
    }

    pub fn is_valve_family(&self) -> bool {
        matches!(self, ArcKind::Valve | ArcKind::ControlValve { .. })
    }

    /// Pressure-ratio window for compressors and valves.
    pub fn ratio_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ArcKind::Compressor { alpha_lo, alpha_hi, .. }
            | ArcKind::ControlValve { alpha_lo, alpha_hi } => Some((alpha_lo, alpha_hi)),
            ArcKind::Valve => Some((1.0, 1.0)),
            _ => None,
        }
    }
}

/// Installed or buildable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ArcStatus {
    Existing,
    Candidate { cost: f64 },
}

impl ArcStatus {
    pub fn is_candidate(&self) -> bool {
        matches!(self, ArcStatus::Candidate { .. })
    }

    pub fn cost(&self) -> f64 {
        match *self {
            ArcStatus::Existing => 0.0,
            ArcStatus::Candidate { cost } => cost,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: ArcKind,
    #[serde(flatten)]
    pub status: ArcStatus,
    /// Diameter-choice set this candidate belongs to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusivity_group: Option<String>,
    /// Cell-level link: candidates sharing a column id must be built together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_column: Option<String>,
    /// Pipe diameter in mm, when known (used to cost parallel loops).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_mm: Option<f64>,
    /// Pipe length in km, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
}

/// A machine-readable invariant violation. Violations are data, not errors:
/// `validate` reports all of them instead of failing on the first.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BalanceViolation { residual: f64, tolerance: f64 },
    DanglingEndpoint { arc: ArcId, node: NodeId },
    DuplicateNodeId { node: NodeId },
    DuplicateArcId { arc: ArcId },
    SelfLoop { arc: ArcId },
    BoundOrder { node: NodeId, beta_lo: f64, beta_hi: f64 },
    NonFiniteInjection { node: NodeId },
    NonPositiveDropCoefficient { arc: ArcId, w: f64 },
    NegativeCost { arc: ArcId, cost: f64 },
    BadRatioBounds { arc: ArcId, alpha_lo: f64, alpha_hi: f64 },
    GroupOnNonCandidatePipe { arc: ArcId, group: String },
}

impl Violation {
    /// Short stable code for reports and tests.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::BalanceViolation { .. } => "balance",
            Violation::DanglingEndpoint { .. } => "dangling-endpoint",
            Violation::DuplicateNodeId { .. } => "duplicate-node-id",
            Violation::DuplicateArcId { .. } => "duplicate-arc-id",
            Violation::SelfLoop { .. } => "self-loop",
            Violation::BoundOrder { .. } => "bound-order",
            Violation::NonFiniteInjection { .. } => "non-finite-injection",
            Violation::NonPositiveDropCoefficient { .. } => "non-positive-w",
            Violation::NegativeCost { .. } => "negative-cost",
            Violation::BadRatioBounds { .. } => "bad-ratio-bounds",
            Violation::GroupOnNonCandidatePipe { .. } => "group-on-non-candidate-pipe",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BalanceViolation { residual, tolerance } => {
                write!(f, "injections unbalanced: residual {residual:e} exceeds {tolerance:e}")
            }
            Violation::DanglingEndpoint { arc, node } => {
                write!(f, "arc {arc} references unknown node {node}")
            }
            Violation::DuplicateNodeId { node } => write!(f, "duplicate node id {node}"),
            Violation::DuplicateArcId { arc } => write!(f, "duplicate arc id {arc}"),
            Violation::SelfLoop { arc } => write!(f, "arc {arc} connects a node to itself"),
            Violation::BoundOrder { node, beta_lo, beta_hi } => {
                write!(f, "node {node} has beta_lo {beta_lo} > beta_hi {beta_hi} or negative lower bound")
            }
            Violation::NonFiniteInjection { node } => write!(f, "node {node} has non-finite q"),
            Violation::NonPositiveDropCoefficient { arc, w } => {
                write!(f, "arc {arc} has non-positive drop coefficient {w}")
            }
            Violation::NegativeCost { arc, cost } => write!(f, "arc {arc} has negative cost {cost}"),
            Violation::BadRatioBounds { arc, alpha_lo, alpha_hi } => {
                write!(f, "arc {arc} has invalid ratio bounds [{alpha_lo}, {alpha_hi}]")
            }
            Violation::GroupOnNonCandidatePipe { arc, group } => {
                write!(f, "arc {arc} carries exclusivity group {group} but is not a candidate pipe")
            }
        }
    }
}

/// Domain error for the closed-form operations.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainError {
    pub what: String,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "domain error: {}", self.what)
    }
}

impl std::error::Error for DomainError {}

/// Headline counts in the table convention: towns only, by component class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NetworkStats {
    pub towns: usize,
    pub nodes: usize,
    pub injections: usize,
    pub demands: usize,
    pub existing_pipes: usize,
    pub existing_compressors: usize,
    pub existing_valves: usize,
    pub candidate_pipes: usize,
    pub candidate_compressors: usize,
}

/// Immutable network with derived index structures.
#[derive(Clone, Debug)]
pub struct GasNetwork {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    node_index: BTreeMap<NodeId, usize>,
    arcs_out: Vec<Vec<usize>>,
    arcs_in: Vec<Vec<usize>>,
    /// Exclusivity groups where choosing nothing is allowed (Σz ≤ 1 instead
    /// of Σz = 1).
    optional_groups: BTreeSet<String>,
}

impl GasNetwork {
    /// Builds the derived indices. Arcs whose endpoints are unknown are kept
    /// (validate reports them); their incidence entries are skipped.
    pub fn new(nodes: Vec<Node>, arcs: Vec<Arc>) -> Self {
        let mut node_index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            node_index.entry(n.id.clone()).or_insert(i);
        }
        let mut arcs_out = vec![Vec::new(); nodes.len()];
        let mut arcs_in = vec![Vec::new(); nodes.len()];
        for (a, arc) in arcs.iter().enumerate() {
            if let Some(&i) = node_index.get(&arc.from) {
                arcs_out[i].push(a);
            }
            if let Some(&j) = node_index.get(&arc.to) {
                arcs_in[j].push(a);
            }
        }
        GasNetwork { nodes, arcs, node_index, arcs_out, arcs_in, optional_groups: BTreeSet::new() }
    }

    /// Marks exclusivity groups whose choice may also be "build nothing".
    pub fn with_optional_groups(mut self, groups: BTreeSet<String>) -> Self {
        self.optional_groups = groups;
        self
    }

    pub fn is_optional_group(&self, group: &str) -> bool {
        self.optional_groups.contains(group)
    }

    pub fn optional_groups(&self) -> &BTreeSet<String> {
        &self.optional_groups
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn arc_endpoints(&self, arc: usize) -> Option<(usize, usize)> {
        let a = &self.arcs[arc];
        Some((self.node_index(&a.from)?, self.node_index(&a.to)?))
    }

    /// Arc indices leaving node `i`.
    pub fn arcs_out(&self, i: usize) -> &[usize] {
        &self.arcs_out[i]
    }

    /// Arc indices entering node `i`.
    pub fn arcs_in(&self, i: usize) -> &[usize] {
        &self.arcs_in[i]
    }

    /// Injection set: node indices with q > 0.
    pub fn injections(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].q > 0.0).collect()
    }

    /// Demand set: node indices with q < 0.
    pub fn demands(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].q < 0.0).collect()
    }

    /// Total injected flux Σ_{q>0} q — the flow big-M used by the models.
    pub fn phi_max(&self) -> f64 {
        self.nodes.iter().map(|n| n.q.max(0.0)).sum()
    }

    /// Non-dummy node count (the table convention).
    pub fn towns(&self) -> usize {
        self.nodes.iter().filter(|n| !n.dummy).count()
    }

    pub fn stats(&self) -> NetworkStats {
        let mut s = NetworkStats { towns: self.towns(), nodes: self.nodes.len(), ..Default::default() };
        for n in &self.nodes {
            if n.q > 0.0 {
                s.injections += 1;
            } else if n.q < 0.0 {
                s.demands += 1;
            }
        }
        for a in &self.arcs {
            match (&a.kind, a.status.is_candidate()) {
                (k, false) if k.is_pipe_family() => s.existing_pipes += 1,
                (k, true) if k.is_pipe_family() => s.candidate_pipes += 1,
                (ArcKind::Compressor { .. }, false) => s.existing_compressors += 1,
                (ArcKind::Compressor { .. }, true) => s.candidate_compressors += 1,
                _ => s.existing_valves += 1,
            }
        }
        s
    }

    /// Members of each exclusivity group, in arc order.
    pub fn exclusivity_groups(&self) -> BTreeMap<String, Vec<usize>> {
        let mut m: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, a) in self.arcs.iter().enumerate() {
            if let Some(g) = &a.exclusivity_group {
                m.entry(g.clone()).or_default().push(i);
            }
        }
        m
    }

    /// Members of each parallel-column link class, in arc order.
    pub fn parallel_columns(&self) -> BTreeMap<String, Vec<usize>> {
        let mut m: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, a) in self.arcs.iter().enumerate() {
            if let Some(c) = &a.parallel_column {
                m.entry(c.clone()).or_default().push(i);
            }
        }
        m
    }

    /// Checks every structural invariant and returns the violations found.
    /// An empty list means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut seen_nodes = BTreeSet::new();
        for n in &self.nodes {
            if !seen_nodes.insert(n.id.clone()) {
                out.push(Violation::DuplicateNodeId { node: n.id.clone() });
            }
            if !n.q.is_finite() {
                out.push(Violation::NonFiniteInjection { node: n.id.clone() });
            }
            if !(0.0 <= n.beta_lo && n.beta_lo <= n.beta_hi) {
                out.push(Violation::BoundOrder {
                    node: n.id.clone(),
                    beta_lo: n.beta_lo,
                    beta_hi: n.beta_hi,
                });
            }
        }

        let max_q = self.nodes.iter().map(|n| n.q.abs()).fold(0.0_f64, f64::max);
        let tolerance = 1e-6 * max_q;
        let residual: f64 = self.nodes.iter().map(|n| n.q).sum();
        if residual.abs() > tolerance {
            out.push(Violation::BalanceViolation { residual, tolerance });
        }

        let mut seen_arcs = BTreeSet::new();
        for a in &self.arcs {
            if !seen_arcs.insert(a.id.clone()) {
                out.push(Violation::DuplicateArcId { arc: a.id.clone() });
            }
            for end in [&a.from, &a.to] {
                if self.node_index(end).is_none() {
                    out.push(Violation::DanglingEndpoint { arc: a.id.clone(), node: end.clone() });
                }
            }
            if a.from == a.to {
                out.push(Violation::SelfLoop { arc: a.id.clone() });
            }
            match a.kind {
                ArcKind::Pipe { w } | ArcKind::Resistor { w } => {
                    if !(w > 0.0) || !w.is_finite() {
                        out.push(Violation::NonPositiveDropCoefficient { arc: a.id.clone(), w });
                    }
                }
                ArcKind::Compressor { alpha_lo, alpha_hi, .. } => {
                    if !(0.0 < alpha_lo && alpha_lo <= alpha_hi) {
                        out.push(Violation::BadRatioBounds { arc: a.id.clone(), alpha_lo, alpha_hi });
                    }
                }
                ArcKind::ControlValve { alpha_lo, alpha_hi } => {
                    if !(0.0 < alpha_lo && alpha_lo <= alpha_hi && alpha_hi <= 1.0) {
                        out.push(Violation::BadRatioBounds { arc: a.id.clone(), alpha_lo, alpha_hi });
                    }
                }
                _ => {}
            }
            if let ArcStatus::Candidate { cost } = a.status {
                if cost < 0.0 || !cost.is_finite() {
                    out.push(Violation::NegativeCost { arc: a.id.clone(), cost });
                }
            }
            if let Some(g) = &a.exclusivity_group {
                if !(a.status.is_candidate() && a.kind.is_pipe_family()) {
                    out.push(Violation::GroupOnNonCandidatePipe {
                        arc: a.id.clone(),
                        group: g.clone(),
                    });
                }
            }
        }

        out
    }

    /// Returns a copy with every injection/demand scaled by `factor`.
    /// Balance is preserved exactly (scaling is linear in q).
    pub fn scaled_loads(&self, factor: f64) -> GasNetwork {
        let mut nodes = self.nodes.clone();
        for n in &mut nodes {
            n.q *= factor;
        }
        GasNetwork::new(nodes, self.arcs.clone()).with_optional_groups(self.optional_groups.clone())
    }
}

/// Resistance coefficient of the steady-state drop law from gas and pipe
/// parameters: `w = Z·R·f·T / (2·D)`. Instance files usually carry `w`
/// directly (with pipe length already folded in); this closed form is
/// provided for completeness.
pub fn weymouth_coefficient(z: f64, r: f64, f: f64, t: f64, d: f64) -> Result<f64, DomainError> {
    for (name, v) in [("Z", z), ("R", r), ("f", f), ("T", t), ("D", d)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(DomainError { what: format!("{name} must be positive and finite, got {v}") });
        }
    }
    Ok(z * r * f * t / (2.0 * d))
}

/// Installation cost of a pipe of diameter `d_mm` (mm) and length `l_km` (km):
/// `L·(1.04081e-6·D^2.5 + 11.2155)`.
pub fn expansion_cost(d_mm: f64, l_km: f64) -> Result<f64, DomainError> {
    if !(d_mm > 0.0) || !d_mm.is_finite() {
        return Err(DomainError { what: format!("diameter must be positive and finite, got {d_mm}") });
    }
    if !(l_km > 0.0) || !l_km.is_finite() {
        return Err(DomainError { what: format!("length must be positive and finite, got {l_km}") });
    }
    Ok(l_km * (1.04081e-6 * d_mm.powf(2.5) + 11.2155))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, q: f64) -> Node {
        Node {
            id: NodeId::new(id),
            q,
            beta_lo: 0.0,
            beta_hi: 10_000.0,
            label: String::new(),
            lat: None,
            lon: None,
            dummy: false,
        }
    }

    fn pipe(id: &str, from: &str, to: &str, w: f64) -> Arc {
        Arc {
            id: ArcId::new(id),
            from: NodeId::new(from),
            to: NodeId::new(to),
            kind: ArcKind::Pipe { w },
            status: ArcStatus::Existing,
            exclusivity_group: None,
            parallel_column: None,
            diameter_mm: None,
            length_km: None,
        }
    }

    #[test]
    fn weymouth_coefficient_reduces_to_half_inverse_diameter() {
        assert_eq!(weymouth_coefficient(1.0, 1.0, 1.0, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(weymouth_coefficient(2.0, 3.0, 4.0, 5.0, 6.0).unwrap(), 10.0);
        assert!(weymouth_coefficient(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(weymouth_coefficient(1.0, 1.0, 1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn weymouth_coefficient_monotone() {
        let base = weymouth_coefficient(0.8, 500.0, 0.01, 281.0, 0.6).unwrap();
        for scale in [1.1, 1.5, 2.0] {
            assert!(weymouth_coefficient(0.8 * scale, 500.0, 0.01, 281.0, 0.6).unwrap() > base);
            assert!(weymouth_coefficient(0.8, 500.0 * scale, 0.01, 281.0, 0.6).unwrap() > base);
            assert!(weymouth_coefficient(0.8, 500.0, 0.01 * scale, 281.0, 0.6).unwrap() > base);
            assert!(weymouth_coefficient(0.8, 500.0, 0.01, 281.0 * scale, 0.6).unwrap() > base);
            assert!(weymouth_coefficient(0.8, 500.0, 0.01, 281.0, 0.6 * scale).unwrap() < base);
        }
    }

    #[test]
    fn expansion_cost_limits_and_regression() {
        // Diameter term vanishes as D -> 0+.
        let c = expansion_cost(1e-9, 1.0).unwrap();
        assert!((c - 11.2155).abs() < 1e-9);
        // High-precision oracle value for D = 890 mm, L = 10 km.
        let c = expansion_cost(890.0, 10.0).unwrap();
        assert!((c - 358.10479949370723).abs() < 1e-10, "got {c}");
        assert!(expansion_cost(890.0, 0.0).is_err());
        assert!(expansion_cost(0.0, 10.0).is_err());
    }

    #[test]
    fn expansion_cost_strictly_increasing() {
        let mut prev = 0.0;
        for d in [100.0, 300.0, 500.0, 900.0, 1200.0] {
            let c = expansion_cost(d, 7.0).unwrap();
            assert!(c > prev);
            prev = c;
        }
        let mut prev = 0.0;
        for l in [1.0, 2.0, 5.0, 50.0] {
            let c = expansion_cost(400.0, l).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn validate_balanced_network_is_clean() {
        let net = GasNetwork::new(
            vec![node("a", 5.0), node("b", -5.0)],
            vec![pipe("p", "a", "b", 1.0)],
        );
        assert!(net.validate().is_empty());
        assert_eq!(net.phi_max(), 5.0);
        assert_eq!(net.injections(), vec![0]);
        assert_eq!(net.demands(), vec![1]);
    }

    #[test]
    fn validate_reports_imbalance_with_residual() {
        let net = GasNetwork::new(vec![node("a", 5.0), node("b", -4.0)], vec![]);
        let v = net.validate();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::BalanceViolation { residual, .. } => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn validate_reports_dangling_endpoint() {
        let net = GasNetwork::new(
            vec![node("a", 5.0), node("b", -5.0)],
            vec![pipe("p", "a", "X", 1.0)],
        );
        let codes: Vec<_> = net.validate().iter().map(|v| v.code()).collect();
        assert_eq!(codes, vec!["dangling-endpoint"]);
    }

    #[test]
    fn scaled_loads_preserves_balance_and_structure() {
        let net = GasNetwork::new(
            vec![node("a", 5.0), node("b", -5.0)],
            vec![pipe("p", "a", "b", 1.0)],
        );
        let scaled = net.scaled_loads(2.0);
        assert_eq!(scaled.nodes()[0].q, 10.0);
        assert_eq!(scaled.nodes()[1].q, -10.0);
        assert!(scaled.validate().is_empty());
        let same = net.scaled_loads(1.0);
        assert_eq!(same.nodes()[0].q, 5.0);
    }
}
