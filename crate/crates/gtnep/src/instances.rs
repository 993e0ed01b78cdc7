//! Instance files and the embedded benchmark set.
//!
//! The on-disk format is JSON (UTF-8) with top-level `schema_version`,
//! `metadata`, `nodes[]`, `arcs[]` and `groups[]`. Exact field names are the
//! format contract; see `docs/instance-format.md`. Exclusivity groups live in
//! `groups[]` (with membership by arc id and an `exactly_one` flag);
//! cell-level build links live on arcs as `parallel_column`.
//!
//! Embedded instances: `belgian-A`, `belgian-A1`..`A3`, `belgian-B1`..`B4`,
//! `tiny-3`, `tiny-loop`.

use crate::network::{Arc, ArcId, ArcKind, ArcStatus, GasNetwork, Node, NodeId, Violation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub notes: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: String,
    pub members: Vec<ArcId>,
    #[serde(default = "default_true")]
    pub exactly_one: bool,
}

fn default_true() -> bool {
    true
}

/// Structured-text form of a network plus provenance metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    #[serde(default)]
    pub metadata: Metadata,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
}

#[derive(Debug)]
pub enum ParseError {
    /// Malformed JSON, with the position serde reports.
    Syntax { line: usize, column: usize, message: String },
    /// Unsupported schema version.
    Schema { found: u32 },
    /// Well-formed file describing an invalid network.
    Invalid { violations: Vec<Violation> },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            ParseError::Schema { found } => {
                write!(f, "unsupported schema_version {found} (expected {SCHEMA_VERSION})")
            }
            ParseError::Invalid { violations } => {
                write!(f, "invalid network ({} violations):", violations.len())?;
                for v in violations {
                    write!(f, "\n  [{}] {v}", v.code())?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ParseError {}

impl InstanceFile {
    pub fn from_str(text: &str) -> Result<InstanceFile, ParseError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ParseError::Schema { found: file.schema_version });
        }
        Ok(file)
    }

    /// Resolves group membership onto arcs and validates the result.
    pub fn into_network(self) -> Result<GasNetwork, ParseError> {
        let mut arcs = self.arcs;
        let mut optional = BTreeSet::new();
        for g in &self.groups {
            if !g.exactly_one {
                optional.insert(g.id.clone());
            }
            for m in &g.members {
                if let Some(a) = arcs.iter_mut().find(|a| &a.id == m) {
                    a.exclusivity_group = Some(g.id.clone());
                }
            }
        }
        let net = GasNetwork::new(self.nodes, arcs).with_optional_groups(optional);
        let violations = net.validate();
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(ParseError::Invalid { violations })
        }
    }

    /// Canonical text form: groups are emitted in `groups[]`, not inline.
    pub fn to_text(&self) -> String {
        let mut file = self.clone();
        for a in &mut file.arcs {
            a.exclusivity_group = None;
        }
        let mut s = serde_json::to_string_pretty(&file).expect("instance serialization");
        s.push('\n');
        s
    }

    /// Rebuilds the structured form from a network.
    pub fn from_network(net: &GasNetwork, metadata: Metadata) -> InstanceFile {
        let mut groups = Vec::new();
        for (id, members) in net.exclusivity_groups() {
            groups.push(GroupSpec {
                exactly_one: !net.is_optional_group(&id),
                members: members.iter().map(|&a| net.arcs()[a].id.clone()).collect(),
                id,
            });
        }
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            metadata,
            nodes: net.nodes().to_vec(),
            arcs: net.arcs().to_vec(),
            groups,
        }
    }
}

/// Parses instance text into a validated network.
pub fn parse(text: &str) -> Result<GasNetwork, ParseError> {
    InstanceFile::from_str(text)?.into_network()
}

/// Serializes a network in the canonical file format.
pub fn serialize(net: &GasNetwork, metadata: Metadata) -> String {
    InstanceFile::from_network(net, metadata).to_text()
}

/// Returns a copy of the network with every injection and demand scaled by
/// `factor` (> 0). Bounds and arcs are unchanged; balance is preserved.
pub fn apply_stress(net: &GasNetwork, factor: f64) -> GasNetwork {
    net.scaled_loads(factor)
}

const BELGIAN_A: &str = include_str!("data/belgian-A.json");
const BELGIAN_A1: &str = include_str!("data/belgian-A1.json");
const BELGIAN_A2: &str = include_str!("data/belgian-A2.json");
const BELGIAN_A3: &str = include_str!("data/belgian-A3.json");
const TINY_3: &str = include_str!("data/tiny-3.json");
const TINY_LOOP: &str = include_str!("data/tiny-loop.json");

pub const EMBEDDED_NAMES: [&str; 10] = [
    "belgian-A", "belgian-A1", "belgian-A2", "belgian-A3",
    "belgian-B1", "belgian-B2", "belgian-B3", "belgian-B4",
    "tiny-3", "tiny-loop",
];

/// Looks up an embedded instance by name.
pub fn by_name(name: &str) -> Option<GasNetwork> {
    let text = match name {
        "belgian-A" => BELGIAN_A,
        "belgian-A1" => BELGIAN_A1,
        "belgian-A2" => BELGIAN_A2,
        "belgian-A3" => BELGIAN_A3,
        "tiny-3" => TINY_3,
        "tiny-loop" => TINY_LOOP,
        "belgian-B1" => return Some(b_instance(1).expect("embedded B1")),
        "belgian-B2" => return Some(b_instance(2).expect("embedded B2")),
        "belgian-B3" => return Some(b_instance(3).expect("embedded B3")),
        "belgian-B4" => return Some(b_instance(4).expect("embedded B4")),
        _ => return None,
    };
    Some(parse(text).expect("embedded instance is valid"))
}

/// Friction-factor pipe resistance from diameter (mm) and length (km), in the
/// same unit system as the embedded Belgian data (rugosity 0.05 mm, z = 0.80,
/// T = 281.15 K, relative density 0.616).
pub fn pipe_resistance(d_mm: f64, l_km: f64) -> f64 {
    let lambda = 1.0 / (2.0 * (3.7 * d_mm / 0.05).log10()).powi(2);
    let c2 = 96.074830e-15 * d_mm.powi(5) / (lambda * 0.80 * 281.15 * l_km * 0.616);
    1.0 / c2
}

/// One corridor row of the rebuild menu: label, endpoints, length and up to
/// five diameter choices (None = the published solution built nothing there).
struct MenuRow {
    label: &'static str,
    from: &'static str,
    to: &'static str,
    length_km: f64,
    diameters: [Option<f64>; 5],
    /// Paired parallel corridor: same column must be chosen on both rows.
    pair: Option<&'static str>,
}

const D: fn(f64) -> Option<f64> = Some;

#[rustfmt::skip]
fn menu_rows() -> Vec<MenuRow> {
    let r = |label, from, to, length_km, diameters, pair| MenuRow { label, from, to, length_km, diameters, pair };
    vec![
        r("1-2-a", "1", "2", 4.0, [D(890.0), D(650.3), D(610.8), D(524.7), D(512.1)], Some("1-2")),
        r("1-2-b", "1", "2", 4.0, [D(890.0), D(650.3), D(610.8), D(524.7), D(512.1)], Some("1-2")),
        r("2-3-a", "2", "3", 6.0, [D(890.0), D(834.7), D(784.0), D(673.5), D(657.3)], Some("2-3")),
        r("2-3-b", "2", "3", 6.0, [D(890.0), D(834.7), D(784.0), D(673.5), D(657.3)], Some("2-3")),
        r("3-4", "3", "4", 26.0, [D(890.0), D(998.9), D(938.3), D(806.0), D(786.7)], None),
        r("5-6", "5", "6", 43.0, [D(590.1), D(604.3), D(567.6), D(487.6), D(475.9)], None),
        r("6-7", "6", "7", 29.0, [D(590.1), None, None, None, None], None),
        r("7-4", "7", "4", 19.0, [D(590.1), D(671.7), D(630.9), D(542.0), D(529.0)], None),
        r("4-14", "4", "14", 55.0, [D(890.0), D(829.9), D(779.5), D(669.7), D(653.6)], None),
        r("8-9-a", "8", "9in", 5.0, [D(890.0), D(902.8), D(848.0), D(728.4), D(711.0)], Some("8-9")),
        r("8-9-b", "8", "9in", 5.0, [D(395.5), D(902.8), D(848.0), D(728.4), D(711.0)], Some("8-9")),
        r("9-10-a", "9", "10", 20.0, [D(890.0), D(902.8), D(848.0), D(728.4), D(710.9)], Some("9-10")),
        r("9-10-b", "9", "10", 20.0, [D(395.5), D(902.8), D(848.0), D(728.4), D(711.0)], Some("9-10")),
        r("10-11-a", "10", "11", 25.0, [D(890.0), D(787.6), D(739.8), D(635.5), D(620.1)], Some("10-11")),
        r("10-11-b", "10", "11", 25.0, [D(395.5), D(787.6), D(739.8), D(635.5), D(620.4)], Some("10-11")),
        r("11-12", "11", "12", 42.0, [D(890.0), D(979.8), D(920.3), D(790.6), D(771.6)], None),
        r("12-13", "12", "13", 40.0, [D(890.0), D(915.1), D(859.6), D(738.4), D(720.7)], None),
        r("13-14", "13", "14", 5.0, [D(890.0), D(952.6), D(894.7), D(768.6), D(750.1)], None),
        r("14-15", "14", "15", 10.0, [D(890.0), D(1201.0), D(1128.0), D(969.0), D(945.8)], None),
        r("15-16", "15", "16", 25.0, [D(890.0), D(1038.4), D(975.3), D(837.9), D(817.7)], None),
        r("11-17", "11", "17", 10.5, [D(395.5), D(469.0), D(440.5), D(378.4), D(369.3)], None),
        r("17-18", "17", "18in", 26.0, [D(315.5), D(469.0), D(440.5), D(378.4), D(369.3)], None),
        r("18-19", "18", "19", 98.0, [D(315.5), D(469.0), D(440.5), D(378.4), D(369.3)], None),
        r("19-20", "19", "20", 6.0, [D(315.5), D(448.9), D(421.7), D(362.2), D(353.5)], None),
    ]
}

/// Load profiles for the rebuild studies, nodes 1..20. B1/B2/B4 carry one
/// un-rounding of a 4-decimal published value (nodes 16/16/10) so injections
/// balance exactly.
#[rustfmt::skip]
const B_LOADS: [[f64; 20]; 4] = [
    [9.5883, 8.1833, -3.918, 0.0, 4.0315, -4.0315, -5.2413, 22.012, 0.0, -6.4744,
     0.0, -2.1929, 1.2162, 0.9840, -6.4056, -15.6120, 0.0, 0.0, -0.2059, -1.9337],
    [9.8225, 8.3447, -3.918, 0.0, 4.0432, -4.0432, -5.2644, 22.012, 0.0, -6.4951,
     0.0, -2.1191, 1.3225, 0.6164, -6.5885, -15.5906, 0.0, 0.0, -0.2312, -1.9112],
    [9.8218, 8.1340, -3.918, 0.0, 4.0383, -4.0383, -5.2562, 22.012, 0.0, -6.3970,
     0.0, -2.1162, 1.0802, 1.0776, -6.8366, -15.4616, 0.0, 0.0, -0.2269, -1.9131],
    [9.7205, 8.3628, -3.918, 0.0, 4.0364, -4.0364, -5.2644, 22.012, 0.0, -6.3815,
     0.0, -2.0984, 1.1591, 1.0235, -6.8857, -15.5899, 0.0, 0.0, -0.2164, -1.9236],
];

/// Builds a "rebuild from scratch" instance: the belgian-A skeleton with zero
/// existing arcs, one diameter-choice group per corridor row, column links
/// across parallel rows, free station connectors and 12 candidate compressor
/// units.
pub fn b_instance(variant: u32) -> Result<GasNetwork, String> {
    if !(1..=4).contains(&variant) {
        return Err(format!("unknown rebuild variant {variant} (expected 1..4)"));
    }
    let loads = &B_LOADS[(variant - 1) as usize];

    let base = by_name("belgian-A").expect("embedded base");
    let mut nodes = base.nodes().to_vec();
    for n in &mut nodes {
        n.q = match n.id.0.parse::<usize>() {
            Ok(i) if (1..=20).contains(&i) => loads[i - 1],
            _ => 0.0,
        };
    }

    let mut arcs = Vec::new();
    let mut optional = BTreeSet::new();
    for row in menu_rows() {
        let group = format!("row-{}", row.label);
        let mut any = false;
        for (col, d) in row.diameters.iter().enumerate() {
            let Some(d) = *d else { continue };
            any = true;
            arcs.push(Arc {
                id: ArcId::new(format!("b-{}-d{}", row.label, col + 1)),
                from: NodeId::new(row.from),
                to: NodeId::new(row.to),
                kind: ArcKind::Pipe { w: pipe_resistance(d, row.length_km) },
                status: ArcStatus::Candidate {
                    cost: crate::network::expansion_cost(d, row.length_km).expect("menu cell cost"),
                },
                exclusivity_group: Some(group.clone()),
                parallel_column: row.pair.map(|p| format!("{}:d{}", p, col + 1)),
                diameter_mm: Some(d),
                length_km: Some(row.length_km),
            });
        }
        assert!(any, "menu row without any choice");
        if row.diameters.iter().any(|d| d.is_none()) {
            optional.insert(group);
        }
    }

    // Station corridors: a free connector forced by its own group, plus four
    // candidate compressor units per original machine.
    for (corridor, from, to, units) in
        [("berneau", "9in", "9", 8usize), ("sinsin", "18in", "18", 4usize)]
    {
        arcs.push(Arc {
            id: ArcId::new(format!("b-st-{corridor}")),
            from: NodeId::new(from),
            to: NodeId::new(to),
            kind: ArcKind::ShortPipe,
            status: ArcStatus::Candidate { cost: 0.0 },
            exclusivity_group: Some(format!("st-{corridor}")),
            parallel_column: None,
            diameter_mm: None,
            length_km: None,
        });
        for u in 0..units {
            arcs.push(Arc {
                id: ArcId::new(format!("b-c-{corridor}-{}", u + 1)),
                from: NodeId::new(from),
                to: NodeId::new(to),
                kind: ArcKind::Compressor { alpha_lo: 1.0, alpha_hi: 1.6, bidirectional: true },
                status: ArcStatus::Candidate { cost: 1500.0 },
                exclusivity_group: None,
                parallel_column: None,
                diameter_mm: None,
                length_km: None,
            });
        }
    }

    let net = GasNetwork::new(nodes, arcs).with_optional_groups(optional);
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(format!("rebuild instance invalid: {violations:?}"));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn belgian_a_headline_counts() {
        let net = by_name("belgian-A").unwrap();
        let s = net.stats();
        assert_eq!(s.towns, 20);
        assert_eq!(s.injections, 6);
        assert_eq!(s.demands, 9);
        assert_eq!(s.existing_pipes, 24);
        assert_eq!(s.existing_compressors, 3);
        assert_eq!(s.candidate_pipes, 0);
        assert_eq!(s.candidate_compressors, 0);
    }

    #[test]
    fn belgian_expansions_headline_counts() {
        for (name, towns, new_pipes, new_comps) in [
            ("belgian-A1", 22, 4, 2),
            ("belgian-A2", 25, 7, 4),
            ("belgian-A3", 29, 12, 5),
        ] {
            let net = by_name(name).unwrap();
            let s = net.stats();
            assert_eq!(s.towns, towns, "{name} towns");
            assert_eq!(s.existing_pipes, 24, "{name} base pipes");
            assert_eq!(s.existing_compressors, 3, "{name} base compressors");
            assert_eq!(s.candidate_pipes, new_pipes, "{name} new pipes");
            assert_eq!(s.candidate_compressors, new_comps, "{name} new compressors");
        }
    }

    #[test]
    fn empty_file_is_a_syntax_error() {
        match parse("") {
            Err(ParseError::Syntax { .. }) => {}
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn all_embedded_instances_validate_clean() {
        for name in EMBEDDED_NAMES {
            let net = by_name(name).unwrap_or_else(|| panic!("missing {name}"));
            assert!(net.validate().is_empty(), "{name} has violations");
        }
    }

    #[test]
    fn round_trip_is_stable_on_all_embedded_instances() {
        for name in EMBEDDED_NAMES {
            let net = by_name(name).unwrap();
            let text = serialize(&net, Metadata { name: name.into(), ..Default::default() });
            let net2 = parse(&text).unwrap_or_else(|e| panic!("{name} reparse: {e}"));
            let text2 = serialize(&net2, Metadata { name: name.into(), ..Default::default() });
            assert_eq!(text, text2, "{name} round-trip drift");
            assert_eq!(net.nodes().len(), net2.nodes().len());
            assert_eq!(net.arcs().len(), net2.arcs().len());
        }
    }

    #[test]
    fn stress_identity_and_scaling() {
        let net = by_name("tiny-3").unwrap();
        let same = apply_stress(&net, 1.0);
        assert_eq!(same.nodes()[0].q, net.nodes()[0].q);
        let doubled = apply_stress(&net, 2.0);
        assert_eq!(doubled.nodes()[0].q, 20.0);
        assert_eq!(doubled.nodes()[2].q, -20.0);
        assert!(doubled.validate().is_empty());
    }

    #[test]
    fn stress_composition_is_multiplicative() {
        let net = by_name("belgian-A").unwrap();
        let a = apply_stress(&apply_stress(&net, 1.25), 2.0);
        let b = apply_stress(&net, 2.5);
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            assert!((x.q - y.q).abs() <= 1e-12 * y.q.abs().max(1.0));
        }
    }

    #[test]
    fn rebuild_variants_match_published_loads() {
        let b1 = b_instance(1).unwrap();
        let idx = b1.node_index(&NodeId::new("1")).unwrap();
        assert_eq!(b1.nodes()[idx].q, 9.5883);

        let b4 = b_instance(4).unwrap();
        let idx = b4.node_index(&NodeId::new("16")).unwrap();
        assert_eq!(b4.nodes()[idx].q, -15.5899);

        assert!(b_instance(5).is_err());
    }

    #[test]
    fn rebuild_menu_composition() {
        let net = b_instance(2).unwrap();
        let s = net.stats();
        assert_eq!(s.towns, 20);
        assert_eq!(s.existing_pipes, 0);
        assert_eq!(s.existing_compressors, 0);
        // 116 diameter cells + 2 station connectors; 12 compressor units.
        assert_eq!(s.candidate_pipes, 118);
        assert_eq!(s.candidate_compressors, 12);
        // 24 corridor rows + 2 station groups; only the row with published
        // no-build cells is optional.
        let groups = net.exclusivity_groups();
        assert_eq!(groups.len(), 26);
        assert!(net.is_optional_group("row-6-7"));
        assert!(!net.is_optional_group("row-5-6"));
        // Column links pair the five doubled corridors, five columns each.
        assert_eq!(net.parallel_columns().len(), 25);
    }
}
