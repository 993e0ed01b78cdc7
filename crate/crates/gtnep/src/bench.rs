//! Pipeline orchestration and the benchmark harness behind the CLI: solve an
//! instance end to end (build, branch-and-bound, recovery, certification),
//! run stress sweeps with parallel-loop candidates, and render result tables.

use crate::bnb::{self, BnbParams, SolveReport, SolveStatus};
use crate::instances::{self, Metadata};
use crate::model::{self, BuildOptions, LinRow, MathProgram, RowTag, Sense, VarKind};
use crate::network::{expansion_cost, Arc, ArcId, ArcKind, ArcStatus, GasNetwork};
use crate::recovery::{self, CertifyTols, RecoveryOptions, RecoveryStatus};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    Misocp,
    Pla { segments: usize },
    RelaxOnly,
}

impl ModelChoice {
    pub fn label(&self) -> String {
        match self {
            ModelChoice::Misocp => "misocp".into(),
            ModelChoice::Pla { segments } => format!("pla{segments}"),
            ModelChoice::RelaxOnly => "relax-only".into(),
        }
    }
}

/// Where an instance comes from: an embedded name (also searched in
/// `$GTNEP_DATA_DIR` and the working directory as `<name>.json`) or an
/// explicit file path.
#[derive(Clone, Debug)]
pub enum Source {
    Name(String),
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    pub model: ModelChoice,
    /// Multiplicative load factor (1.0 = nominal).
    pub stress: f64,
    pub params: BnbParams,
    pub cuts: bool,
    /// Report wall-clock times; switched off for byte-reproducible output.
    pub timings: bool,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(source: Source) -> RunConfig {
        RunConfig {
            source,
            model: ModelChoice::Misocp,
            stress: 1.0,
            params: BnbParams::default(),
            cuts: true,
            timings: true,
            out: None,
        }
    }
}

#[derive(Debug)]
pub enum BenchError {
    UnknownInstance(String),
    Io(std::io::Error),
    Parse(String),
    Build(String),
    MissingGeometry(String),
    NoResults(String),
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchError::UnknownInstance(n) => write!(f, "unknown instance '{n}'"),
            BenchError::Io(e) => write!(f, "io error: {e}"),
            BenchError::Parse(e) => write!(f, "{e}"),
            BenchError::Build(e) => write!(f, "model build failed: {e}"),
            BenchError::MissingGeometry(a) => {
                write!(f, "arc {a} lacks diameter/length metadata needed to cost a parallel loop")
            }
            BenchError::NoResults(d) => write!(f, "no result files found in {d}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e)
    }
}

/// Resolves a config source to a named, validated network.
pub fn load(source: &Source) -> Result<(String, GasNetwork), BenchError> {
    match source {
        Source::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let net = instances::parse(&text).map_err(|e| BenchError::Parse(e.to_string()))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, net))
        }
        Source::Name(name) => {
            if let Some(net) = instances::by_name(name) {
                return Ok((name.clone(), net));
            }
            let mut candidates = Vec::new();
            if let Ok(dir) = std::env::var("GTNEP_DATA_DIR") {
                candidates.push(PathBuf::from(dir).join(format!("{name}.json")));
            }
            candidates.push(PathBuf::from(format!("{name}.json")));
            for path in candidates {
                if path.is_file() {
                    let text = std::fs::read_to_string(&path)?;
                    let net =
                        instances::parse(&text).map_err(|e| BenchError::Parse(e.to_string()))?;
                    return Ok((name.clone(), net));
                }
            }
            Err(BenchError::UnknownInstance(name.clone()))
        }
    }
}

/// Everything one solve produces; serialized as the machine-readable result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRecord {
    pub instance: String,
    pub model: String,
    pub stress_pct: f64,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub cuts: usize,
    pub cpu_s: f64,
    pub recovery_residual: Option<f64>,
    pub recovery_attempts: Option<usize>,
    pub certify_pass: Option<bool>,
    pub certify_max_violation: Option<f64>,
    /// Built expansion arcs, by id.
    pub expansions: Vec<String>,
}

impl SolveRecord {
    pub fn status_enum(&self) -> SolveStatus {
        match self.status.as_str() {
            "OPT" => SolveStatus::Optimal,
            "LB" => SolveStatus::LowerBoundOnly,
            "UB" => SolveStatus::UpperBoundOnly,
            "INF" => SolveStatus::Infeasible,
            _ => SolveStatus::Unknown,
        }
    }
}

/// End-to-end solve of a loaded network under one configuration.
pub fn solve_network(name: &str, net: &GasNetwork, cfg: &RunConfig) -> Result<SolveRecord, BenchError> {
    let stressed = instances::apply_stress(net, cfg.stress);
    let options = BuildOptions { cuts: cfg.cuts };
    let started = std::time::Instant::now();

    let (status, objective, bound, gap, nodes, cuts, recovery, certify, expansions) = match &cfg.model {
        ModelChoice::RelaxOnly => {
            let prog = model::build_misocp(&stressed, options)
                .map_err(|e| BenchError::Build(e.to_string()))?;
            let rep = bnb::root_relaxation(&prog, &cfg.params);
            let bound = rep.bound.is_finite().then_some(rep.bound);
            (rep.status, rep.objective(), bound, None, rep.nodes, rep.cuts_added, None, None, vec![])
        }
        ModelChoice::Pla { segments } => {
            let prog = model::build_pla_mip(&stressed, *segments, options)
                .map_err(|e| BenchError::Build(e.to_string()))?;
            let rep = bnb::branch_and_bound(&prog, &cfg.params);
            let expansions = rep
                .incumbent
                .as_ref()
                .map(|inc| built_arcs(&stressed, &prog, &inc.x))
                .unwrap_or_default();
            let bound = rep.bound.is_finite().then_some(rep.bound);
            let gap = rep.gap.is_finite().then_some(rep.gap);
            (rep.status, rep.objective(), bound, gap, rep.nodes, rep.cuts_added, None, None, expansions)
        }
        ModelChoice::Misocp => {
            let prog = model::build_misocp(&stressed, options)
                .map_err(|e| BenchError::Build(e.to_string()))?;
            let rep = bnb::solve_misocp(&prog, &cfg.params);
            pipeline_after_bnb(&stressed, &prog, &rep)?
        }
    };

    let cpu_s = if cfg.timings { started.elapsed().as_secs_f64() } else { 0.0 };
    Ok(SolveRecord {
        instance: name.to_string(),
        model: cfg.model.label(),
        stress_pct: (cfg.stress - 1.0) * 100.0,
        status: status.token().to_string(),
        objective,
        bound,
        gap,
        nodes,
        cuts,
        cpu_s,
        recovery_residual: recovery.map(|r| r.0),
        recovery_attempts: recovery.map(|r| r.1),
        certify_pass: certify.map(|c| c.0),
        certify_max_violation: certify.map(|c| c.1),
        expansions,
    })
}

type PipelineTail = (
    SolveStatus,
    Option<f64>,
    Option<f64>,
    Option<f64>,
    usize,
    usize,
    Option<(f64, usize)>,
    Option<(bool, f64)>,
    Vec<String>,
);

/// Recovery + certification after the relaxation solve, folding the outcome
/// into the reporting categories.
fn pipeline_after_bnb(
    net: &GasNetwork,
    prog: &MathProgram,
    rep: &SolveReport,
) -> Result<PipelineTail, BenchError> {
    let minlp = model::build_minlp(net).map_err(|e| BenchError::Build(e.to_string()))?;
    let bound = rep.bound.is_finite().then_some(rep.bound);
    match rep.status {
        SolveStatus::Infeasible => {
            Ok((SolveStatus::Infeasible, None, None, None, rep.nodes, rep.cuts_added, None, None, vec![]))
        }
        SolveStatus::LowerBoundOnly | SolveStatus::Unknown => Ok((
            rep.status,
            None,
            bound,
            None,
            rep.nodes,
            rep.cuts_added,
            None,
            None,
            vec![],
        )),
        SolveStatus::Optimal | SolveStatus::UpperBoundOnly => {
            let rec = recovery::recover(net, prog, &rep.pool, &RecoveryOptions::default());
            let certified = (rec.status == RecoveryStatus::Feasible).then(|| {
                let assignment = rec.assignment.as_ref().expect("feasible recovery has a design");
                let x = recovery::assemble_point(net, &minlp, &rec.beta, &rec.phi, assignment);
                recovery::certify(&minlp, &x, CertifyTols::default())
            });
            if let Some(cert) = certified.as_ref().filter(|c| c.pass) {
                let assignment = rec.assignment.as_ref().expect("feasible recovery has a design");
                let gap = rep
                    .bound
                    .is_finite()
                    .then(|| ((rec.objective - rep.bound) / rec.objective.abs().max(1.0)).max(0.0));
                let status = match (rep.status, gap) {
                    (SolveStatus::Optimal, Some(g)) if g <= 1e-6 => SolveStatus::Optimal,
                    (SolveStatus::Optimal, _) => SolveStatus::UpperBoundOnly,
                    _ => SolveStatus::UpperBoundOnly,
                };
                let expansions = assignment_arcs(net, assignment);
                Ok((
                    status,
                    Some(rec.objective),
                    bound,
                    gap,
                    rep.nodes,
                    rep.cuts_added,
                    Some((rec.max_residual, rec.attempts)),
                    Some((cert.pass, cert.max_violation)),
                    expansions,
                ))
            } else {
                Ok((
                    SolveStatus::LowerBoundOnly,
                    None,
                    bound,
                    None,
                    rep.nodes,
                    rep.cuts_added,
                    Some((rec.max_residual, rec.attempts)),
                    certified.map(|c| (c.pass, c.max_violation)),
                    vec![],
                ))
            }
        }
    }
}

fn built_arcs(net: &GasNetwork, prog: &MathProgram, x: &[f64]) -> Vec<String> {
    let assignment = recovery::Assignment::from_point(net, prog, x);
    assignment_arcs(net, &assignment)
}

fn assignment_arcs(net: &GasNetwork, assignment: &recovery::Assignment) -> Vec<String> {
    net.arcs()
        .iter()
        .enumerate()
        .filter(|(a, arc)| assignment.active[*a] && arc.status.is_candidate())
        .map(|(_, arc)| arc.id.0.clone())
        .collect()
}

/// Exit-code mapping of the stable CLI contract.
pub fn exit_code(record: &SolveRecord) -> i32 {
    match record.status_enum() {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => 2,
        _ => 3,
    }
}

/// `solve` subcommand: solve, then write the human report and the
/// machine-readable record (plus a one-row CSV) under the output directory.
pub fn cmd_solve(cfg: &RunConfig) -> Result<(SolveRecord, String), BenchError> {
    let (name, net) = load(&cfg.source)?;
    let record = solve_network(&name, &net, cfg)?;
    let text = render_records(std::slice::from_ref(&record));
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &text)?;
        std::fs::write(
            dir.join("result.json"),
            serde_json::to_string_pretty(&record).expect("record serializes") + "\n",
        )?;
        std::fs::write(dir.join("result.csv"), records_to_csv(std::slice::from_ref(&record)))?;
    }
    Ok((record, text))
}

/// Clones the network, adding one candidate loop per existing pipe: same
/// resistance, cost from the recorded diameter and length.
pub fn with_parallel_loops(net: &GasNetwork) -> Result<GasNetwork, BenchError> {
    let mut arcs = net.arcs().to_vec();
    for arc in net.arcs() {
        let w = arc.kind.w();
        if !(arc.kind.is_pipe_family() && w > 0.0 && !arc.status.is_candidate()) {
            continue;
        }
        let (Some(d), Some(l)) = (arc.diameter_mm, arc.length_km) else {
            return Err(BenchError::MissingGeometry(arc.id.0.clone()));
        };
        let cost = expansion_cost(d, l).map_err(|e| BenchError::Build(e.to_string()))?;
        arcs.push(Arc {
            id: ArcId::new(format!("loop-{}", arc.id)),
            from: arc.from.clone(),
            to: arc.to.clone(),
            kind: ArcKind::Pipe { w },
            status: ArcStatus::Candidate { cost },
            exclusivity_group: None,
            parallel_column: None,
            diameter_mm: Some(d),
            length_km: Some(l),
        });
    }
    Ok(GasNetwork::new(net.nodes().to_vec(), arcs)
        .with_optional_groups(net.optional_groups().clone()))
}

/// `sweep` subcommand: for each stress level (percent), add a candidate loop
/// per existing pipeline, scale loads to (100+level)%, and solve end to end.
/// Levels may run on several threads; rows come back ordered by level.
pub fn cmd_stress_sweep(
    name: &str,
    net: &GasNetwork,
    levels: &[f64],
    cfg: &RunConfig,
) -> Result<Vec<SolveRecord>, BenchError> {
    let looped = with_parallel_loops(net)?;
    let solve_level = |level: f64| -> Result<SolveRecord, BenchError> {
        let mut level_cfg = cfg.clone();
        level_cfg.stress = 1.0 + level / 100.0;
        let mut rec = solve_network(name, &looped, &level_cfg)?;
        rec.stress_pct = level;
        Ok(rec)
    };
    let threads = cfg.params.threads.max(1).min(levels.len().max(1));
    if threads <= 1 {
        return levels.iter().map(|&l| solve_level(l)).collect();
    }
    let mut out: Vec<Option<Result<SolveRecord, BenchError>>> = Vec::new();
    out.resize_with(levels.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots = std::sync::Mutex::new(&mut out);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= levels.len() {
                    break;
                }
                let r = solve_level(levels[k]);
                slots.lock().expect("sweep slot lock")[k] = Some(r);
            });
        }
    });
    out.into_iter().map(|r| r.expect("every level solved")).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

/// RFC-4180-style CSV, one row per record, loss-free for the report fields.
pub fn records_to_csv(records: &[SolveRecord]) -> String {
    let mut s = String::from(
        "instance,model,stress_pct,cpu_s,objective,bound,gap,status,nodes,cuts\r\n",
    );
    for r in records {
        let _ = write!(
            s,
            "{},{},{:.4},{:.3},{},{},{},{},{},{}\r\n",
            csv_field(&r.instance),
            csv_field(&r.model),
            r.stress_pct,
            r.cpu_s,
            fmt_opt(r.objective),
            fmt_opt(r.bound),
            fmt_opt(r.gap),
            r.status,
            r.nodes,
            r.cuts,
        );
    }
    s
}

/// Parses the CSV produced by [`records_to_csv`] back into rows (used by the
/// round-trip check and by `report` on CSV inputs).
pub fn csv_to_rows(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut fields = Vec::new();
        let mut cur = String::new();
        let mut quoted = false;
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '"' if quoted && chars.peek() == Some(&'"') => {
                    cur.push('"');
                    chars.next();
                }
                '"' => quoted = !quoted,
                ',' if !quoted => {
                    fields.push(std::mem::take(&mut cur));
                }
                c => cur.push(c),
            }
        }
        fields.push(cur);
        rows.push(fields);
    }
    rows
}

/// Renders records as an aligned text table with presentation glyphs.
pub fn render_records(records: &[SolveRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>7} {:<10} {:>9} {:>12} {:>12} {:>9}  {}",
        "instance", "stress%", "model", "cpu[s]", "obj", "bound", "gap", "status"
    );
    for r in records {
        let glyph = r.status_enum().glyph();
        let _ = writeln!(
            s,
            "{:<12} {:>7.1} {:<10} {:>9.3} {:>12} {:>12} {:>9}  {}",
            r.instance,
            r.stress_pct,
            r.model,
            r.cpu_s,
            r.objective.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            r.bound.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            r.gap.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "-".into()),
            glyph,
        );
    }
    s
}

/// `report` subcommand: collect `*.json` solve records under a directory and
/// render the combined table plus CSV.
pub fn cmd_report(dir: &Path) -> Result<(String, String), BenchError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
        .collect();
    files.sort();
    let mut records = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f)?;
        match serde_json::from_str::<SolveRecord>(&text) {
            Ok(r) => records.push(r),
            Err(_) => continue, // unrelated json files are skipped
        }
    }
    if records.is_empty() {
        return Err(BenchError::NoResults(dir.display().to_string()));
    }
    Ok((render_records(&records), records_to_csv(&records)))
}

/// Exact solve for desk-size instances: whenever the proven-optimal design
/// fails recovery, exclude that complete binary assignment with a no-good
/// row and re-solve, until a recovered design matches the relaxation bound
/// or the relaxation becomes infeasible. Terminates on the true optimum of
/// the exact model (finitely many assignments).
pub fn solve_exact(net: &GasNetwork, params: &BnbParams) -> Result<ExactReport, BenchError> {
    let minlp = model::build_minlp(net).map_err(|e| BenchError::Build(e.to_string()))?;
    let mut prog =
        model::build_misocp(net, BuildOptions::default()).map_err(|e| BenchError::Build(e.to_string()))?;
    let binaries: Vec<VarKind> = prog.binaries().map(|v| prog.vars[v.0].kind).collect();
    let mut best: Option<(f64, recovery::RecoveryResult)> = None;
    for _round in 0..4096 {
        let rep = bnb::solve_misocp(&prog, params);
        match rep.status {
            SolveStatus::Infeasible => {
                return Ok(match best {
                    Some((obj, rec)) => ExactReport::Optimal { objective: obj, recovery: rec },
                    None => ExactReport::Infeasible,
                });
            }
            SolveStatus::Optimal => {}
            _ => return Ok(ExactReport::Unknown),
        }
        if let Some((obj, _)) = &best {
            if rep.bound >= obj - 1e-9 {
                let (obj, rec) = best.expect("checked");
                return Ok(ExactReport::Optimal { objective: obj, recovery: rec });
            }
        }
        let rec = recovery::recover(net, &prog, &rep.pool, &RecoveryOptions::default());
        if rec.status == RecoveryStatus::Feasible {
            let assignment = rec.assignment.as_ref().expect("feasible design");
            let x = recovery::assemble_point(net, &minlp, &rec.beta, &rec.phi, assignment);
            let cert = recovery::certify(&minlp, &x, CertifyTols::default());
            if cert.pass {
                if rec.objective <= rep.bound + 1e-9 {
                    return Ok(ExactReport::Optimal { objective: rec.objective, recovery: rec });
                }
                let better = best.as_ref().map(|(o, _)| rec.objective < *o).unwrap_or(true);
                if better {
                    best = Some((rec.objective, rec));
                }
            }
        }
        // Exclude every pooled assignment and try again.
        for inc in &rep.pool {
            exclude_assignment(&mut prog, &binaries, &inc.x);
        }
    }
    Ok(ExactReport::Unknown)
}

#[derive(Debug)]
pub enum ExactReport {
    Optimal { objective: f64, recovery: recovery::RecoveryResult },
    Infeasible,
    Unknown,
}

fn exclude_assignment(prog: &mut MathProgram, binaries: &[VarKind], x: &[f64]) {
    let mut coeffs = Vec::with_capacity(binaries.len());
    let mut rhs = 1.0;
    for &kind in binaries {
        let v = prog.var(kind).expect("binary");
        if x[v.0] >= 0.5 {
            coeffs.push((v, -1.0));
            rhs -= 1.0;
        } else {
            coeffs.push((v, 1.0));
        }
    }
    prog.lin.push(LinRow { coeffs, sense: Sense::Ge, rhs, tag: RowTag::OaCut });
}

/// Convenience wrapper used by tests and examples: solve one embedded
/// instance with defaults and hand back the record.
pub fn solve_embedded(name: &str) -> Result<SolveRecord, BenchError> {
    let cfg = RunConfig::new(Source::Name(name.to_string()));
    let (n, net) = load(&cfg.source)?;
    solve_network(&n, &net, &cfg)
}

/// `validate` subcommand body.
pub fn cmd_validate(source: &Source) -> Result<(String, bool), BenchError> {
    let (name, net) = match load(source) {
        Ok(v) => v,
        Err(BenchError::Parse(msg)) => return Ok((msg, false)),
        Err(e) => return Err(e),
    };
    let violations = net.validate();
    if violations.is_empty() {
        let s = net.stats();
        Ok((
            format!(
                "{name}: ok ({} towns, {} injections, {} demands, {} existing pipes, {} existing compressors, {} candidate pipes, {} candidate compressors)",
                s.towns, s.injections, s.demands, s.existing_pipes, s.existing_compressors,
                s.candidate_pipes, s.candidate_compressors
            ),
            true,
        ))
    } else {
        let mut msg = format!("{name}: {} violations", violations.len());
        for v in &violations {
            let _ = write!(msg, "\n  [{}] {v}", v.code());
        }
        Ok((msg, false))
    }
}

/// `export-lp` subcommand body.
pub fn cmd_export_lp(source: &Source, choice: &ModelChoice, cuts: bool) -> Result<String, BenchError> {
    let (_, net) = load(source)?;
    let options = BuildOptions { cuts };
    let prog = match choice {
        ModelChoice::Misocp | ModelChoice::RelaxOnly => model::build_misocp(&net, options),
        ModelChoice::Pla { segments } => model::build_pla_mip(&net, *segments, options),
    }
    .map_err(|e| BenchError::Build(e.to_string()))?;
    Ok(crate::export::to_lp_format(&prog))
}

/// Serializes a network to instance-file text (used by `sweep --emit` and
/// tests).
pub fn network_to_text(net: &GasNetwork, name: &str) -> String {
    instances::serialize(net, Metadata { name: name.to_string(), ..Default::default() })
}
