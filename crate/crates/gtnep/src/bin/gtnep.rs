//! Thin command-line front end; all logic lives in the library.

use clap::{Args, Parser, Subcommand};
use gtnep::bench::{self, ModelChoice, RunConfig, Source};
use gtnep::bnb::BnbParams;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gtnep", about = "Gas transmission network expansion planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Embedded instance name (also searched in $GTNEP_DATA_DIR and cwd).
    #[arg(long, conflicts_with = "file")]
    instance: Option<String>,
    /// Instance file path.
    #[arg(long)]
    file: Option<PathBuf>,
}

impl InstanceArgs {
    fn source(&self) -> Result<Source, String> {
        match (&self.instance, &self.file) {
            (Some(n), None) => Ok(Source::Name(n.clone())),
            (None, Some(p)) => Ok(Source::File(p.clone())),
            _ => Err("exactly one of --instance or --file is required".into()),
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Model to solve: misocp, pla, or relax-only.
    #[arg(long, default_value = "misocp")]
    model: String,
    /// Piecewise segments for --model pla.
    #[arg(long, default_value_t = 60)]
    segments: usize,
    /// Load multiplier (1.0 = nominal).
    #[arg(long, default_value_t = 1.0)]
    stress: f64,
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Structural integer cuts: on|off.
    #[arg(long, default_value = "on")]
    cuts: String,
    /// Suppress wall-clock times in outputs (byte-reproducible reports).
    #[arg(long)]
    no_timings: bool,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, source: Source) -> Result<RunConfig, String> {
        if self.stress <= 0.0 {
            return Err("--stress must be positive".into());
        }
        let model = match self.model.as_str() {
            "misocp" => ModelChoice::Misocp,
            "pla" => ModelChoice::Pla { segments: self.segments },
            "relax-only" => ModelChoice::RelaxOnly,
            other => return Err(format!("unknown model '{other}'")),
        };
        let cuts = match self.cuts.as_str() {
            "on" => true,
            "off" => false,
            other => return Err(format!("--cuts takes on|off, got '{other}'")),
        };
        let mut params = BnbParams {
            gap_tol: self.gap_tol,
            time_limit_s: self.time_limit,
            threads: self.threads,
            ..BnbParams::default()
        };
        if let Some(n) = self.node_limit {
            params.node_limit = n;
        }
        Ok(RunConfig {
            source,
            model,
            stress: self.stress,
            params,
            cuts,
            timings: !self.no_timings,
            out: self.out.clone(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance end to end (build, solve, recover, certify).
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Stress sweep with one candidate loop per existing pipeline.
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Stress levels in percent (0 = nominal loads).
        #[arg(long, value_delimiter = ',', default_value = "0,5,10,25,50,75,100,150,200,300")]
        levels: Vec<f64>,
    },
    /// Render a results directory as a combined table.
    Report {
        /// Directory holding result.json files.
        dir: PathBuf,
        /// Also write the combined CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a network against every structural invariant.
    Validate {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Dump a built model in LP text format.
    ExportLp {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { instance, solver } => {
            let source = match instance.source() {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let cfg = match solver.config(source) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match bench::cmd_solve(&cfg) {
                Ok((record, text)) => {
                    print!("{text}");
                    if !record.expansions.is_empty() {
                        println!("expansions: {}", record.expansions.join(", "));
                    }
                    ExitCode::from(bench::exit_code(&record) as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { instance, solver, levels } => {
            let source = match instance.source() {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let cfg = match solver.config(source) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let (name, net) = match bench::load(&cfg.source) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            match bench::cmd_stress_sweep(&name, &net, &levels, &cfg) {
                Ok(records) => {
                    let csv = bench::records_to_csv(&records);
                    print!("{}", bench::render_records(&records));
                    if let Some(dir) = &cfg.out {
                        if let Err(e) = std::fs::create_dir_all(dir)
                            .and_then(|_| std::fs::write(dir.join("sweep.csv"), &csv))
                        {
                            return fail(e);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Report { dir, out } => match bench::cmd_report(&dir) {
            Ok((text, csv)) => {
                print!("{text}");
                if let Some(path) = out {
                    if let Err(e) = std::fs::write(path, csv) {
                        return fail(e);
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Validate { instance } => {
            let source = match instance.source() {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            match bench::cmd_validate(&source) {
                Ok((msg, ok)) => {
                    println!("{msg}");
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::ExportLp { instance, solver } => {
            let source = match instance.source() {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let cfg = match solver.config(source) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match bench::cmd_export_lp(&cfg.source, &cfg.model, cfg.cuts) {
                Ok(text) => {
                    match &cfg.out {
                        Some(dir) => {
                            if let Err(e) = std::fs::create_dir_all(dir)
                                .and_then(|_| std::fs::write(dir.join("model.lp"), &text))
                            {
                                return fail(e);
                            }
                        }
                        None => print!("{text}"),
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
