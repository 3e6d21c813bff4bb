//! `mapn`: validate, unfold, enumerate, explore and generate mAPN graphs.
//!
//! Exit codes: 0 success, 1 empty result, 2 validation failure,
//! 3 usage, parse or I/O error.

use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use mapn_core::explore::ExplorationState;
use mapn_core::gen::{generate, GenSpec};
use mapn_core::io::report::GraphStats;
use mapn_core::io::{
    export_sadf, parse_constraints, parse_graph, serialize_model, serialize_unfolded, to_dot, write_report, Report,
    ReportFormat,
};
use mapn_core::metrics::ExplorationConfig;
use mapn_core::oracle::{enumerate_variants, evaluate_and_rank};
use mapn_core::unfold::{count_unfolded_variants, unfold_model, UnfoldError, UnfoldedModel};
use mapn_core::wellformed::{has_errors, normalize_source_sink, validate};
use mapn_core::{Model, Variant};

const EXIT_EMPTY: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "mapn", version, about = "Analyse multi-alternative process network graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct Query {
    graph: PathBuf,
    /// Constraint file (`constraint`, `best`, `target`, `mode` lines).
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Adds per-phase wall times in milliseconds to the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Checks well-formedness; diagnostics go to standard error.
    Validate { graph: PathBuf },
    /// Replaces parallel processes by per-degree lanes.
    Unfold {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Lists feasible variants by exhaustive enumeration.
    Enumerate(Query),
    /// Lists feasible variants by incremental exploration.
    Explore {
        #[command(flatten)]
        query: Query,
        /// Prints queue and channel transitions to standard error.
        #[arg(long)]
        trace: bool,
    },
    /// Prints graph statistics.
    Stats {
        graph: PathBuf,
        /// Also writes the colored graph in Graphviz DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Writes a seeded synthetic graph.
    Gen {
        /// Lower end of the variant count band [N, 2N].
        #[arg(long)]
        variants: u64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_depth: u32,
        #[arg(long, default_value_t = 4)]
        max_fork_width: u32,
        /// Number of parallel processes with degrees {1, 2, 4}.
        #[arg(long, default_value_t = 0)]
        parallel: u32,
        /// Adds an additive `energy` metric.
        #[arg(long)]
        two_metrics: bool,
    },
    /// Writes a scenario-aware dataflow description with one scenario per variant.
    ExportSadf {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    fail(EXIT_USAGE, e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| usage(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn load(path: &Path) -> Result<Model, Failure> {
    parse_graph(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Prints diagnostics to standard error; fails when any is an error.
fn check(model: &Model) -> Result<(), Failure> {
    let diagnostics = validate(&model.graph);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if has_errors(&diagnostics) {
        return Err(fail(EXIT_INVALID, "graph is not well-formed"));
    }
    Ok(())
}

fn unfold(model: &Model) -> Result<UnfoldedModel, Failure> {
    unfold_model(model).map_err(|e| match e {
        UnfoldError::NotWellFormed(ds) => {
            for d in &ds {
                eprintln!("{d}");
            }
            fail(EXIT_INVALID, "unfolded graph is not well-formed")
        }
        UnfoldError::NotMonochromatic(_) | UnfoldError::Boundary(_) => fail(EXIT_INVALID, e.to_string()),
        other => usage(other),
    })
}

/// Unfolds and adds fictive ends when needed, giving a model that both
/// enumeration and exploration accept.
fn prepare(model: &Model) -> Result<Model, Failure> {
    let unfolded = unfold(model)?.model;
    let (sources, sinks) = unfolded.graph.sources_and_sinks();
    if sources.len() == 1 && sinks.len() == 1 {
        return Ok(unfolded);
    }
    normalize_source_sink(&unfolded).map_err(|d| {
        eprintln!("{d}");
        fail(EXIT_INVALID, "cannot add a single source and sink")
    })
}

fn config(query: &Query, model: &Model) -> Result<ExplorationConfig, Failure> {
    let Some(path) = &query.constraints else {
        return Ok(ExplorationConfig::default());
    };
    let cfg = parse_constraints(&read(path)?, &model.metrics, model.annotations.targets())
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    cfg.check(&model.metrics, model.annotations.targets().len())
        .map_err(usage)?;
    Ok(cfg)
}

fn color_enabled() -> bool {
    std::env::var("MAPN_COLOR").map_or(true, |v| v != "0") && std::io::stdout().is_terminal()
}

fn emit(report: &Report, format: Format) -> Result<(), Failure> {
    let format = match format {
        Format::Text => ReportFormat::Text { color: color_enabled() },
        Format::Json => ReportFormat::Json,
    };
    let mut out = std::io::stdout().lock();
    write_report(&mut out, report, format).map_err(usage)
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn run_query(query: &Query, command: &str, trace: bool) -> Result<u8, Failure> {
    let t = Instant::now();
    let original = load(&query.graph)?;
    check(&original)?;
    let parse_ms = ms(t);
    let t = Instant::now();
    let model = prepare(&original)?;
    let prepare_ms = ms(t);
    let cfg = config(query, &model)?;

    let t = Instant::now();
    let variants: Vec<Variant> = if command == "explore" {
        let mut state = ExplorationState::new(&model, &cfg).map_err(usage)?;
        if trace {
            state = state.with_trace(|line| eprintln!("{line}"));
        }
        state.run();
        state.finish().map_err(usage)?.0
    } else {
        let all = enumerate_variants(&model.graph).map_err(usage)?;
        evaluate_and_rank(all, &model, &cfg).map_err(usage)?
    };
    let run_ms = ms(t);

    let target = &model.annotations.targets()[cfg.target_index];
    let mut report = Report::new(command, target, GraphStats::of(&model.graph))
        .with_variants(&variants, &cfg)
        .map_err(usage)?;
    if query.timings {
        report = report
            .with_timing("parse", parse_ms)
            .with_timing("prepare", prepare_ms)
            .with_timing(command, run_ms);
    }
    emit(&report, query.format)?;
    Ok(if variants.is_empty() { EXIT_EMPTY } else { 0 })
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Validate { graph } => {
            let model = load(&graph)?;
            check(&model)?;
            Ok(0)
        }
        Command::Unfold { graph, output } => {
            let model = load(&graph)?;
            check(&model)?;
            write_atomic(&output, &serialize_unfolded(&unfold(&model)?))?;
            Ok(0)
        }
        Command::Enumerate(query) => run_query(&query, "enumerate", false),
        Command::Explore { query, trace } => run_query(&query, "explore", trace),
        Command::Stats { graph, dot, format } => {
            let model = load(&graph)?;
            check(&model)?;
            if let Some(path) = dot {
                write_atomic(&path, &to_dot(&model.graph))?;
            }
            let mut stats = GraphStats::of(&model.graph);
            stats.variants = count_unfolded_variants(&model.graph).ok();
            let target = model.annotations.targets().first().map_or("", String::as_str);
            emit(&Report::new("stats", target, stats), format)?;
            Ok(0)
        }
        Command::Gen {
            variants,
            seed,
            output,
            max_depth,
            max_fork_width,
            parallel,
            two_metrics,
        } => {
            let spec = GenSpec {
                target_variants: variants,
                max_depth,
                max_fork_width,
                parallel_count: parallel,
                seed,
                two_metrics,
            };
            let model = generate(&spec).map_err(usage)?;
            write_atomic(&output, &serialize_model(&model))?;
            Ok(0)
        }
        Command::ExportSadf { graph, output } => {
            let original = load(&graph)?;
            check(&original)?;
            let model = prepare(&original)?;
            let variants = enumerate_variants(&model.graph).map_err(usage)?;
            write_atomic(&output, &export_sadf(&model.graph, &variants).map_err(usage)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
