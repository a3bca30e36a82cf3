//! Benchmark and trace-validation CLI for the pipeweave scheduler.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or I/O error.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pipeweave::trace::{parse_trace_text, validate, TraceLog};
use pipeweave_bench::csvout::{emit_csv, ResultRow};
use pipeweave_bench::demo::run_demo;
use pipeweave_bench::spec::{parse_pipe_types, WorkloadKind, WorkloadSpec};
use pipeweave_bench::workloads::graph::{run_graph, GraphConfig};
use pipeweave_bench::workloads::micro::run_micro;
use pipeweave_bench::workloads::place::{run_place, PlaceConfig};

#[derive(Parser)]
#[command(
    name = "pipeweave-bench",
    version,
    about = "Pipeline scheduling benchmarks and trace validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Busy-spin pipeline measuring pure scheduling behavior
    Micro(MicroArgs),
    /// Levelized-graph propagation; tokens are graph nodes in level order
    Graph(GraphArgs),
    /// Placement window reordering; tokens are window columns
    Place(PlaceArgs),
    /// Check a trace file against the pipeline ordering rules
    Validate(ValidateArgs),
    /// Iterative pipeline rerun through a condition task
    DemoIterative(DemoArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Number of parallel lines
    #[arg(long, default_value_t = 4)]
    lines: usize,
    /// Stage type string, e.g. "spps": 's' = serial, 'p' = parallel;
    /// must start with 's'
    #[arg(long, default_value = "sss")]
    types: String,
    /// Scheduling tokens to admit (micro, demo-iterative)
    #[arg(long, default_value_t = 100)]
    tokens: u64,
    /// Worker threads
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Busy work per stage in microseconds
    #[arg(long = "work-us", default_value_t = 0)]
    work_us: u64,
    /// Repetitions; one CSV row each
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// RNG seed for generated workloads
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output path, or "-" for stdout
    #[arg(long, default_value = "-")]
    output: String,
    /// Record a trace for every run and fail on any rule violation
    #[arg(long)]
    check: bool,
    /// Write the last run's trace to this path
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct MicroArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Graph nodes (= tokens); stages come from the length of --types and
    /// always run serial
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Topological levels
    #[arg(long, default_value_t = 50)]
    levels: usize,
    /// State matrix dimension
    #[arg(long = "matrix-dim", default_value_t = 4)]
    matrix_dim: usize,
}

#[derive(Args)]
struct PlaceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Placement rows (= serial stages)
    #[arg(long, default_value_t = 8)]
    rows: usize,
    /// Window columns (= tokens)
    #[arg(long, default_value_t = 64)]
    cols: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Trace file in the `token line pipe begin end worker` text format
    trace_file: PathBuf,
    /// Lines the trace was produced with
    #[arg(long)]
    lines: usize,
    /// Stage type string the trace was produced with
    #[arg(long)]
    types: String,
    /// Tokens the run admitted
    #[arg(long)]
    tokens: u64,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Pipeline passes to run (the data source replenishes between passes)
    #[arg(long, default_value_t = 3)]
    passes: usize,
}

fn build_spec(kind: WorkloadKind, common: &CommonArgs) -> anyhow::Result<WorkloadSpec> {
    let pipe_types = parse_pipe_types(&common.types)?;
    let spec = WorkloadSpec {
        kind,
        lines: common.lines,
        pipe_types,
        tokens: common.tokens,
        threads: common.threads,
        work_us: common.work_us,
        runs: common.runs,
        seed: common.seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// Emit rows, optionally dump the trace, and turn the validity flag into an
/// exit code.
fn finish(
    rows: &[ResultRow],
    all_valid: bool,
    common: &CommonArgs,
    last_trace: Option<&TraceLog>,
) -> anyhow::Result<ExitCode> {
    emit_csv(rows, &common.output)
        .with_context(|| format!("writing CSV to `{}`", common.output))?;
    if let Some(path) = &common.trace {
        match last_trace {
            Some(log) => {
                let mut w = BufWriter::new(
                    File::create(path)
                        .with_context(|| format!("creating trace file `{}`", path.display()))?,
                );
                log.write_text(&mut w)?;
            }
            None => anyhow::bail!("--trace needs --check to record a trace"),
        }
    }
    if common.check && !all_valid {
        eprintln!("trace validation failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_micro(args: &MicroArgs) -> anyhow::Result<ExitCode> {
    let spec = build_spec(WorkloadKind::Micro, &args.common)?;
    let record = args.common.check || args.common.trace.is_some();
    let outcome = run_micro(&spec, record)?;
    finish(
        &outcome.rows,
        outcome.all_valid,
        &args.common,
        outcome.last_trace.as_ref(),
    )
}

fn cmd_graph(args: &GraphArgs) -> anyhow::Result<ExitCode> {
    let spec = build_spec(WorkloadKind::Graph, &args.common)?;
    let cfg = GraphConfig {
        spec,
        nodes: args.nodes,
        levels: args.levels,
        matrix_dim: args.matrix_dim,
    };
    let outcome = run_graph(&cfg, args.common.check)?;
    eprintln!(
        "graph: {} nodes, {} levels, checksum {}",
        args.nodes, args.levels, outcome.checksums[outcome.checksums.len() - 1]
    );
    finish(&outcome.rows, outcome.all_valid, &args.common, None)
}

fn cmd_place(args: &PlaceArgs) -> anyhow::Result<ExitCode> {
    let spec = build_spec(WorkloadKind::Place, &args.common)?;
    let cfg = PlaceConfig {
        spec,
        rows: args.rows,
        cols: args.cols,
    };
    let outcome = run_place(&cfg, args.common.check)?;
    eprintln!(
        "place: wirelength {} -> {}",
        outcome.initial_wirelength,
        outcome.final_wirelengths[outcome.final_wirelengths.len() - 1]
    );
    finish(&outcome.rows, outcome.all_valid, &args.common, None)
}

fn cmd_validate(args: &ValidateArgs) -> anyhow::Result<ExitCode> {
    let pipe_types = parse_pipe_types(&args.types)?;
    anyhow::ensure!(args.lines >= 1, "lines must be at least 1");
    let file = File::open(&args.trace_file)
        .with_context(|| format!("opening `{}`", args.trace_file.display()))?;
    let events = parse_trace_text(BufReader::new(file))?;
    let log = TraceLog {
        num_lines: args.lines,
        pipe_types,
        num_tokens: args.tokens,
        events,
    };
    let report = validate(&log);
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_demo(args: &DemoArgs) -> anyhow::Result<ExitCode> {
    let spec = build_spec(WorkloadKind::DemoIterative, &args.common)?;
    let outcome = run_demo(&spec, args.passes)?;
    println!(
        "demo-iterative: {} tokens over {} resumption(s), expected {}",
        outcome.total_tokens,
        outcome.resumptions.len(),
        outcome.expected_tokens
    );
    for (token, line) in &outcome.resumptions {
        println!("  pass starting at token {token} resumed on line {line}");
    }
    Ok(if outcome.valid {
        ExitCode::SUCCESS
    } else {
        eprintln!("demo verification failed");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Micro(args) => cmd_micro(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Place(args) => cmd_place(args),
        Command::Validate(args) => cmd_validate(args),
        Command::DemoIterative(args) => cmd_demo(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
