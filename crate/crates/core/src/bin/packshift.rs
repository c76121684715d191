use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use packshift::harness::{
    export, generate_trace, infer_domain, live_at, run_trace, validate_solution, ExperimentConfig, Format,
    GeneratorSpec, SolutionFile, TraceSource,
};
use packshift::model::ItemKind;
use packshift::offline::{bottom_left_search, exact_vector_opt, volume_lower_bound};
use packshift::{PackError, ProblemKind, Rational, Trace};

const EXIT_VIOLATION: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "packshift", version, about = "Fully dynamic packing with bounded migration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace through the robust runner and write a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace file; overrides the config's trace source.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Seed for generated traces; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate every monitor after each event.
        #[arg(long)]
        check: bool,
        /// Exit with status 2 if any monitor reports a violation.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the final solution as JSON.
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Write a generated trace as JSON lines.
    Generate {
        /// Generator spec: inline JSON or a path to a JSON file.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a stored solution against a trace.
    Validate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Evaluate an oracle on the items live at time `at`.
    Oracle {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        at: u64,
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Problem for lower bounds; inferred from the items when omitted.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    VectorExact,
    BottomLeft,
    Bounds,
}

/// Errors caused by bad input map to exit code 3.
fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<PackError>(),
            Some(
                PackError::Parse(_)
                    | PackError::InvalidItem { .. }
                    | PackError::Trace { .. }
                    | PackError::Dimension { .. }
                    | PackError::Unsupported { .. }
                    | PackError::Config(_)
                    | PackError::TooLarge { .. }
            )
        ) || cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
    })
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_trace(path: &Path) -> anyhow::Result<Trace> {
    Ok(Trace::from_jsonl(&read(path)?)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    trace: Option<&Path>,
    seed: Option<u64>,
    check: bool,
    strict: bool,
    out: Option<&Path>,
    solution_out: Option<&Path>,
) -> anyhow::Result<u8> {
    let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(path) = trace {
        cfg.trace = Some(TraceSource::File(path.to_path_buf()));
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.check |= check || strict;
    let trace = cfg.load_trace()?;
    let outcome = run_trace(&cfg, &trace)?;
    let report = &outcome.report;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
    match &out {
        Some(path) => {
            let format = cfg
                .output
                .as_ref()
                .and_then(|o| o.format)
                .filter(|_| cfg.output.as_ref().is_some_and(|o| &o.path == path))
                .unwrap_or_else(|| Format::from_path(path));
            write(path, &export(report, format)?)?;
        }
        None => {
            for row in &report.rows {
                println!("{}", row.to_json_line());
            }
        }
    }
    if let Some(path) = solution_out {
        let file = SolutionFile::from_solution(&outcome.solution);
        write(path, &serde_json::to_vec_pretty(&file)?)?;
    }
    eprintln!("{}", serde_json::to_string(&report.summary)?);
    let violations: Vec<_> = report.violations().collect();
    if strict && !violations.is_empty() {
        for (t, v) in violations {
            eprintln!("violation at t={t}: {v}");
        }
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn cmd_generate(spec: &str, seed: u64, out: &Path) -> anyhow::Result<u8> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        read(Path::new(spec))?
    };
    let spec: GeneratorSpec = serde_json::from_str(&text).context("parsing generator spec")?;
    let trace = generate_trace(&spec, seed)?;
    write(out, trace.to_jsonl().as_bytes())?;
    Ok(0)
}

fn cmd_validate(trace: &Path, solution: &Path) -> anyhow::Result<u8> {
    let trace = load_trace(trace)?;
    let file: SolutionFile = serde_json::from_str(&read(solution)?).context("parsing solution")?;
    let check = validate_solution(&trace, &file)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "valid": check.is_valid(), "report": check }))?);
    Ok(if check.is_valid() { 0 } else { EXIT_VIOLATION })
}

fn cmd_oracle(trace: &Path, at: u64, kind: OracleKind, problem: Option<&str>, d: usize) -> anyhow::Result<u8> {
    let trace = load_trace(trace)?;
    let items = live_at(&trace, at);
    let (name, value): (&str, Rational) = match kind {
        OracleKind::VectorExact => {
            let vectors = items
                .iter()
                .map(|i| match &i.kind {
                    ItemKind::Vector { components } => Ok(components.clone()),
                    other => Err(PackError::Unsupported {
                        kind: other.name().into(),
                        algorithm: "vector-exact".into(),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            ("vector-exact", Rational::from(exact_vector_opt(&vectors)?))
        }
        OracleKind::BottomLeft => {
            let rects = items
                .iter()
                .map(|i| match i.sides().as_deref() {
                    Some([w, h]) => Ok((w.clone(), h.clone())),
                    _ => Err(PackError::Unsupported {
                        kind: i.kind.name().into(),
                        algorithm: "bottom-left".into(),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            ("bottom-left", bottom_left_search(&rects)?)
        }
        OracleKind::Bounds => {
            let domain = match problem {
                Some(p) => {
                    let kind: ProblemKind = serde_json::from_value(json!(p))
                        .map_err(|_| PackError::Config(format!("unknown problem {p:?}")))?;
                    kind.domain(d)
                }
                None => infer_domain(&items),
            };
            ("bounds", volume_lower_bound(&items, domain))
        }
    };
    println!(
        "{}",
        serde_json::to_string(&json!({ "kind": name, "at": at, "items": items.len(), "value": value }))?
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            trace,
            seed,
            check,
            strict,
            out,
            solution_out,
        } => cmd_run(
            config,
            trace.as_deref(),
            *seed,
            *check,
            *strict,
            out.as_deref(),
            solution_out.as_deref(),
        ),
        Command::Generate { spec, seed, out } => cmd_generate(spec, *seed, out),
        Command::Validate { trace, solution } => cmd_validate(trace, solution),
        Command::Oracle {
            trace,
            at,
            kind,
            problem,
            d,
        } => cmd_oracle(trace, *at, *kind, problem.as_deref(), *d),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_input_error(&err) { EXIT_INPUT } else { 1 })
        }
    }
}
