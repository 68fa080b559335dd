//! `sfcdag`: parse a stock-flow-consistent model, analyze its dependency
//! structure, condense it to the unique DAG of strongly connected
//! components, and simulate it in block topological order.
//!
//! Exit codes: 0 success, 1 validation/solver/check failures, 2 usage and
//! I/O errors. Diagnostics go to stderr; data goes to stdout or `--out`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use sfcdag::analysis::{build_dependency_graph, structural_jacobian, DependencyGraph};
use sfcdag::emit::{
    emit_adjacency_csv, emit_dot_condensation, emit_dot_graph, emit_json, emit_simulation_csv,
    DotStyle,
};
use sfcdag::graph::{condense, descendants, tarjan_scc, topological_order, CondensationDag, SccPartition};
use sfcdag::model::{parse_model, validate_model, Model};
use sfcdag::solver::{run_checks, simulate, SolverOptions};

#[derive(Parser)]
#[command(
    name = "sfcdag",
    version,
    about = "Dependency graphs, SCC condensation, and block-ordered simulation for SFC models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DagFormat {
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model, printing a report
    Check {
        /// Model file (.sfc)
        file: PathBuf,
    },
    /// Emit the dependency graph (DOT, JSON document, or adjacency CSV)
    Graph {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
        format: GraphFormat,
        /// Write to a file instead of stdout
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// List strongly connected components, flagging cycles
    Sccs {
        file: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Emit the condensation DAG
    Dag {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = DagFormat::Dot)]
        format: DagFormat,
        /// Render cyclic metanodes as clusters of their member nodes
        #[arg(long)]
        expand_sccs: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the block topological order used by the solver
    Order {
        file: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Simulate the model and write per-period values as CSV
    Solve {
        file: PathBuf,
        /// Number of periods to simulate
        #[arg(long)]
        periods: usize,
        /// Relative convergence tolerance per block
        #[arg(long)]
        tol: Option<f64>,
        /// Gauss-Seidel damping in (0, 1]
        #[arg(long)]
        damping: Option<f64>,
        /// Iteration cap per block
        #[arg(long)]
        max_iterations: Option<u32>,
        /// Tolerance for post-solve accounting checks
        #[arg(long, default_value_t = 1e-8)]
        check_tol: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// List every variable reachable from one variable
    Trace {
        file: PathBuf,
        /// Starting variable, typically exogenous
        #[arg(long)]
        from: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    /// Bad invocation or unreadable input: exit 2.
    Usage(String),
    /// Model, solver, or check failure: exit 1.
    Run(String),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let kind = e.kind();
            if kind == ErrorKind::DisplayHelp || kind == ErrorKind::DisplayVersion {
                let _ = e.print();
                return 0;
            }
            eprint!("{e}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|failure| {
        let mut msg = format!("{} is not a valid model:", path.display());
        for err in &failure.errors {
            msg.push_str(&format!("\n  {err}"));
        }
        CliError::Run(msg)
    })
}

fn analyze(m: &Model) -> Result<(DependencyGraph, SccPartition, CondensationDag), CliError> {
    let dep = build_dependency_graph(m);
    let partition = tarjan_scc(&dep.graph);
    let dag = condense(&dep.graph, &partition).map_err(|e| CliError::Run(e.to_string()))?;
    Ok((dep, partition, dag))
}

fn write_output(out: &Option<PathBuf>, mut data: String) -> Result<(), CliError> {
    if !data.is_empty() && !data.ends_with('\n') {
        data.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, data)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(data.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Run(format!("cannot write to stdout: {e}")))
        }
    }
}

fn component_line(dag: &CondensationDag, comp: usize) -> String {
    let meta = &dag.metanodes[comp];
    let members: Vec<&str> = meta
        .members
        .iter()
        .map(|&v| dag.source.label(v))
        .collect();
    if meta.nontrivial {
        format!("SCC_{comp} (cycle): {}", members.join(", "))
    } else {
        format!("SCC_{comp}: {}", members.join(", "))
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Check { file } => {
            let m = load_model(&file)?;
            let report = validate_model(&m);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !report.errors.is_empty() {
                let mut msg = format!("{} failed validation:", file.display());
                for e in &report.errors {
                    msg.push_str(&format!("\n  {e}"));
                }
                return Err(CliError::Run(msg));
            }
            write_output(
                &None,
                format!(
                    "ok: {}: {} endogenous, {} exogenous, {} parameters, {} equations, {} checks",
                    m.name,
                    m.endogenous.len(),
                    m.exogenous.len(),
                    m.parameters.len(),
                    m.equations.len(),
                    m.checks.len()
                ),
            )
        }
        Command::Graph { file, format, out } => {
            let m = load_model(&file)?;
            let data = match format {
                GraphFormat::Dot => {
                    let dep = build_dependency_graph(&m);
                    emit_dot_graph(&dep.graph, &DotStyle::named(&m.name))
                }
                GraphFormat::Json => {
                    let (dep, partition, dag) = analyze(&m)?;
                    emit_json(&dep, &partition, &dag)
                }
                GraphFormat::Csv => emit_adjacency_csv(&structural_jacobian(&m), &m.var_labels()),
            };
            write_output(&out, data)
        }
        Command::Sccs { file, out } => {
            let m = load_model(&file)?;
            let (_, partition, dag) = analyze(&m)?;
            let lines: Vec<String> = (0..dag.metanodes.len())
                .map(|c| component_line(&dag, c))
                .collect();
            eprintln!(
                "{} components, {} nontrivial",
                partition.len(),
                partition.nontrivial_count()
            );
            write_output(&out, lines.join("\n"))
        }
        Command::Dag {
            file,
            format,
            expand_sccs,
            out,
        } => {
            let m = load_model(&file)?;
            let (dep, partition, dag) = analyze(&m)?;
            let data = match format {
                DagFormat::Dot => {
                    let style = DotStyle {
                        expand_sccs,
                        ..DotStyle::named(&m.name)
                    };
                    emit_dot_condensation(&dag, &style)
                }
                DagFormat::Json => emit_json(&dep, &partition, &dag),
            };
            write_output(&out, data)
        }
        Command::Order { file, out } => {
            let m = load_model(&file)?;
            let (_, _, dag) = analyze(&m)?;
            let order = topological_order(&dag).map_err(|e| CliError::Run(e.to_string()))?;
            let lines: Vec<String> = order
                .iter()
                .enumerate()
                .map(|(pos, &comp)| {
                    let meta = &dag.metanodes[comp];
                    let members: Vec<&str> =
                        meta.members.iter().map(|&v| dag.source.label(v)).collect();
                    if meta.nontrivial {
                        format!("{}: {} (cycle)", pos + 1, members.join(", "))
                    } else {
                        format!("{}: {}", pos + 1, members.join(", "))
                    }
                })
                .collect();
            write_output(&out, lines.join("\n"))
        }
        Command::Solve {
            file,
            periods,
            tol,
            damping,
            max_iterations,
            check_tol,
            out,
        } => {
            let m = load_model(&file)?;
            let report = validate_model(&m);
            if !report.errors.is_empty() {
                let mut msg = format!("{} failed validation:", file.display());
                for e in &report.errors {
                    msg.push_str(&format!("\n  {e}"));
                }
                return Err(CliError::Run(msg));
            }
            let mut opts = SolverOptions {
                periods,
                ..SolverOptions::default()
            };
            if let Some(t) = tol {
                opts.tolerance = t;
            }
            if let Some(d) = damping {
                opts.damping = d;
            }
            if let Some(mi) = max_iterations {
                opts.max_iterations = mi;
            }
            let result = simulate(&m, &opts).map_err(|e| CliError::Run(e.to_string()))?;
            let outcomes =
                run_checks(&m, &result, check_tol).map_err(|e| CliError::Run(e.to_string()))?;
            let failures: Vec<_> = outcomes.iter().filter(|o| !o.passed).collect();
            if !failures.is_empty() {
                for f in failures.iter().take(10) {
                    eprintln!(
                        "check {} failed at period {}: residual {:e}",
                        f.check_index, f.period, f.residual
                    );
                }
                return Err(CliError::Run(format!(
                    "{} of {} accounting checks failed (tolerance {check_tol:e})",
                    failures.len(),
                    outcomes.len()
                )));
            }
            eprintln!(
                "solved {} periods, {} equation evaluations, {} checks passed",
                periods,
                result.total_evaluations(),
                outcomes.len()
            );
            write_output(&out, emit_simulation_csv(&result))
        }
        Command::Trace { file, from, out } => {
            let m = load_model(&file)?;
            let dep = build_dependency_graph(&m);
            let start = m
                .var_index(&from)
                .ok_or_else(|| CliError::Usage(format!("no variable named '{from}'")))?;
            let reached: BTreeSet<usize> =
                descendants(&dep.graph, start).map_err(|e| CliError::Run(e.to_string()))?;
            let lines: Vec<&str> = reached
                .iter()
                .map(|&v| dep.graph.label(v))
                .collect();
            eprintln!("{} variables downstream of {from}", lines.len());
            write_output(&out, lines.join("\n"))
        }
    }
}
