//! Command-line front end: load problems, run either solver method, check
//! fixed designs against their conic rows, generate benchmark instances,
//! and time them.
//!
//! Exit codes: 0 when the run ends at a proven optimum (or, for `check`,
//! when every row holds), 1 when the solver finishes without one (stall,
//! iteration cap, unbounded), 2 for usage, parse, validation, or I/O
//! failures, 3 when the problem is infeasible or the checked design
//! violates a row.

use clap::{Parser, Subcommand, ValueEnum};
use robust_milp::budget::{self, BudgetError};
use robust_milp::cuts::{self, SolveError, SolveStatus};
use robust_milp::generators::{gen_illustrative, gen_truss, gen_truss_budget, TrussSpec};
use robust_milp::io::{load_problem, problem_to_json, IoError, LoadedProblem};
use robust_milp::milp::{MilpError, MilpStatus};
use robust_milp::model::{validate, CutPolicy, RobustProblem, SolverConfig};
use robust_milp::reliability::{self, ReliabilityReport};
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "robust-milp", version, about = "Robust MILP under ellipsoidal or budget uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write solution artifacts
    Solve {
        /// Problem JSON file
        input: PathBuf,
        /// Solver method; defaults to the kind the file's rows call for
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Stall threshold on the step between consecutive iterates
        #[arg(long)]
        eps: Option<f64>,
        /// Conic feasibility tolerance, relative to 1 + |b| per row
        #[arg(long)]
        feas_tol: Option<f64>,
        /// Cap on cutting-plane iterations
        #[arg(long)]
        max_iter: Option<usize>,
        /// Which rows get a fresh cut each iteration
        #[arg(long, value_enum)]
        cut_policy: Option<PolicyArg>,
        /// Write the iteration trace CSV here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the per-row reliability report JSON here
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the solution JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report per-row reliability of a fixed design point
    Check {
        /// Problem JSON file with ellipsoidal rows
        input: PathBuf,
        /// Design vector, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        /// Feasibility tolerance, relative to 1 + |b| per row
        #[arg(long)]
        feas_tol: Option<f64>,
        /// Write the report JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a benchmark problem file
    Gen {
        /// Problem family
        family: Family,
        /// Number of truss blocks
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        blocks: Option<u32>,
        /// Row kind for the truss family
        #[arg(long, value_enum)]
        variant: Option<Variant>,
        /// Output path; defaults to a name derived from the arguments
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the solvers on generated truss instances and print a CSV table
    Bench {
        /// Block counts to run
        #[arg(long, value_delimiter = ',', default_values_t = [1u32],
              value_parser = clap::value_parser!(u32).range(1..))]
        blocks: Vec<u32>,
        /// Methods to run
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [Method::Cuts, Method::Budget])]
        methods: Vec<Method>,
        /// Repetitions per configuration
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        /// Also write the CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Cuts,
    Budget,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cuts => "cuts",
            Method::Budget => "budget",
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Illustrative,
    Truss,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Ellipsoid,
    Budget,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    All,
    Violated,
}

/// Failed command: message for stderr plus the process exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::usage(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            input,
            method,
            eps,
            feas_tol,
            max_iter,
            cut_policy,
            trace,
            report,
            out,
        } => cmd_solve(SolveArgs {
            input,
            method,
            eps,
            feas_tol,
            max_iter,
            cut_policy,
            trace,
            report,
            out,
        }),
        Command::Check {
            input,
            x,
            feas_tol,
            out,
        } => cmd_check(&input, &x, feas_tol, out.as_deref()),
        Command::Gen {
            family,
            blocks,
            variant,
            out,
        } => cmd_gen(family, blocks, variant, out),
        Command::Bench {
            blocks,
            methods,
            repeat,
            out,
        } => cmd_bench(&blocks, &methods, repeat, out.as_deref()),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

struct SolveArgs {
    input: PathBuf,
    method: Option<Method>,
    eps: Option<f64>,
    feas_tol: Option<f64>,
    max_iter: Option<usize>,
    cut_policy: Option<PolicyArg>,
    trace: Option<PathBuf>,
    report: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn cmd_solve(args: SolveArgs) -> Result<i32, Failure> {
    let loaded = load_file(&args.input)?;
    let method = match (args.method, &loaded) {
        (None, LoadedProblem::Ellipsoidal(_)) | (Some(Method::Cuts), LoadedProblem::Ellipsoidal(_)) => Method::Cuts,
        (None, LoadedProblem::Budget(_)) | (Some(Method::Budget), LoadedProblem::Budget(_)) => Method::Budget,
        (Some(Method::Cuts), LoadedProblem::Budget(_)) => {
            return Err(Failure::usage(
                "--method cuts needs ellipsoidal rows, but the file carries budget rows",
            ));
        }
        (Some(Method::Budget), LoadedProblem::Ellipsoidal(_)) => {
            return Err(Failure::usage(
                "--method budget needs budget rows, but the file carries ellipsoidal rows",
            ));
        }
    };
    match method {
        Method::Cuts => solve_cuts(args, loaded),
        Method::Budget => solve_budget(args, loaded),
    }
}

fn solve_cuts(args: SolveArgs, loaded: LoadedProblem) -> Result<i32, Failure> {
    let LoadedProblem::Ellipsoidal(problem) = loaded else {
        unreachable!("method resolution checked the row kind");
    };
    let mut config = SolverConfig::default();
    if let Some(v) = args.eps {
        config.eps_stall = v;
    }
    if let Some(v) = args.feas_tol {
        config.feas_tol = v;
    }
    if let Some(v) = args.max_iter {
        config.max_iter = v;
    }
    if let Some(p) = args.cut_policy {
        config.cut_policy = match p {
            PolicyArg::All => CutPolicy::AllRows,
            PolicyArg::Violated => CutPolicy::ViolatedOnly,
        };
    }

    let report = cuts::solve(&problem, &config).map_err(|e| match e {
        SolveError::Model(_) | SolveError::Milp(MilpError::UnboundedInteger(_)) => {
            Failure::usage(e.to_string())
        }
        other => Failure::runtime(other.to_string()),
    })?;

    let status = match report.final_status {
        SolveStatus::ConicOptimal => "conic_optimal",
        SolveStatus::Stalled => "stalled",
        SolveStatus::IterLimit => "iter_limit",
        SolveStatus::MasterInfeasible => "master_infeasible",
    };
    let iterations = report.iterations.len() as u64;
    if let Some(path) = &args.out {
        write_solution(path, status, report.final_objective, report.final_x.as_ref(), iterations)?;
    }
    if let Some(path) = &args.trace {
        write_atomic(path, report.trace_csv().as_bytes())?;
    }
    if let Some(path) = &args.report {
        match &report.reliability {
            Some(rel) => write_atomic(path, check_doc_json(&problem, rel)?.as_bytes())?,
            None => eprintln!("no reliability report: the run produced no design point"),
        }
    }
    println!(
        "status={status} objective={} iterations={iterations} x={}",
        fmt_opt(report.final_objective),
        fmt_vec(report.final_x.as_deref()),
    );
    Ok(match report.final_status {
        SolveStatus::ConicOptimal => 0,
        SolveStatus::Stalled | SolveStatus::IterLimit => 1,
        SolveStatus::MasterInfeasible => 3,
    })
}

fn solve_budget(args: SolveArgs, loaded: LoadedProblem) -> Result<i32, Failure> {
    let LoadedProblem::Budget(problem) = loaded else {
        unreachable!("method resolution checked the row kind");
    };
    for (flag, given) in [
        ("--eps", args.eps.is_some()),
        ("--feas-tol", args.feas_tol.is_some()),
        ("--max-iter", args.max_iter.is_some()),
        ("--cut-policy", args.cut_policy.is_some()),
        ("--trace", args.trace.is_some()),
        ("--report", args.report.is_some()),
    ] {
        if given {
            return Err(Failure::usage(format!(
                "{flag} only applies to the cuts method"
            )));
        }
    }

    let sol = budget::solve(&problem, SolverConfig::default().int_tol).map_err(|e| match e {
        BudgetError::Model(_) | BudgetError::Milp(MilpError::UnboundedInteger(_)) => {
            Failure::usage(e.to_string())
        }
        other => Failure::runtime(other.to_string()),
    })?;

    let status = milp_status_str(sol.status);
    if let Some(path) = &args.out {
        write_solution(path, status, sol.objective, sol.x.as_ref(), sol.node_count)?;
    }
    println!(
        "status={status} objective={} iterations={} x={}",
        fmt_opt(sol.objective),
        sol.node_count,
        fmt_vec(sol.x.as_deref()),
    );
    Ok(match sol.status {
        MilpStatus::Optimal => 0,
        MilpStatus::Infeasible => 3,
        MilpStatus::Unbounded | MilpStatus::IterLimit => 1,
    })
}

fn cmd_check(
    input: &Path,
    x: &[f64],
    feas_tol: Option<f64>,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    let problem = match load_file(input)? {
        LoadedProblem::Ellipsoidal(p) => p,
        LoadedProblem::Budget(_) => {
            return Err(Failure::usage(
                "reliability checks need ellipsoidal rows; this file carries budget rows",
            ));
        }
    };
    if x.len() != problem.num_vars() {
        return Err(Failure::usage(format!(
            "design vector has {} entries, problem has {} variables",
            x.len(),
            problem.num_vars()
        )));
    }
    validate(&problem)
        .into_result()
        .map_err(|e| Failure::usage(e.to_string()))?;

    let tol = feas_tol.unwrap_or(SolverConfig::default().feas_tol);
    let rep = reliability::report_with_tol(&problem, x, tol);
    for (row, r) in problem.rows.iter().zip(&rep.rows) {
        println!(
            "row {}: beta_true={} p_exact={} p_bound={} margin={} feasible={}",
            r.row_index,
            fmt_f64(r.beta_true),
            fmt_f64(r.p_exact),
            fmt_f64(r.p_bound),
            fmt_f64(row.b - r.conic_lhs),
            r.feasible,
        );
    }
    if let Some(path) = out {
        write_atomic(path, check_doc_json(&problem, &rep)?.as_bytes())?;
    }
    Ok(if rep.all_feasible() { 0 } else { 3 })
}

fn cmd_gen(
    family: Family,
    blocks: Option<u32>,
    variant: Option<Variant>,
    out: Option<PathBuf>,
) -> Result<i32, Failure> {
    let (loaded, default_name) = match family {
        Family::Illustrative => {
            if blocks.is_some() || variant.is_some() {
                return Err(Failure::usage(
                    "--blocks and --variant only apply to the truss family",
                ));
            }
            (
                LoadedProblem::Ellipsoidal(gen_illustrative()),
                "illustrative.json".to_string(),
            )
        }
        Family::Truss => {
            let n_b = blocks.unwrap_or(1);
            let spec = TrussSpec {
                n_blocks: n_b as usize,
                ..TrussSpec::default()
            };
            match variant.unwrap_or(Variant::Ellipsoid) {
                Variant::Ellipsoid => (
                    LoadedProblem::Ellipsoidal(
                        gen_truss(&spec).map_err(|e| Failure::usage(e.to_string()))?,
                    ),
                    format!("truss_nb{n_b}.json"),
                ),
                Variant::Budget => (
                    LoadedProblem::Budget(
                        gen_truss_budget(&spec).map_err(|e| Failure::usage(e.to_string()))?,
                    ),
                    format!("truss_budget_nb{n_b}.json"),
                ),
            }
        }
    };
    let path = out.unwrap_or_else(|| PathBuf::from(default_name));
    let text = problem_to_json(&loaded)?;
    write_atomic(&path, text.as_bytes())?;
    let rows = match &loaded {
        LoadedProblem::Ellipsoidal(p) => p.rows.len(),
        LoadedProblem::Budget(p) => p.rows.len(),
    };
    println!(
        "wrote {} ({} variables, {} rows)",
        path.display(),
        loaded.num_vars(),
        rows
    );
    Ok(0)
}

fn cmd_bench(
    blocks: &[u32],
    methods: &[Method],
    repeat: u32,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    if methods.is_empty() {
        return Err(Failure::usage("at least one method is required"));
    }
    let mut csv = String::from("method,n_b,seconds,objective,status\n");
    for &method in methods {
        for &n_b in blocks {
            let spec = TrussSpec {
                n_blocks: n_b as usize,
                ..TrussSpec::default()
            };
            for _ in 0..repeat {
                let (seconds, objective, status) = match method {
                    Method::Cuts => {
                        let problem =
                            gen_truss(&spec).map_err(|e| Failure::usage(e.to_string()))?;
                        let start = Instant::now();
                        let rep = cuts::solve(&problem, &SolverConfig::default())
                            .map_err(|e| Failure::runtime(e.to_string()))?;
                        let status = match rep.final_status {
                            SolveStatus::ConicOptimal => "conic_optimal",
                            SolveStatus::Stalled => "stalled",
                            SolveStatus::IterLimit => "iter_limit",
                            SolveStatus::MasterInfeasible => "master_infeasible",
                        };
                        (start.elapsed().as_secs_f64(), rep.final_objective, status)
                    }
                    Method::Budget => {
                        let problem =
                            gen_truss_budget(&spec).map_err(|e| Failure::usage(e.to_string()))?;
                        let start = Instant::now();
                        let sol = budget::solve(&problem, SolverConfig::default().int_tol)
                            .map_err(|e| Failure::runtime(e.to_string()))?;
                        (
                            start.elapsed().as_secs_f64(),
                            sol.objective,
                            milp_status_str(sol.status),
                        )
                    }
                };
                csv.push_str(&format!(
                    "{method},{n_b},{seconds:.6},{},{status}\n",
                    fmt_opt(objective)
                ));
            }
        }
    }
    print!("{csv}");
    if let Some(path) = out {
        write_atomic(path, csv.as_bytes())?;
    }
    Ok(0)
}

fn load_file(path: &Path) -> Result<LoadedProblem, Failure> {
    load_problem(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn milp_status_str(status: MilpStatus) -> &'static str {
    match status {
        MilpStatus::Optimal => "optimal",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::Unbounded => "unbounded",
        MilpStatus::IterLimit => "iter_limit",
    }
}

/// Shortest round-trip formatting, switching to scientific notation for
/// tiny magnitudes so violation probabilities stay readable.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() && v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    }
}

fn fmt_vec(x: Option<&[f64]>) -> String {
    match x {
        Some(x) => {
            let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            format!("[{}]", parts.join(", "))
        }
        None => "none".to_string(),
    }
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    status: &'a str,
    objective: Option<f64>,
    x: Option<&'a Vec<f64>>,
    iterations: u64,
}

fn write_solution(
    path: &Path,
    status: &str,
    objective: Option<f64>,
    x: Option<&Vec<f64>>,
    iterations: u64,
) -> Result<(), Failure> {
    let doc = SolutionDoc {
        status,
        objective,
        x,
        iterations,
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Serialize)]
struct CheckRowDoc {
    row_index: usize,
    /// `null` when the index is infinite; the probability fields keep the
    /// sign unambiguous (exact probability 0 at +inf, 1 at -inf).
    beta_true: f64,
    p_exact: f64,
    p_bound: f64,
    margin: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct CheckDoc {
    rows: Vec<CheckRowDoc>,
    all_feasible: bool,
}

fn check_doc_json(problem: &RobustProblem, rep: &ReliabilityReport) -> Result<String, Failure> {
    let rows = problem
        .rows
        .iter()
        .zip(&rep.rows)
        .map(|(row, r)| CheckRowDoc {
            row_index: r.row_index,
            beta_true: r.beta_true,
            p_exact: r.p_exact,
            p_bound: r.p_bound,
            margin: row.b - r.conic_lhs,
            feasible: r.feasible,
        })
        .collect();
    let doc = CheckDoc {
        rows,
        all_feasible: rep.all_feasible(),
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes via a temporary file in the target directory plus rename, so a
/// crash never leaves a half-written artifact at the destination.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| Failure::usage(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
