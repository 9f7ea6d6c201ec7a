//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 unreadable input,
//! 3 solver failure (including a sampled residual above its bound),
//! 4 infeasible perturbation request.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::edgelist::EdgeList;
use crate::error::Error;
use crate::matrix::{DanglingPolicy, ScoreVector, SparseStochasticMatrix};
use crate::models::{GridModel, GridModelSpec};
use crate::norms::{phi, NormPair, ObjectiveValue, UncertaintySpec};
use crate::perturbation::{empirical_phi_lower_bound, UncertaintySet};
use crate::solvers::{
    algorithm1, averaged_power_to_tol, mirror_descent_minimize, pagerank, suggest_epsilon,
    DescentMethod, SolverConfig, StopReason, ALGORITHM1_MAX_ITER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "robust-rank", version, about = "Robust dominant eigenvectors of link matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score the nodes of one graph with one solver.
    Rank(RankArgs),
    /// Score one graph with several solvers side by side.
    Compare(CompareArgs),
    /// Sample perturbations around a score vector and compare the largest
    /// realized residual with its upper bound.
    Stress(StressArgs),
    /// Write a synthetic grid model as an edge list.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edge-list file (0-based `src<TAB>dst`, optional `n=` header and
    /// `dangling:<id>` lines).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    input: Option<PathBuf>,
    /// Synthetic grid model instead of an input file.
    #[arg(long, requires = "n")]
    model: Option<GridModel>,
    /// Grid side of the synthetic model.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Total perturbation budget ε.
    #[arg(long, default_value_t = 1.0, conflicts_with = "suggest_epsilon")]
    epsilon: f64,
    /// Pick ε from the fraction `q` of pages with uncertain out-degree and
    /// the mean out-degree `m`.
    #[arg(long, num_args = 2, value_names = ["Q", "M"])]
    suggest_epsilon: Option<Vec<f64>>,
    /// Norm pair of the objective.
    #[arg(long, default_value = "l2l2")]
    pair: NormPair,
    /// Per-column budgets: `uniform:<v>` or `inv-degree` (1 / out-degree).
    /// Defaults to ε / n for every column.
    #[arg(long)]
    col_budget: Option<ColBudget>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// PageRank damping factor.
    #[arg(long)]
    alpha: Option<f64>,
    /// Solver tolerance (PageRank: ℓ1 step, power-avg: residual,
    /// robust-exact: relative φ decrease).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Descent scheme of the exact solver.
    #[arg(long, default_value = "accelerated")]
    method: DescentMethod,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Emit only the diagonal `(i, i)` of a grid model.
    #[arg(long, requires = "model", conflicts_with = "last_row")]
    diagonal: bool,
    /// Emit only the last row `(n, j)` of a grid model.
    #[arg(long, requires = "model")]
    last_row: bool,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = SolverChoice::RobustExact)]
    solver: SolverChoice,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Emit only the `k` highest-scoring nodes, best first.
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Comma-separated solvers, at least two.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1..,
          default_value = "nominal,pagerank,algorithm1,robust-exact")]
    solvers: Vec<SolverChoice>,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    solve: SolveArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct StressArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Solver producing the score vector under test.
    #[arg(long, value_enum, default_value_t = SolverChoice::RobustExact)]
    solver: SolverChoice,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Perturbation set: xi1, xi2, xif or frobenius.
    #[arg(long, default_value = "xif")]
    set: UncertaintySet,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add the rank-1 worst case to the sample pool when it is feasible.
    #[arg(long)]
    include_rank1: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    model: GridModel,
    #[arg(long)]
    n: usize,
    /// Destination file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolverChoice {
    Pagerank,
    /// Cesàro-averaged power iteration; converges to the nominal dominant
    /// eigenvector.
    #[value(alias = "nominal")]
    PowerAvg,
    Algorithm1,
    RobustExact,
}

impl SolverChoice {
    fn name(self) -> &'static str {
        match self {
            Self::Pagerank => "pagerank",
            Self::PowerAvg => "power-avg",
            Self::Algorithm1 => "algorithm1",
            Self::RobustExact => "robust-exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColBudget {
    Uniform(f64),
    InvDegree,
}

impl std::str::FromStr for ColBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "inv-degree" {
            return Ok(Self::InvDegree);
        }
        s.strip_prefix("uniform:")
            .and_then(|v| v.parse().ok())
            .map(Self::Uniform)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("expected `uniform:<value>` or `inv-degree`, got {s:?}"))
            })
    }
}

impl std::fmt::Display for ColBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform(v) => write!(f, "uniform:{v}"),
            Self::InvDegree => f.write_str("inv-degree"),
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    fn input(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: e.to_string() }
    }

    fn solver(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::InvalidParameter(_) => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Rank(a) => cmd_rank(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::Stress(a) => cmd_stress(&a, out),
        Command::Generate(a) => cmd_generate(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

struct Graph {
    matrix: SparseStochasticMatrix,
    model: Option<GridModelSpec>,
}

fn load_graph(g: &GraphArgs) -> CliResult<Graph> {
    if let Some(path) = &g.input {
        if g.n.is_some() {
            return Err(Failure::config("--n only applies to --model"));
        }
        let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let edges = EdgeList::parse(BufReader::new(file))
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let matrix = SparseStochasticMatrix::from_edge_list(&edges, DanglingPolicy::UniformAll)
            .map_err(Failure::input)?;
        return Ok(Graph { matrix, model: None });
    }
    let (Some(model), Some(n)) = (g.model, g.n) else {
        return Err(Failure::config("either --input or --model with --n is required"));
    };
    let spec = GridModelSpec::new(n, model).map_err(Failure::config)?;
    Ok(Graph { matrix: spec.generate(), model: Some(spec) })
}

fn build_spec(a: &SpecArgs, p: &SparseStochasticMatrix) -> CliResult<UncertaintySpec> {
    let n = p.n();
    let epsilon = match a.suggest_epsilon.as_deref() {
        Some(&[q, m]) => suggest_epsilon(n, q, m).map_err(Failure::config)?,
        Some(_) => return Err(Failure::config("--suggest-epsilon takes two values")),
        None => a.epsilon,
    };
    let budgets: Vec<f64> = match a.col_budget {
        None => vec![epsilon / n as f64; n],
        Some(ColBudget::Uniform(v)) => vec![v; n],
        Some(ColBudget::InvDegree) => p.out_degrees().iter().map(|&d| 1.0 / d as f64).collect(),
    };
    UncertaintySpec::new(epsilon, &budgets, a.pair).map_err(Failure::config)
}

fn solver_config(a: &SolveArgs, solver: SolverChoice) -> CliResult<SolverConfig> {
    let defaults = SolverConfig::default();
    let config = SolverConfig {
        alpha: a.alpha.unwrap_or(defaults.alpha),
        tol: a.tol.unwrap_or(match solver {
            SolverChoice::PowerAvg => 1e-6,
            _ => defaults.tol,
        }),
        max_iter: a.max_iter.unwrap_or(match solver {
            SolverChoice::Algorithm1 => ALGORITHM1_MAX_ITER,
            _ => defaults.max_iter,
        }),
        method: a.method,
        ..defaults
    };
    config.validate().map_err(Failure::config)?;
    Ok(config)
}

#[derive(Debug, Serialize)]
struct Solved {
    solver: &'static str,
    scores: ScoreVector,
    phi_history: Vec<(usize, f64)>,
    iterations: usize,
    stop_reason: StopReason,
    objective: ObjectiveValue,
}

fn solve(
    solver: SolverChoice,
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    config: &SolverConfig,
) -> CliResult<Solved> {
    let (scores, phi_history, iterations, stop_reason) = match solver {
        SolverChoice::Pagerank => {
            let r = pagerank(p, config.alpha, config.tol, config.max_iter).map_err(Failure::solver)?;
            (r.scores, Vec::new(), r.iterations_used, r.stop_reason)
        }
        SolverChoice::PowerAvg => {
            let r = averaged_power_to_tol(p, config.tol).map_err(Failure::solver)?;
            (r.scores, Vec::new(), r.iterations_used, r.stop_reason)
        }
        SolverChoice::Algorithm1 => {
            let r = algorithm1(p, spec, config.max_iter).map_err(Failure::solver)?;
            (r.scores, r.phi_history, r.iterations_used, r.stop_reason)
        }
        SolverChoice::RobustExact => {
            let r = mirror_descent_minimize(p, spec, config).map_err(Failure::solver)?;
            (r.scores, r.phi_history, r.iterations_used, r.stop_reason)
        }
    };
    let objective = phi(p, &scores, spec).map_err(Failure::solver)?;
    Ok(Solved { solver: solver.name(), scores, phi_history, iterations, stop_reason, objective })
}

/// Row labels and values for the score rows that are emitted.
fn select_rows(graph: &Graph, out: &OutputArgs, scores: &[f64]) -> (&'static str, Vec<(usize, f64)>) {
    match graph.model {
        Some(m) if out.diagonal => ("i", m.diagonal(scores).into_iter().enumerate().map(|(k, v)| (k + 1, v)).collect()),
        Some(m) if out.last_row => ("j", m.last_row(scores).into_iter().enumerate().map(|(k, v)| (k + 1, v)).collect()),
        _ => ("node", scores.iter().copied().enumerate().collect()),
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::input(format!("writing output: {e}"))
}

fn spec_json(spec: &UncertaintySpec, a: &SpecArgs) -> serde_json::Value {
    json!({
        "epsilon": spec.epsilon(),
        "pair": spec.pair(),
        "col_budget": a.col_budget.map_or_else(|| "default".to_string(), |c| c.to_string()),
    })
}

fn graph_json(g: &GraphArgs, p: &SparseStochasticMatrix) -> serde_json::Value {
    json!({
        "input": g.input.as_ref().map(|p| p.display().to_string()),
        "model": g.model,
        "n": g.n,
        "nodes": p.n(),
    })
}

fn cmd_rank(a: &RankArgs, out: &mut dyn Write) -> CliResult<()> {
    let graph = load_graph(&a.graph)?;
    if a.solve.alpha.is_some() && a.solver != SolverChoice::Pagerank {
        return Err(Failure::config("--alpha only applies to --solver pagerank"));
    }
    if a.top_k.is_some() && (a.output.diagonal || a.output.last_row) {
        return Err(Failure::config("--top-k cannot be combined with --diagonal or --last-row"));
    }
    let p = &graph.matrix;
    let spec = build_spec(&a.spec, p)?;
    let config = solver_config(&a.solve, a.solver)?;
    let solved = solve(a.solver, p, &spec, &config)?;

    let (label, mut rows) = select_rows(&graph, &a.output, solved.scores.as_slice());
    if let Some(k) = a.top_k {
        rows = solved.scores.top_k(k).into_iter().map(|i| (i, solved.scores[i])).collect();
    }

    match a.output.format {
        Format::Csv => {
            let mut text = format!("{label},{}\n", solved.solver);
            for (id, v) in &rows {
                text.push_str(&format!("{id},{}\n", fmt_f(*v)));
            }
            out.write_all(text.as_bytes()).map_err(io_failure)?;
        }
        Format::Json => {
            let mut doc = json!({
                "config": {
                    "command": "rank",
                    "graph": graph_json(&a.graph, p),
                    "solver": solved.solver,
                    "spec": spec_json(&spec, &a.spec),
                    "solver_config": config,
                    "top_k": a.top_k,
                },
                "scores": solved.scores,
                "phi_history": solved.phi_history,
                "iterations": solved.iterations,
                "stop_reason": solved.stop_reason,
                "objective": solved.objective,
            });
            if a.top_k.is_some() || a.output.diagonal || a.output.last_row {
                doc["selected"] = json!(rows.iter().map(|(id, v)| json!({ label: id, "score": v })).collect::<Vec<_>>());
            }
            write_json(out, &doc)?;
        }
    }
    Ok(())
}

fn write_json(out: &mut dyn Write, doc: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| Failure::solver(Error::InvalidInput(e.to_string())))?;
    writeln!(out, "{text}").map_err(io_failure)
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.solvers.len() < 2 {
        return Err(Failure::config("compare needs at least two solvers"));
    }
    if a.solve.alpha.is_some() && !a.solvers.contains(&SolverChoice::Pagerank) {
        return Err(Failure::config("--alpha only applies when pagerank is compared"));
    }
    let graph = load_graph(&a.graph)?;
    let p = &graph.matrix;
    let spec = build_spec(&a.spec, p)?;
    let mut results = Vec::with_capacity(a.solvers.len());
    for &s in &a.solvers {
        let config = solver_config(&a.solve, s)?;
        results.push(solve(s, p, &spec, &config)?);
    }

    let mut distances = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            distances.push((i, j, results[i].scores.l1_distance(&results[j].scores)));
        }
    }
    let selected: Vec<(&'static str, Vec<(usize, f64)>)> = results
        .iter()
        .map(|r| select_rows(&graph, &a.output, r.scores.as_slice()))
        .collect();
    let label = selected[0].0;

    match a.output.format {
        Format::Csv => {
            let mut text = String::from(label);
            for r in &results {
                text.push(',');
                text.push_str(r.solver);
            }
            text.push('\n');
            for (row, (id, _)) in selected[0].1.iter().enumerate() {
                text.push_str(&id.to_string());
                for (_, col) in &selected {
                    text.push(',');
                    text.push_str(&fmt_f(col[row].1));
                }
                text.push('\n');
            }
            text.push_str("\nsolver,phi,residual_term,penalty_term\n");
            for r in &results {
                let o = r.objective;
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.solver,
                    fmt_f(o.total),
                    fmt_f(o.residual_term),
                    fmt_f(o.penalty_term)
                ));
            }
            text.push_str("\nsolver_a,solver_b,l1_distance\n");
            for (i, j, d) in &distances {
                text.push_str(&format!("{},{},{}\n", results[*i].solver, results[*j].solver, fmt_f(*d)));
            }
            out.write_all(text.as_bytes()).map_err(io_failure)?;
        }
        Format::Json => {
            let doc = json!({
                "config": {
                    "command": "compare",
                    "graph": graph_json(&a.graph, p),
                    "solvers": results.iter().map(|r| r.solver).collect::<Vec<_>>(),
                    "spec": spec_json(&spec, &a.spec),
                },
                "results": results,
                "selected": selected.iter().map(|(_, rows)| rows.iter().map(|r| r.1).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "l1_distances": distances.iter().map(|(i, j, d)| json!({
                    "a": results[*i].solver, "b": results[*j].solver, "distance": d,
                })).collect::<Vec<_>>(),
            });
            write_json(out, &doc)?;
        }
    }
    Ok(())
}

fn cmd_stress(a: &StressArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.solve.alpha.is_some() && a.solver != SolverChoice::Pagerank {
        return Err(Failure::config("--alpha only applies to --solver pagerank"));
    }
    let graph = load_graph(&a.graph)?;
    let p = &graph.matrix;
    let spec = build_spec(&a.spec, p)?;
    let config = solver_config(&a.solve, a.solver)?;
    let solved = solve(a.solver, p, &spec, &config)?;
    let report = empirical_phi_lower_bound(p, &solved.scores, &spec, a.set, a.samples, a.seed, a.include_rank1)
        .map_err(Failure::solver)?;

    match a.format {
        Format::Csv => {
            let text = format!(
                "set,samples,seed,max_realized,bound,nominal_residual,rank1_included,max_halvings\n{},{},{},{},{},{},{},{}\n",
                report.set,
                report.samples,
                a.seed,
                fmt_f(report.value),
                fmt_f(report.bound),
                fmt_f(report.nominal_residual),
                report.rank1_included,
                report.max_halvings
            );
            out.write_all(text.as_bytes()).map_err(io_failure)?;
        }
        Format::Json => {
            let doc = json!({
                "config": {
                    "command": "stress",
                    "graph": graph_json(&a.graph, p),
                    "solver": solved.solver,
                    "spec": spec_json(&spec, &a.spec),
                    "set": a.set,
                    "samples": a.samples,
                    "seed": a.seed,
                    "include_rank1": a.include_rank1,
                },
                "scores": solved.scores,
                "objective": solved.objective,
                "report": report,
            });
            write_json(out, &doc)?;
        }
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec = GridModelSpec::new(a.n, a.model).map_err(Failure::config)?;
    let edges = spec.edge_list();
    match &a.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            edges.write_tsv(std::io::BufWriter::new(file)).map_err(Failure::input)
        }
        None => edges.write_tsv(out).map_err(Failure::input),
    }
}
