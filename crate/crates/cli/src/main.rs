//! `regot`: regularized optimal transport from the command line.
//!
//! Exit status is 0 on success, 1 on invalid input or a numerical failure,
//! and 2 when `--strict` is set and the solver did not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use regot::io::{
    grid_cost, read_cost_csv, read_histogram_csv, read_pgm, write_barycenter_trace_json,
    write_histogram_csv, write_matrix_csv, write_pgm, write_trace_json, GridMetric, GridSpec,
    PgmOptions,
};
use regot::{
    entropic_barycenter, exact_transport, generalized_barycenter, potential, solve_transport,
    BarycenterProblem, CostMatrix, Error, GibbsKernel, Histogram, RegularizerSpec, SolverConfig,
};

#[derive(Parser)]
#[command(name = "regot", version, about = "Regularized optimal transport solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a regularized transport problem between two histograms.
    Transport(TransportArgs),
    /// Compute a regularized barycenter of several histograms or images.
    Barycenter(BarycenterArgs),
    /// Solve the unregularized problem exactly (small instances only).
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegKind {
    Entropic,
    Quadratic,
    Tsallis,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Squared,
    Euclidean,
}

#[derive(Args)]
struct RegArgs {
    #[arg(long, value_enum)]
    reg: RegKind,
    #[arg(long)]
    lambda: f64,
    /// Tsallis index (required with `--reg tsallis`).
    #[arg(long)]
    qtilde: Option<f64>,
}

impl RegArgs {
    fn spec(&self) -> regot::Result<RegularizerSpec> {
        match self.reg {
            RegKind::Entropic => RegularizerSpec::entropic(self.lambda),
            RegKind::Quadratic => RegularizerSpec::quadratic(self.lambda),
            RegKind::Tsallis => {
                let q = self.qtilde.ok_or_else(|| {
                    Error::InvalidParameter("--reg tsallis needs --qtilde".into())
                })?;
                RegularizerSpec::tsallis(self.lambda, q)
            }
        }
    }
}

#[derive(Args)]
struct TransportArgs {
    #[command(flatten)]
    reg: RegArgs,
    #[arg(long)]
    cost: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Plan CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-sweep trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long)]
    log_domain: bool,
    /// Exit with status 2 unless the tolerance is reached.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BarycenterArgs {
    #[command(flatten)]
    reg: RegArgs,
    /// Comma-separated input files, all CSV or all PGM.
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
    /// Number of sweeps; all of them are run.
    #[arg(long)]
    iters: usize,
    /// Barycenter output, written in the input format.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// PGM only: treat white as empty (density = maxval − value).
    #[arg(long)]
    invert: bool,
    /// Cost matrix CSV. Required for CSV inputs; PGM inputs default to the
    /// pixel-grid cost.
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Side length of the square the pixel grid is spread over.
    #[arg(long, default_value_t = 1.0)]
    grid_side: f64,
    #[arg(long, value_enum, default_value = "squared")]
    metric: MetricArg,
    /// Entropic only: run the dual projection solver in the log domain
    /// instead of the kernel scaling iteration.
    #[arg(long)]
    log_domain: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    cost: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Optional plan CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } => Failure::NotConverged(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type CmdResult = Result<Value, Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: regot::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::NotConverged { .. } => Failure::from(e),
        other => Failure::Input(format!("{}: {other}", path.display())),
    })
}

fn number_or(x: Option<f64>, missing: &str) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        Some(_) => Value::Null,
        None => json!(missing),
    }
}

fn transport(args: &TransportArgs) -> CmdResult {
    let spec = args.reg.spec()?;
    let cost = in_file(&args.cost, read_cost_csv(&read(&args.cost)?))?;
    let p = in_file(&args.source, read_histogram_csv(&read(&args.source)?))?;
    let q = in_file(&args.target, read_histogram_csv(&read(&args.target)?))?;
    let cfg = SolverConfig::default()
        .with_tol(args.tol)
        .with_max_iters(args.max_iters)
        .with_log_domain(args.log_domain)
        .with_strict(args.strict);
    let out = solve_transport(&spec, &cost, &p, &q, &cfg)?;
    write(&args.out, &write_matrix_csv(out.plan.view()))?;
    if let Some(path) = &args.trace {
        write(path, &write_trace_json(&out.trace))?;
    }
    let last = out.trace.last();
    Ok(json!({
        "value": number_or(last.map(|r| r.primal), "n/a"),
        "dual": number_or(last.and_then(|r| r.dual), "n/a"),
        "iterations": out.iterations,
        "converged": out.converged,
        "row_err": number_or(last.map(|r| r.row_err), "n/a"),
        "col_err": number_or(last.map(|r| r.col_err), "n/a"),
    }))
}

enum Inputs {
    Csv(Vec<Histogram>),
    Pgm(Vec<Histogram>, GridSpec),
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn load_inputs(args: &BarycenterArgs) -> Result<Inputs, Failure> {
    let pgm_count = args.inputs.iter().filter(|p| is_pgm(p)).count();
    if pgm_count != 0 && pgm_count != args.inputs.len() {
        return Err(Failure::Input("inputs mix PGM and CSV files".into()));
    }
    if pgm_count == 0 {
        let hs = args
            .inputs
            .iter()
            .map(|p| in_file(p, read_histogram_csv(&read(p)?)))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Inputs::Csv(hs));
    }
    let opts = PgmOptions { invert: args.invert, ..Default::default() };
    let mut hs = Vec::new();
    let mut grid: Option<GridSpec> = None;
    for path in &args.inputs {
        let (h, g) = in_file(path, read_pgm(&read(path)?, opts))?;
        if let Some(first) = grid {
            if (first.height, first.width) != (g.height, g.width) {
                return Err(Failure::Input(format!(
                    "{}: image is {}x{}, expected {}x{}",
                    path.display(),
                    g.width,
                    g.height,
                    first.width,
                    first.height
                )));
            }
        }
        grid = Some(g);
        hs.push(h);
    }
    let metric = match args.metric {
        MetricArg::Squared => GridMetric::SquaredEuclidean,
        MetricArg::Euclidean => GridMetric::Euclidean,
    };
    let grid = grid.expect("at least one input").with_side(args.grid_side).with_metric(metric);
    Ok(Inputs::Pgm(hs, grid))
}

fn barycenter(args: &BarycenterArgs) -> CmdResult {
    let spec = args.reg.spec()?;
    let inputs = load_inputs(args)?;
    let (hists, grid) = match inputs {
        Inputs::Csv(h) => (h, None),
        Inputs::Pgm(h, g) => (h, Some(g)),
    };
    let cost = match (&args.cost, grid) {
        (Some(path), _) => in_file(path, read_cost_csv(&read(path)?))?,
        (None, Some(g)) => grid_cost(&g)?,
        (None, None) => return Err(Failure::Input("CSV inputs need --cost".into())),
    };
    let problem = BarycenterProblem::new(hists, args.weights.clone())?;
    let cfg = SolverConfig::default().fixed(args.iters).with_log_domain(args.log_domain);
    let (bary, value, record) = if spec.is_entropic() && !args.log_domain {
        let kernel = GibbsKernel::from_cost(&cost, spec.lambda())?;
        let out = entropic_barycenter(&kernel, &problem, &cfg)?;
        let mut value = 0.0;
        for (plan, r) in out.plans(&kernel).iter().zip(problem.weights()) {
            value += r * potential(&spec, &cost, plan.view())?;
        }
        if let Some(path) = &args.trace {
            write(path, &write_barycenter_trace_json(&out.trace))?;
        }
        (out.barycenter, value, out.trace.last().cloned())
    } else {
        let out = generalized_barycenter(&spec, &cost, &problem, &cfg)?;
        if let Some(path) = &args.trace {
            write(path, &write_barycenter_trace_json(&out.trace))?;
        }
        (out.barycenter, out.value, out.trace.last().cloned())
    };
    match grid {
        Some(g) => {
            let opts = PgmOptions { invert: args.invert, ..Default::default() };
            write(&args.out, &write_pgm(&bary, &g, opts)?)?;
        }
        None => write(&args.out, &write_histogram_csv(&bary))?,
    }
    let row_err = record.as_ref().map(|r| r.row_errs.iter().copied().fold(0.0, f64::max));
    Ok(json!({
        "value": number_or(Some(value), "n/a"),
        "dual": "n/a",
        "iterations": args.iters,
        "converged": Value::Null,
        "row_err": number_or(row_err, "n/a"),
        "col_err": number_or(record.map(|r| r.consensus_err), "n/a"),
    }))
}

fn oracle(args: &OracleArgs) -> CmdResult {
    let cost: CostMatrix = in_file(&args.cost, read_cost_csv(&read(&args.cost)?))?;
    let p = in_file(&args.source, read_histogram_csv(&read(&args.source)?))?;
    let q = in_file(&args.target, read_histogram_csv(&read(&args.target)?))?;
    let sol = exact_transport(&cost, &p, &q)?;
    if let Some(path) = &args.out {
        write(path, &write_matrix_csv(sol.plan.view()))?;
    }
    Ok(json!({ "value": sol.value, "nonzeros": sol.plan.nonzeros() }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Transport(a) => transport(a),
        Command::Barycenter(a) => barycenter(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
