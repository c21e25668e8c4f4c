//! `tspvqa`: run the variational TSP solver, its classical oracles and the
//! Birkhoff decomposition from the command line.
//!
//! Exit status: 0 for a converged run ending on a valid tour (or a finished
//! oracle/decomposition), 2 when the solver did not converge to a valid
//! tour, 1 for bad input. Data goes to stdout or `--out`, diagnostics to stderr.

mod files;
mod trace;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tspvqa::cost::{DEFAULT_A_SUB, DEFAULT_DIAG_PENALTY};
use tspvqa::measurement::DEFAULT_SHOTS;
use tspvqa::optimizer::{DEFAULT_FD_STEP, DEFAULT_LEARNING_RATE, DEFAULT_MAX_ITERS, DEFAULT_STARTS};
use tspvqa::oracle::{birkhoff_decompose, brute_force_tsp, held_karp};
use tspvqa::{optimize, OptimizerConfig, Protocol, ReadoutMode, SubtourMode};

use trace::{write_trace, ConfigEcho};

#[derive(Parser)]
#[command(
    name = "tspvqa",
    version,
    about = "Variational TSP solver on two entangled registers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver with the universal-mesh readout.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the solver with a chosen readout protocol.
    Emulate {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Projectors)]
        protocol: ProtocolArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Optimal tour by exhaustive search and by Held–Karp.
    Oracle { problem: PathBuf },
    /// Decompose a doubly stochastic matrix into weighted permutations.
    Birkhoff { matrix: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Projectors,
    Universal,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubtourArg {
    Full,
    Lazy,
    Off,
}

#[derive(Args)]
struct SolverArgs {
    /// Exact readout instead of sampled coincidences.
    #[arg(long, conflicts_with = "shots")]
    exact: bool,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, env = "TSPVQA_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    fd_step: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    starts: usize,
    /// Subtour weight; overrides the problem file (default 50).
    #[arg(long)]
    asub: Option<f64>,
    /// Diagonal penalty D_ii; overrides the problem file (default 100).
    #[arg(long)]
    dii: Option<f64>,
    #[arg(long, value_enum, default_value_t = SubtourArg::Lazy)]
    subtour: SubtourArg,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Input(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn input<E: ToString>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_solver(
    command: &'static str,
    problem: &Path,
    protocol: Protocol,
    args: &SolverArgs,
) -> Result<ExitCode, Failure> {
    let loaded = files::load_problem(problem).map_err(Failure::Input)?;
    let diag_penalty = args.dii.or(loaded.diag_penalty).unwrap_or(DEFAULT_DIAG_PENALTY);
    let a_sub = args.asub.or(loaded.a_sub).unwrap_or(DEFAULT_A_SUB);
    let d = loaded.distances(diag_penalty).map_err(Failure::Input)?;
    let (subtour, subtour_name) = match args.subtour {
        SubtourArg::Full => (SubtourMode::Full, "full"),
        SubtourArg::Lazy => (SubtourMode::Lazy, "lazy"),
        SubtourArg::Off => (SubtourMode::Off, "off"),
    };
    let readout = if args.exact {
        ReadoutMode::Exact
    } else {
        ReadoutMode::Sampled { shots: args.shots }
    };
    let config = OptimizerConfig {
        learning_rate: args.lr,
        fd_step: args.fd_step,
        max_iters: args.max_iters,
        n_starts: args.starts,
        readout,
        protocol,
        seed: args.seed,
        a_sub,
        subtour,
        ..OptimizerConfig::default()
    };
    let echo = ConfigEcho {
        command,
        protocol,
        shots: (!args.exact).then_some(args.shots),
        seed: args.seed,
        learning_rate: args.lr,
        fd_step: args.fd_step,
        max_iters: args.max_iters,
        starts: args.starts,
        cost_tol: config.effective_cost_tol(),
        patience: config.patience,
        max_rounds: config.max_rounds,
        a_sub,
        diag_penalty,
        subtour: subtour_name,
    };
    let run = optimize(&d, &config).map_err(input)?;
    let mut out = open_output(args.out.as_deref())?;
    write_trace(&mut out, d.n_cities(), &echo, &run)?;
    if run.converged && run.is_valid_tour() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "solver did not converge to a valid tour (converged: {}, valid tour: {})",
            run.converged,
            run.is_valid_tour()
        );
        Ok(ExitCode::from(2))
    }
}

fn run_oracle(problem: &Path) -> Result<ExitCode, Failure> {
    let loaded = files::load_problem(problem).map_err(Failure::Input)?;
    let d = loaded
        .distances(loaded.diag_penalty.unwrap_or(DEFAULT_DIAG_PENALTY))
        .map_err(Failure::Input)?;
    let mut out = open_output(None)?;
    match brute_force_tsp(&d) {
        Ok((route, length)) => {
            let record = json!({"method": "brute_force", "route": route.to_route().map_err(input)?, "length": length});
            writeln!(out, "{record}")?;
        }
        Err(e) => eprintln!("brute force refused: {e}"),
    }
    let length = held_karp(&d).map_err(input)?;
    writeln!(out, "{}", json!({"method": "held_karp", "length": length}))?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn run_birkhoff(matrix: &Path) -> Result<ExitCode, Failure> {
    let x = files::load_matrix(matrix).map_err(Failure::Input)?;
    let dec = birkhoff_decompose(&x).map_err(input)?;
    let mut out = open_output(None)?;
    for (weight, p) in &dec.terms {
        let successors: Vec<usize> = p.successors().iter().map(|s| s + 1).collect();
        let cycles: Vec<Vec<usize>> = p
            .cycles()
            .into_iter()
            .map(|c| c.into_iter().map(|k| k + 1).collect())
            .collect();
        writeln!(
            out,
            "{}",
            json!({"record": "term", "weight": weight, "successors": successors, "cycles": cycles})
        )?;
    }
    let summary = json!({
        "record": "summary",
        "terms": dec.terms.len(),
        "weight_sum": dec.weight_sum(),
        "residual": dec.residual,
    });
    writeln!(out, "{summary}")?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // Usage errors exit 1; 2 is reserved for a solver that did not converge.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Solve { problem, solver } => run_solver("solve", problem, Protocol::Universal, solver),
        Command::Emulate {
            problem,
            protocol,
            solver,
        } => {
            let protocol = match protocol {
                ProtocolArg::Projectors => Protocol::Projectors,
                ProtocolArg::Universal => Protocol::Universal,
            };
            run_solver("emulate", problem, protocol, solver)
        }
        Command::Oracle { problem } => run_oracle(problem),
        Command::Birkhoff { matrix } => run_birkhoff(matrix),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(1)
        }
    }
}
