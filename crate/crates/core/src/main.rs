use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use natura::bench::{run_grid, timing_violations, BenchSpec};
use natura::economy::fit_coeff_fn;
use natura::output;
use natura::scenario::{load_scenario, Scenario};
use natura::sim::{plan_tick, run_simulation, NoiseConfig, TickFault};
use natura::solver::{max_norm, residual, solve, Method, SolveError};

const EXIT_INVALID: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "natura",
    version,
    about = "In-natura planning: solve, simulate, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario for gross output and print it as CSV.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the daily simulation and write the trajectory as CSV.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-good, per-tick probability of an inventory loss.
        #[arg(long = "noise-p")]
        noise_p: Option<f64>,
        /// Loss fraction range as `lo,hi`.
        #[arg(long = "noise-range", value_parser = parse_range)]
        noise_range: Option<(f64, f64)>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "lambda-ext")]
        lambda_ext: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the direct solve over a grid of random economies.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "500")]
        industrial: Vec<usize>,
        #[arg(long = "final", value_delimiter = ',', default_value = "50")]
        finals: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        profiles: usize,
        #[arg(long, value_delimiter = ',', default_value = "500")]
        deps: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run cells concurrently; timings are marked contended.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit per-unit breakpoints from `output,total_input` samples.
    Fit {
        samples: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a scenario, solve its plan and report on it.
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    FixedPoint,
    Gradient,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Direct => Method::DirectSparse,
            MethodArg::FixedPoint => Method::FixedPoint,
            MethodArg::Gradient => Method::Gradient,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
}

/// A failure carrying its exit code.
struct Failure(u8, String);

impl Failure {
    fn invalid(msg: impl ToString) -> Self {
        Failure(EXIT_INVALID, msg.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::invalid(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path, solver: Option<&SolverArgs>) -> Result<Scenario, Failure> {
    let mut s = load_scenario(path).map_err(Failure::invalid)?;
    if let Some(args) = solver {
        if let Some(m) = args.method {
            s.sim.solver.method = m.into();
        }
        if let Some(t) = args.tol {
            s.sim.solver.tolerance = t;
        }
        if let Some(k) = args.max_iters {
            s.sim.solver.max_iterations = k;
        }
    }
    Ok(s)
}

fn solve_cmd(path: &Path, args: &SolverArgs, out: &Option<PathBuf>) -> CmdResult {
    let s = load(path, Some(args))?;
    let d = s.economy.profile_demand();
    let sol = match solve(&s.economy, &d, &s.sim.solver) {
        Ok(sol) => sol,
        Err(e @ SolveError::Singular) => return Err(Failure(EXIT_NOT_CONVERGED, e.to_string())),
        Err(e) => return Err(Failure::invalid(e)),
    };
    output::write_plan(sink(out)?, &s.economy, &sol.x).map_err(Failure::invalid)?;
    eprintln!(
        "method={} iterations={} residual={:e} termination={:?}",
        s.sim.solver.method, sol.iterations, sol.residual_norm, sol.termination
    );
    if !sol.converged {
        return Err(Failure(
            EXIT_NOT_CONVERGED,
            format!("solver did not converge ({:?})", sol.termination),
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    path: &Path,
    solver: &SolverArgs,
    theta: Option<f64>,
    horizon: Option<usize>,
    seed: Option<u64>,
    noise_p: Option<f64>,
    noise_range: Option<(f64, f64)>,
    gamma: Option<f64>,
    lambda_ext: Option<f64>,
    out: &Option<PathBuf>,
) -> CmdResult {
    let s = load(path, Some(solver))?;
    let mut cfg = s.sim.clone();
    if let Some(v) = theta {
        cfg.theta = v;
    }
    if let Some(v) = horizon {
        cfg.horizon = v;
    }
    if let Some(v) = seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = gamma {
        cfg.gamma = v;
    }
    if let Some(v) = lambda_ext {
        cfg.lambda_ext = v;
    }
    if let Some(p) = noise_p {
        cfg.noise.probability = p;
    }
    if let Some((lo, hi)) = noise_range {
        cfg.noise = NoiseConfig {
            loss_min: lo,
            loss_max: hi,
            ..cfg.noise
        };
    }
    let t = run_simulation(&s.economy, s.initial.clone(), &cfg).map_err(Failure::invalid)?;
    output::write_trajectory(sink(out)?, &s.economy, &t).map_err(Failure::invalid)?;
    let last_hu = t.reports.last().map_or(f64::NAN, |r| r.humanity);
    eprintln!(
        "ticks={} discounted_return={} final_humanity={} faults={}",
        t.reports.len(),
        t.discounted_return,
        last_hu,
        t.faults().count()
    );
    let unsolved = t
        .faults()
        .filter(|r| !matches!(r.fault, Some(TickFault::NegativePlan { .. })))
        .count();
    if unsolved > 0 {
        return Err(Failure(
            EXIT_NOT_CONVERGED,
            format!("{unsolved} ticks had no converged plan"),
        ));
    }
    Ok(())
}

fn validate_cmd(path: &Path) -> CmdResult {
    let s = load(path, None)?;
    let e = &s.economy;
    println!("goods: {}", e.n());
    println!("profiles: {}", e.profiles().len());
    println!(
        "coefficients: {} ({})",
        e.nnz(),
        if e.is_linear() {
            "constant"
        } else {
            "production-dependent"
        }
    );
    for j in e.heavy_columns() {
        println!(
            "warning: column {:?} needs at least one unit of input per unit of output",
            e.name(j)
        );
    }
    let sol = plan_tick(e, &s.sim).map_err(|err| Failure(EXIT_NOT_CONVERGED, err.to_string()))?;
    let r = residual(e, &sol.x, &e.profile_demand()).map_err(Failure::invalid)?;
    println!(
        "plan: method={} converged={} iterations={} residual={:e}",
        s.sim.solver.method,
        sol.converged,
        sol.iterations,
        max_norm(&r)
    );
    if !sol.negative_components.is_empty() {
        println!(
            "warning: plan has {} negative components",
            sol.negative_components.len()
        );
    }
    if !sol.converged {
        return Err(Failure(EXIT_NOT_CONVERGED, "plan did not converge".into()));
    }
    println!("ok");
    Ok(())
}

fn fit_cmd(samples: &Path, out: &Option<PathBuf>) -> CmdResult {
    let file = File::open(samples)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", samples.display())))?;
    let pts = output::read_samples(file).map_err(Failure::invalid)?;
    let f = fit_coeff_fn(&pts).map_err(Failure::invalid)?;
    output::write_breakpoints(sink(out)?, f.breakpoints()).map_err(Failure::invalid)
}

#[allow(clippy::too_many_arguments)]
fn bench_cmd(
    industrial: &[usize],
    finals: &[usize],
    profiles: usize,
    deps: &[usize],
    reps: usize,
    seed: u64,
    parallel: bool,
    tol: Option<f64>,
    out: &Option<PathBuf>,
) -> CmdResult {
    if reps == 0 {
        return Err(Failure::invalid("--reps must be >= 1"));
    }
    let mut spec = BenchSpec {
        industrial: industrial.to_vec(),
        finals: finals.to_vec(),
        profiles,
        deps: deps.to_vec(),
        repetitions: reps,
        seed,
        parallel,
        ..BenchSpec::default()
    };
    if let Some(t) = tol {
        spec.solver.tolerance = t;
    }
    spec.solver.validate().map_err(Failure::invalid)?;
    let rows = run_grid(&spec);
    output::write_bench(sink(out)?, &rows).map_err(Failure::invalid)?;
    for (a, b) in timing_violations(&rows) {
        eprintln!(
            "note: n_total={} solved faster than n_total={} (deps={})",
            rows[b].n_total, rows[a].n_total, rows[a].deps
        );
    }
    let failed: Vec<_> = rows.iter().filter(|r| !r.ok()).collect();
    if failed.is_empty() {
        return Ok(());
    }
    for r in &failed {
        eprintln!(
            "cell ({}, {}, {}, {}) failed: {}",
            r.n_industrial, r.n_final, r.n_profiles, r.deps, r.status
        );
    }
    let any_solve_failed = failed.iter().any(|r| !r.status.starts_with("deps "));
    Err(if any_solve_failed {
        Failure(EXIT_NOT_CONVERGED, "some cells failed to solve".into())
    } else {
        Failure::invalid("some cells could not be generated")
    })
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Solve {
            scenario,
            solver,
            out,
        } => solve_cmd(scenario, solver, out),
        Command::Simulate {
            scenario,
            solver,
            theta,
            horizon,
            seed,
            noise_p,
            noise_range,
            gamma,
            lambda_ext,
            out,
        } => simulate_cmd(
            scenario,
            solver,
            *theta,
            *horizon,
            *seed,
            *noise_p,
            *noise_range,
            *gamma,
            *lambda_ext,
            out,
        ),
        Command::Bench {
            industrial,
            finals,
            profiles,
            deps,
            reps,
            seed,
            parallel,
            tol,
            out,
        } => bench_cmd(
            industrial, finals, *profiles, deps, *reps, *seed, *parallel, *tol, out,
        ),
        Command::Fit { samples, out } => fit_cmd(samples, out),
        Command::Validate { scenario } => validate_cmd(scenario),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
