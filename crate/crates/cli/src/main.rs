//! `pibo`: discrete Bayesian optimization of differential stripline
//! geometry, with a parallel-initialized mode, exhaustive baselines, and
//! benchmark/compare harnesses.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pibo_core::{
    benchmark, brute_force, compare_solo_vs_pibo, line_metrics_from_values,
    objective_from_metrics, run_bo, run_pibo, ObjectiveMode, ObjectiveSpec, RunTrace,
    SearchSpace, StriplineObjective,
};

use config::{parse_config, RunConfig};

#[derive(Parser)]
#[command(name = "pibo", version, about = "Bayesian optimization of stripline geometry on a discrete grid", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parallel-initialized run: independent workers, merge, final phase
    Run(RunArgs),
    /// Single sequential run
    Solo(RunArgs),
    /// Exhaustive enumeration of the configured grid
    Brute {
        #[arg(long)]
        config: PathBuf,
        /// Write the full objective table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the parallel strategy against the exhaustive optimum over many seeds
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Number of master seeds, counted up from --first-seed
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Write per-seed results as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Budget-matched comparison of one sequential run vs the parallel strategy
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Number of seeds, counted up from --first-seed
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Evaluation budget per arm; defaults to the configured parallel budget
        #[arg(long)]
        budget: Option<u64>,
        /// Write per-seed results as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the line model at one (possibly off-grid) point
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Trace CSV path; overrides the config's output.trace
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "minimize_loss")]
    MinimizeLoss,
    #[value(name = "maximize_loss")]
    MaximizeLoss,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    w: f64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    h1: f64,
    #[arg(long)]
    h2: f64,
    #[arg(long)]
    er: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::MinimizeLoss)]
    mode: ModeArg,
    /// Target differential impedance in ohms
    #[arg(long)]
    z_t: Option<f64>,
    #[arg(long)]
    loss_weight: Option<f64>,
    #[arg(long)]
    f0_ghz: Option<f64>,
    #[arg(long)]
    tan_delta: Option<f64>,
    #[arg(long)]
    conductor_coeff: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, true),
        Command::Solo(args) => cmd_run(&args, false),
        Command::Brute { config, out } => cmd_brute(&config, out.as_deref()),
        Command::Bench { config, seeds, first_seed, out } => {
            cmd_bench(&config, seeds, first_seed, out.as_deref())
        }
        Command::Compare { config, seeds, first_seed, budget, out } => {
            cmd_compare(&config, seeds, first_seed, budget, out.as_deref())
        }
        Command::Eval(args) => cmd_eval(&args),
    }
}

/// Loads a config and builds the space and objective, printing the
/// geometry warning when the grid leaves no room for the trace.
fn load(path: &Path) -> Result<(RunConfig, SearchSpace, StriplineObjective)> {
    let config = parse_config(path)?;
    let space = config.build_space()?;
    if let Some(warning) = RunConfig::geometry_warning(&space) {
        eprintln!("{warning}");
    }
    let objective = StriplineObjective::new(config.objective_spec()?)?;
    Ok((config, space, objective))
}

fn write_trace(
    path: &Path,
    trace: &RunTrace,
    spec: &ObjectiveSpec,
) -> Result<()> {
    let csv = report::trace_csv(trace, spec)?;
    fs::write(path, csv).with_context(|| format!("cannot write trace {}", path.display()))?;
    println!("trace: {} ({} evaluations)", path.display(), trace.len());
    Ok(())
}

fn cmd_run(args: &RunArgs, parallel: bool) -> Result<()> {
    let (config, space, objective) = load(&args.config)?;
    let seed = args.seed.unwrap_or(config.seed);
    let (trace, best_point, best_value) = if parallel {
        let outcome = run_pibo(&space, &objective, &config.pibo_config(seed)?)?;
        (outcome.trace, outcome.best_point, outcome.best_value)
    } else {
        let (_, trace) = run_bo(&space, &objective, &config.bo_config(seed)?)?;
        let (point, value) = {
            let last =
                trace.records().last().expect("a validated run has at least one evaluation");
            (last.incumbent_best_point.clone(), last.incumbent_best_value)
        };
        (trace, point, value)
    };
    println!("{}", report::best_line(&best_point, best_value, objective.spec())?);
    let out = args.out.clone().or_else(|| config.output.trace.as_ref().map(PathBuf::from));
    if let Some(path) = out {
        write_trace(&path, &trace, objective.spec())?;
    }
    Ok(())
}

fn cmd_brute(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let (_, space, objective) = load(config_path)?;
    let result = brute_force(&space, &objective, out.is_some())?;
    println!("{}", report::best_line(&result.best_point, result.best_value, objective.spec())?);
    if let Some(path) = out {
        let table = result.table.as_deref().expect("table requested");
        let csv = report::brute_csv(&space, table, objective.spec())?;
        fs::write(path, csv).with_context(|| format!("cannot write table {}", path.display()))?;
        println!("table: {} ({} points)", path.display(), table.len());
    }
    Ok(())
}

fn cmd_bench(config_path: &Path, seeds: u64, first_seed: u64, out: Option<&Path>) -> Result<()> {
    let (config, space, objective) = load(config_path)?;
    let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
    let template = config.pibo_config(0)?;
    let report = benchmark(&space, &objective, &template, &seed_list)?;
    println!("{}", report::bench_summary(&report));
    if let Some(path) = out {
        fs::write(path, report::bench_csv(&report))
            .with_context(|| format!("cannot write report {}", path.display()))?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn cmd_compare(
    config_path: &Path,
    seeds: u64,
    first_seed: u64,
    budget: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let (config, space, objective) = load(config_path)?;
    let budget = budget.unwrap_or(config.pibo_config(0)?.max_evaluations());
    let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
    let report = compare_solo_vs_pibo(&space, &objective, budget as usize, &seed_list)?;
    println!("{}", report::compare_summary(&report));
    if let Some(path) = out {
        fs::write(path, report::compare_csv(&report))
            .with_context(|| format!("cannot write report {}", path.display()))?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mode = match args.mode {
        ModeArg::MinimizeLoss => ObjectiveMode::MinimizeLoss,
        ModeArg::MaximizeLoss => ObjectiveMode::MaximizeLoss,
    };
    let mut spec = ObjectiveSpec::for_mode(mode);
    if let Some(z_t) = args.z_t {
        spec.z_t = z_t;
    }
    if let Some(w) = args.loss_weight {
        spec.loss_weight = w;
    }
    if let Some(f0) = args.f0_ghz {
        spec.f0_ghz = f0;
    }
    if let Some(td) = args.tan_delta {
        spec.tan_delta = td;
    }
    if let Some(c) = args.conductor_coeff {
        spec.conductor_coeff = c;
    }
    spec.validate()?;
    let values = [args.w, args.s, args.t, args.h1, args.h2, args.er];
    let metrics = line_metrics_from_values(&values, &spec)?;
    let objective = objective_from_metrics(&metrics, &spec);
    println!("z_diff = {} ohm", metrics.z_diff);
    println!("loss = {} dB/in", metrics.loss);
    let mode_name = match mode {
        ObjectiveMode::MinimizeLoss => "minimize_loss",
        ObjectiveMode::MaximizeLoss => "maximize_loss",
    };
    println!("objective ({mode_name}) = {objective}");
    Ok(())
}
