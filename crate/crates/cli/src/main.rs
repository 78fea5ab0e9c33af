use std::path::PathBuf;
use std::process::ExitCode;

use altserve_cli::run::run_with_threads;
use altserve_cli::spec::{PolicyChoice, SimSpec};
use altserve_cli::{fit_report, preset, threads_from_env, CliError, ExperimentSpec};
use clap::{Args, Parser, Subcommand};

/// Server waiting times at two service points: alternating versus
/// first-ready service.
#[derive(Parser)]
#[command(name = "altserve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic results for the alternating policy.
    SolveAlt(RunArgs),
    /// Analytic results for the non-alternating (first-ready) policy.
    SolveNa(RunArgs),
    /// Analytic results plus simulation estimates for the spec's policy.
    Simulate(RunArgs),
    /// Both policies side by side.
    Compare(RunArgs),
    /// Fit a service law to a mean and squared coefficient of variation.
    Fit {
        #[arg(long, allow_negative_numbers = true)]
        mean: f64,
        #[arg(long, allow_negative_numbers = true)]
        scv: f64,
    },
    /// Waiting-time cdfs with zero service and Erlang-5 preparation.
    Fig2(RunArgs),
    /// Normalised wait against the number of preparation phases.
    Fig3(RunArgs),
    /// Normalised wait against the mean preparation time.
    Fig4(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment spec (figure commands default to their preset).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for the simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Customers per replication; enables simulation.
    #[arg(long)]
    customers: Option<u64>,
    /// Independent replications; enables simulation.
    #[arg(long)]
    replications: Option<u32>,
}

const DEFAULT_CUSTOMERS: u64 = 1_000_000;

fn load(args: &RunArgs, fallback: Option<&str>) -> Result<ExperimentSpec, CliError> {
    match (&args.spec, fallback) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::spec(format!("cannot read {}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text)
        }
        (None, Some(text)) => ExperimentSpec::from_json(text),
        (None, None) => Err(CliError::spec("--spec is required")),
    }
}

fn apply_sim_flags(spec: &mut ExperimentSpec, args: &RunArgs, force: bool) {
    let wanted = force || args.customers.is_some() || args.replications.is_some() || args.seed.is_some();
    if !wanted {
        return;
    }
    let base = spec.sim.unwrap_or(SimSpec { customers: DEFAULT_CUSTOMERS, replications: 1, seed: 0 });
    spec.sim = Some(SimSpec {
        customers: args.customers.unwrap_or(base.customers),
        replications: args.replications.unwrap_or(base.replications),
        seed: args.seed.unwrap_or(base.seed),
    });
}

fn execute(
    args: &RunArgs,
    fallback: Option<&str>,
    policy: Option<PolicyChoice>,
    force_sim: bool,
) -> Result<(), CliError> {
    let mut spec = load(args, fallback)?;
    if let Some(p) = policy {
        spec.policy = p;
    }
    apply_sim_flags(&mut spec, args, force_sim);
    let out = run_with_threads(&spec, threads_from_env()?)?;
    for line in &out.diagnostics {
        eprintln!("{line}");
    }
    match args.out.as_ref().or(spec.output.as_ref()) {
        Some(path) => std::fs::write(path, out.csv)?,
        None => print!("{}", out.csv),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveAlt(a) => execute(&a, None, Some(PolicyChoice::Alternating), false),
        Command::SolveNa(a) => execute(&a, None, Some(PolicyChoice::Nonalternating), false),
        Command::Compare(a) => execute(&a, None, Some(PolicyChoice::Both), false),
        Command::Simulate(a) => execute(&a, None, None, true),
        Command::Fig2(a) => execute(&a, preset("fig2"), None, false),
        Command::Fig3(a) => execute(&a, preset("fig3"), None, false),
        Command::Fig4(a) => execute(&a, preset("fig4"), None, false),
        Command::Fit { mean, scv } => {
            let report = fit_report(mean, scv)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
