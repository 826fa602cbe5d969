use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgecloud::experiments::{run_experiment, scenario_dir, Experiment, ExperimentError, RunContext, Sweep};

/// Resource allocation sweeps for the edge cloud.
#[derive(Parser)]
#[command(name = "edgecloud", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transmit power vs deadline for PSCA and the reference associations.
    Offload(RunArgs),
    /// Relaxed caching vs shortest-path delivery cost.
    Cache(RunArgs),
    /// Radio-map reconstruction from sparse samples.
    Rem(RunArgs),
    /// Expected connectivity loss vs power budget.
    Reliability(RunArgs),
    /// Per-edge perturbation centrality.
    Centrality(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter sweep, `name=v1,v2,...`.
    #[arg(long)]
    sweep: Option<String>,
}

fn configure_threads() -> Result<(), ExperimentError> {
    let threads = match std::env::var("EDGECLOUD_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| ExperimentError::Schema(format!("EDGECLOUD_THREADS must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| ExperimentError::Io(e.to_string()))
}

fn run(kind: Experiment, args: &RunArgs) -> Result<(), ExperimentError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| ExperimentError::Schema(format!("cannot read {}: {e}", args.scenario.display())))?;
    let sweep = args.sweep.as_deref().map(Sweep::parse).transpose()?;
    let ctx = RunContext::new(scenario_dir(&args.scenario), args.seed);
    let out = run_experiment(kind, &text, &ctx, sweep.as_ref())?;
    std::fs::write(&args.out, out.csv).map_err(|e| ExperimentError::Io(format!("cannot write {}: {e}", args.out.display())))?;
    if let Some(s) = out.summary {
        println!("{s}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Offload(a) => (Experiment::Offload, a),
        Command::Cache(a) => (Experiment::Cache, a),
        Command::Rem(a) => (Experiment::Rem, a),
        Command::Reliability(a) => (Experiment::Reliability, a),
        Command::Centrality(a) => (Experiment::Centrality, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edgecloud: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
