use std::path::PathBuf;
use std::process::ExitCode;

use caucb::cli::{self, CliError, ExperimentSource, RunArgs};
use caucb::AgentPolicy;
use clap::{ArgGroup, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "caucb", version, about = "Conflict-avoiding UCB in two-sided matching markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a market file and write the per-round CSV plus a JSON sidecar.
    Run {
        market: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 5000)]
        horizon: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Policy for every player not overridden by --policy.
        #[arg(long, default_value = "ca_ucb")]
        default_policy: AgentPolicy,
        /// Per-player policy, PLAYER=NAME (ca_ucb, oracle_rank, deviator, fixed:<arm>).
        #[arg(long = "policy", value_parser = parse_override)]
        policies: Vec<(usize, AgentPolicy)>,
        /// Round-1 attempts, comma separated arm indices.
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a preset or a JSON experiment spec.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "spec"])))]
    Experiment {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the stable matchings of a market file.
    Stable { market: PathBuf },
    /// Run presets (all by default), one subdirectory each.
    Repro {
        #[arg(long = "preset")]
        presets: Vec<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_override(s: &str) -> Result<(usize, AgentPolicy), String> {
    cli::parse_policy_override(s).map_err(|e| e.to_string())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { market, lambda, horizon, sigma, seed, default_policy, policies, initial, out } => {
            let outputs = cli::cmd_run(&RunArgs {
                market_file: market,
                lambda,
                horizon,
                sigma,
                seed,
                default_policy,
                policies,
                initial_attempts: initial,
                out,
            })?;
            eprintln!("wrote {} and {}", outputs.csv.display(), outputs.sidecar.display());
        }
        Command::Experiment { preset, spec, out_dir } => {
            let source = match (preset, spec) {
                (Some(p), _) => ExperimentSource::Preset(p),
                (None, Some(s)) => ExperimentSource::SpecFile(s),
                (None, None) => unreachable!("clap enforces the group"),
            };
            let manifest = cli::cmd_experiment(&source, &out_dir)?;
            eprintln!("wrote {}", manifest.display());
        }
        Command::Stable { market } => {
            let report = cli::cmd_stable(&market)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        }
        Command::Repro { presets, out_dir } => {
            for manifest in cli::cmd_repro(&presets, &out_dir)? {
                eprintln!("wrote {}", manifest.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
