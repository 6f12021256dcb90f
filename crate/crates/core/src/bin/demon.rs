use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use demon_core::harness::{
    run_scenario, write_atomic, ConfigLayer, Format, HarnessError, RunConfig, Scenario,
};

/// Monte Carlo harness for the one-particle engine and its demons.
#[derive(Parser)]
#[command(name = "demon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard demon over several ell/L values against the closed form.
    Sweep(Flags),
    /// Traced run of one policy (preset name or JSON file via --policy).
    Cycle(Flags),
    /// Undo-first demon with the particle on the unprofitable side.
    Livelock(Flags),
    /// Extract-first demon of choice.
    ExtractFirst(Flags),
    /// Delayed-erasure demon with a compressed record.
    Delayed(Flags),
    /// Entropy audit of a commuting and a non-commuting measurement.
    Quantum(Flags),
    /// Exhaustive search over small policies.
    PolicySearch(Flags),
}

#[derive(Args)]
struct Flags {
    /// Comma-separated ell/L values in (0, 1).
    #[arg(long = "ell-over-l", value_delimiter = ',')]
    ell_over_l: Option<Vec<f64>>,
    #[arg(long)]
    cycles: Option<u64>,
    /// Tape length for the delayed-erasure demon.
    #[arg(long)]
    n: Option<u64>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Steps per simulated policy in the search.
    #[arg(long)]
    horizon: Option<u64>,
    /// Control states in the search.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    policy: Option<String>,
    /// JSON file with any of the settings above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl Flags {
    fn into_layer(self) -> Result<ConfigLayer, HarnessError> {
        let file = match &self.config {
            Some(p) => ConfigLayer::from_json_file(p)?,
            None => ConfigLayer::default(),
        };
        let flags = ConfigLayer {
            ell_over_l: self.ell_over_l,
            cycles: self.cycles,
            n: self.n,
            seed: self.seed,
            seeds: self.seeds,
            out: self.out,
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Jsonl => Format::Jsonl,
            }),
            horizon: self.horizon,
            states: self.states,
            policy: self.policy,
        };
        Ok(file.overlay(flags))
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    let (scenario, flags) = match cli.command {
        Command::Sweep(f) => (Scenario::Sweep, f),
        Command::Cycle(f) => (Scenario::Cycle, f),
        Command::Livelock(f) => (Scenario::Livelock, f),
        Command::ExtractFirst(f) => (Scenario::ExtractFirst, f),
        Command::Delayed(f) => (Scenario::Delayed, f),
        Command::Quantum(f) => (Scenario::Quantum, f),
        Command::PolicySearch(f) => (Scenario::PolicySearch, f),
    };
    let layer = flags.into_layer()?;
    let cfg = RunConfig::resolve(scenario, layer)?;
    let outcome = run_scenario(&cfg)?;
    match &cfg.out {
        Some(path) => write_atomic(path, &outcome.bytes)?,
        None => std::io::stdout().write_all(&outcome.bytes)?,
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("demon: statistical check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("demon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
