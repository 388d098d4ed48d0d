use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{parse_list, reference_text, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] waveguide_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

/// Numerical laboratory for Carleman weights, the heat-equation forward
/// problem on a waveguide, and stability of the time-dependent potential.
///
/// Exit status: 0 all verdicts pass, 1 a verdict failed, 2 bad
/// configuration or usage, 3 computation or i/o error.
#[derive(Debug, Parser)]
#[command(name = "waveguide-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration file (`waveguide-lab defaults` prints a complete one).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and fields.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the bounded-regime sweeps `lemmas.s_list` and `carleman.s_list`.
    #[arg(long = "sweep-s", global = true, value_name = "LIST")]
    sweep_s: Option<String>,
    /// Override `stability.epsilons`.
    #[arg(long, global = true, value_name = "LIST")]
    eps: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the forward problem and persist `u`.
    Forward,
    /// Check the weight-function assumptions in both regimes.
    CheckWeights,
    /// Verify the two weighted integral lemmas over `s` sweeps.
    VerifyLemmas,
    /// Verify both Carleman estimates and the conjugated-operator split.
    VerifyCarleman,
    /// Run the stability perturbation sweep.
    Stability,
    /// Print the reference configuration with every key documented.
    Defaults,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("missing --config PATH".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &cli.sweep_s {
        let s = parse_list(list).map_err(|e| CliError::Config(format!("--sweep-s: {e}")))?;
        cfg.lemmas.s_list = s.clone();
        cfg.carleman.s_list = s;
    }
    if let Some(list) = &cli.eps {
        let e = parse_list(list).map_err(|e| CliError::Config(format!("--eps: {e}")))?;
        let half = 0.5 * cfg.domain.final_time;
        if let Some(bad) = e.iter().find(|v| **v >= half) {
            return Err(CliError::Config(format!("--eps: {bad} is not below T/2 = {half}")));
        }
        cfg.stability.epsilons = e;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Command::Defaults = cli.command {
        print!("{}", reference_text());
        return Ok(true);
    }
    let cfg = load(cli)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Forward => commands::forward(&cfg, out),
        Command::CheckWeights => commands::check_weights(&cfg, out),
        Command::VerifyLemmas => commands::verify_lemmas(&cfg, out),
        Command::VerifyCarleman => commands::verify_carleman(&cfg, out),
        Command::Stability => commands::stability(&cfg, out),
        Command::Defaults => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("waveguide-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
