mod config;
mod output;
mod rates;
mod switch;
mod validate;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numeric failure: {source}\nscenario: {scenario}")]
    Numeric { source: modesim::Error, scenario: String },
    #[error("{0}")]
    Io(String),
    #[error("{failed} of {total} checks failed")]
    Validation { failed: usize, total: usize },
}

impl From<modesim::Error> for CliError {
    fn from(e: modesim::Error) -> Self {
        match e {
            modesim::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Numeric {
                source: other,
                scenario: String::new(),
            },
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Validation { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Attach the scenario to numeric failures so the error is reproducible.
    pub fn with_scenario(self, canonical: &str) -> Self {
        match self {
            CliError::Numeric { source, .. } => CliError::Numeric {
                source,
                scenario: canonical.to_string(),
            },
            other => other,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "modesim",
    version,
    about = "SU/MU mode switching for the MIMO broadcast channel"
)]
struct Cli {
    /// Worker threads (default: all cores). MODESIM_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate curves over an SNR grid, closed form or Monte Carlo.
    Rates(rates::RatesArgs),
    /// SU/MU switching points of one scenario.
    Switch(switch::SwitchArgs),
    /// SU/MU decision over an SNR grid and a second scenario axis.
    Region(switch::RegionArgs),
    /// Run a built-in validation suite.
    Validate(validate::ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CellApprox {
    Auto,
    On,
    Off,
}

impl CellApprox {
    pub fn setting(self) -> Option<bool> {
        match self {
            CellApprox::Auto => None,
            CellApprox::On => Some(true),
            CellApprox::Off => Some(false),
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = match std::env::var("MODESIM_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("MODESIM_THREADS must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    let Some(n) = from_env.or(flag) else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Config("thread count must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Rates(args) => rates::run(args),
        Command::Switch(args) => switch::run_switch(args),
        Command::Region(args) => switch::run_region(args),
        Command::Validate(args) => validate::run(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
