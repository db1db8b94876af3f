//! `gigtail`: stationary distributions, tail asymptotes and simulation
//! for GI/G/1-type chains and BMAP-driven queues described in JSON.

mod commands;
mod exit;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use gigtail::model::ModelFile;

use commands::{Overrides, Settings};
use exit::CliError;
use report::{Emitter, Format};

#[derive(Parser)]
#[command(name = "gigtail", version, about = "Stationary distributions and subexponential tail asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Flags {
    /// Levels solved explicitly.
    #[arg(long, value_name = "K")]
    levels: Option<usize>,
    /// Tolerance on tail ratios.
    #[arg(long, value_name = "T")]
    tol: Option<f64>,
    /// Simulation seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Simulation events per replication.
    #[arg(long, value_name = "N")]
    events: Option<u64>,
    /// Simulation replications.
    #[arg(long, value_name = "R")]
    replications: Option<usize>,
    /// Directory for report files; stdout when absent.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model and report drift and stability.
    Validate {
        model: PathBuf,
        /// Print the parsed model back as JSON.
        #[arg(long)]
        echo: bool,
        #[command(flatten)]
        flags: Flags,
    },
    /// Stationary distribution per level and phase.
    Stationary {
        model: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Computed tail against the predicted asymptote.
    Asymptote {
        model: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Matrix-analytic, truncated and simulated level masses side by side.
    Compare {
        model: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Discrete-event simulation of a queue model.
    Simulate {
        model: PathBuf,
        /// Record the first N events of replication 0 in events.jsonl.
        #[arg(long, value_name = "N", default_value_t = 0)]
        log_events: usize,
        #[command(flatten)]
        flags: Flags,
    },
}

impl Command {
    fn parts(&self) -> (&PathBuf, &Flags) {
        match self {
            Command::Validate { model, flags, .. }
            | Command::Stationary { model, flags }
            | Command::Asymptote { model, flags }
            | Command::Compare { model, flags }
            | Command::Simulate { model, flags, .. } => (model, flags),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (path, flags) = cli.command.parts();
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read model {}: {e}", path.display())))?;
    let file = ModelFile::from_json(&text)?;
    let overrides = Overrides {
        levels: flags.levels,
        tol: flags.tol,
        seed: flags.seed,
        events: flags.events,
        replications: flags.replications,
    };
    let settings = Settings::resolve(&overrides, &file.options)?;
    let model = file.build()?;
    let em = Emitter { out: flags.out.clone(), format: flags.format };
    match &cli.command {
        Command::Validate { echo, .. } => commands::validate(&file, &model, &settings, *echo, &em),
        Command::Stationary { .. } => commands::stationary_cmd(&model, &settings, &em),
        Command::Asymptote { .. } => commands::asymptote(&model, &settings, &em),
        Command::Compare { .. } => commands::compare(&model, &settings, &em),
        Command::Simulate { log_events, .. } => commands::simulate(&model, &settings, *log_events, &em),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(exit::EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gigtail: {e}");
            e.exit_code()
        }
    }
}
