use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tritrain::experiment::{self, Command, ExperimentConfig, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(
    name = "tritrain",
    version,
    about = "Rating prediction from missing-not-at-random feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set n_seeds=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Load a dataset, write canonical splits and a provenance report.
    Ingest,
    /// Train and evaluate every configured method over `n_seeds` runs.
    Run,
    /// Random hyperparameter search on the validation split.
    Sweep,
    /// Check both generalization bounds on a synthetic instance.
    Verify,
    /// Propensity skewness versus accuracy on MovieLens.
    Rq1,
    /// Print every config key with its default.
    Keys,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let command = match cli.command {
        Cmd::Ingest => Command::Ingest,
        Cmd::Run => Command::Run,
        Cmd::Sweep => Command::Sweep,
        Cmd::Verify => Command::Verify,
        Cmd::Rq1 => Command::Rq1,
        Cmd::Keys => {
            print!("{}", ExperimentConfig::default().to_text());
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match ExperimentConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(experiment::exit_code(&e) as u8);
        }
    };
    match experiment::execute(command, &cfg) {
        Ok(report) => {
            print!("{}", report.summary);
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
