mod analyze;
mod config;
mod run;
mod scan;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    Config { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] dmet_core::DmetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Not converged, or some scan points failed.
    Soft,
}

#[derive(Parser)]
#[command(name = "dmet", version, about = "Multi-fragment density matrix embedding")]
struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one DMET calculation from a JSON configuration.
    Run { config: PathBuf },
    /// Run a parameter scan and assemble an equation-of-state table.
    Scan {
        config: PathBuf,
        /// Points run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Post-processing formulas.
    Analyze {
        #[command(subcommand)]
        task: analyze::Task,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DMET_LOG", "warn")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run::cmd_run(&config, cli.out.as_deref()),
        Command::Scan { config, jobs } => scan::cmd_scan(&config, cli.out.as_deref(), jobs),
        Command::Analyze { task } => analyze::cmd_analyze(&task, cli.out.as_deref()),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Soft) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
