//! Operator tooling for printer fault detection: corpus generation,
//! training, evaluation, live monitoring and spectrogram dumps.

pub mod commands;
pub mod data;
pub mod error;
pub mod monitor;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult, ExitStatus};

#[derive(Debug, Parser)]
#[command(
    name = "fdms",
    version,
    about = "Multimodal fault detection for FDM printers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    Simulate(commands::simulate::SimulateArgs),
    /// Train one modality's classifier on a corpus.
    Train(commands::train::TrainArgs),
    /// Score one or more models on a corpus; prints JSON.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Stream sensor data through the models and emit JSONL events.
    Monitor(commands::monitor::MonitorArgs),
    /// Dump spectrograms or spectra of a single input file.
    Inspect(commands::inspect::InspectArgs),
}

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Monitor(a) => commands::monitor::run(a),
        Command::Inspect(a) => commands::inspect::run(a),
    }
}

/// Parses arguments, runs the command and returns the process exit status.
/// Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage as i32
            } else {
                ExitStatus::Ok as i32
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitStatus::Ok as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.status() as i32
        }
    }
}
