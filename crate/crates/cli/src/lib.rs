//! Command-line front end: CSV ingestion, the fit/predict/cv/simulate subcommands and
//! result files.

pub mod args;
pub mod artifact;
pub mod commands;
pub mod table;

use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("not converged: {0}")]
    NonConvergence(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<ssvcqr::Error> for CliError {
    fn from(e: ssvcqr::Error) -> Self {
        match e {
            ssvcqr::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Predict(a) => commands::cmd_predict(a),
        Command::Cv(a) => commands::cmd_cv(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
    }
}
