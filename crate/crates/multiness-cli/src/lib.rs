//! Command-line layer over the multiplex latent space estimator: argument
//! parsing ([`cli`]), the text-file formats ([`io`]), and the subcommand
//! pipelines ([`commands`]).
//!
//! Exit codes: `0` success, `2` validation error, `3` numerical failure.

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;

pub use cli::Cli;
pub use error::CliError;

/// Dispatches a parsed invocation to its pipeline.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        cli::Command::Simulate(a) => commands::simulate(a),
        cli::Command::Fit(a) => commands::fit(a),
        cli::Command::Crossval(a) => commands::crossval(a),
        cli::Command::Embed(a) => commands::embed(a),
        cli::Command::Impute(a) => commands::impute(a),
        cli::Command::Report(a) => commands::report(a),
    }
}
