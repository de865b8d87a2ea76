use clap::Parser;
use multiness_cli::{run, Cli, CliError};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(cli.threads).and_then(|()| run(&cli)) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

/// Applies `--threads`, falling back to the `MULTINESS_THREADS` variable;
/// with neither set the worker pool keeps its default size.
fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let requested = match flag {
        Some(0) => {
            return Err(CliError::Validation(
                "--threads must be at least 1".into(),
            ))
        }
        Some(t) => Some(t),
        None => match std::env::var("MULTINESS_THREADS") {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(t) if t >= 1 => Some(t),
                _ => {
                    return Err(CliError::Validation(format!(
                        "MULTINESS_THREADS: '{s}' is not a positive thread count"
                    )))
                }
            },
            Err(std::env::VarError::NotPresent) => None,
            Err(e) => {
                return Err(CliError::Validation(format!("MULTINESS_THREADS: {e}")))
            }
        },
    };
    if let Some(t) = requested {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| {
                CliError::Validation(format!("cannot configure {t} worker threads: {e}"))
            })?;
    }
    Ok(())
}
