use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use onebit_mimo::experiments::{manifest_path, run_experiment, validate_config, FigureId};
use onebit_mimo::mc::with_thread_cap;

/// Figure experiments for one-bit massive MIMO uplinks.
///
/// Set ONEBIT_MIMO_THREADS to cap the number of worker threads.
#[derive(Parser)]
#[command(name = "onebit-mimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config or manifest file.
    Run { config: PathBuf },
    /// List registered figure ids.
    ListFigures,
    /// Check a config file and print the resolved parameters.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListFigures => {
            for f in FigureId::ALL {
                println!("{:<16} {}", f.id(), f.description());
            }
            Ok(())
        }
        Command::Validate { config } => validate_config(&config).map(|spec| {
            for (k, v) in spec.resolved() {
                println!("{k} = {v}");
            }
        }),
        Command::Run { config } => validate_config(&config).and_then(|spec| {
            let table = with_thread_cap(|| run_experiment(&spec))?;
            eprintln!(
                "wrote {} rows to {} (manifest {})",
                table.rows.len(),
                spec.output.display(),
                manifest_path(&spec.output).display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
