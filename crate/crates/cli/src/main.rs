//! `modspace`: runs and validates study configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modspace::study::{RunOptions, StudyConfig};
use modspace::Error;

#[derive(Parser)]
#[command(name = "modspace", version, about = "Batch runner for time-frequency norm studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its CSV report.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Multiplies every grid density.
        #[arg(long, default_value_t = 1)]
        resolution_scale: usize,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn report(e: &Error) -> ExitCode {
    let mut obj = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    if let Error::Config { pointer, .. } = e {
        obj["pointer"] = serde_json::json!(pointer);
    }
    eprintln!("{obj}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads, resolution_scale } => StudyConfig::load(&config).and_then(|c| {
            let opts = RunOptions { threads, resolution_scale };
            c.run(&out, opts).map(|p| println!("{}", p.display()))
        }),
        Command::Validate { config } => StudyConfig::load(&config).and_then(|c| {
            c.validate()?;
            println!("ok: {} study", c.kind);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
