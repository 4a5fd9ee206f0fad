//! Command-line front end: each subcommand writes its table or report plus a
//! run manifest that `ntk replay` can re-execute.

pub mod args;
pub mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::manifest::{manifest_path, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ntk_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// The command ran but could not produce a result.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_VALIDATION_FAILED,
            CliError::Core(ntk_core::Error::AllRatesDiverged) => EXIT_VALIDATION_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AngleCurve(_) => "angle-curve",
            Command::DepthSweep(_) => "depth-sweep",
            Command::McValidate(_) => "mc-validate",
            Command::TrainSweep(_) => "train-sweep",
            Command::Eig(_) => "eig",
            Command::Replay(_) => "replay",
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli, recorded) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VALIDATION_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, recorded: Vec<String>) -> Result<bool, CliError> {
    if let Command::Replay(replay) = &cli.command {
        let manifest = RunManifest::read(&replay.manifest)?;
        let argv = std::iter::once("ntk".to_string()).chain(manifest.argv.iter().cloned());
        let inner = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
        if matches!(inner.command, Command::Replay(_)) {
            return Err(CliError::Usage("manifest records another replay".into()));
        }
        return execute(inner, manifest.argv);
    }

    let threads = match cli.global.parallel {
        None => 1,
        Some(0) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let start = Instant::now();
    let outcome = pool.install(|| commands::dispatch(&cli.command, &cli.global))?;

    let parameters = serde_json::json!({ "arguments": &cli, "resolved": outcome.resolved });
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        argv: recorded,
        parameters,
        seed: cli.global.seed,
        derived_seeds: outcome.derived_seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outcome.outputs.clone(),
        threads,
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&manifest_path(&outcome.outputs[0]))?;
    Ok(outcome.passed)
}
