//! The `csuv` command-line tool.
//!
//! Subcommands:
//!
//! * `fit` runs the ensemble on a CSV file and writes the plot bundle and a
//!   text report,
//! * `simulate` runs a simulation study described by a TOML file,
//! * `generate` writes a simulated dataset as CSV,
//! * `serve` serves a bundle and the plot's static files over local HTTP.
//!
//! Bad input (unreadable CSV, invalid flags or config, busy port) exits
//! with status 2; any other failure with status 1.

pub mod args;
pub mod data;
pub mod experiment;
pub mod fit;
pub mod generate;
pub mod serve;

use std::fmt;

use anyhow::Result;

pub use args::{Cli, Command};

/// A failure caused by the user's input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// Shorthand for an [`InputError`] wrapped in `anyhow`.
pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<InputError>()) {
        2
    } else {
        1
    }
}

/// Runs `f` on a rayon pool with `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match jobs {
        Some(0) => return Err(input_error("--jobs must be at least 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => fit::cmd_fit(&a).map(|_| ()),
        Command::Simulate(a) => experiment::cmd_simulate(&a).map(|_| ()),
        Command::Generate(a) => generate::cmd_generate(&a),
        Command::Serve(a) => serve::cmd_serve(&a),
    }
}
