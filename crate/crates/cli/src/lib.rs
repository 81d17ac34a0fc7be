//! Command-line driver: sweeps over the exact oracle, bound checks, training
//! and sampling, all written as CSV (or JSON for checkpoints).

pub mod commands;
pub mod options;

use clap::{Parser, Subcommand};
use options::Options;
use std::ffi::OsString;
use std::io::Write;

#[derive(Parser, Debug)]
#[command(name = "flipwalk", version, about = "Sampling on the Boolean hypercube by flip-noise smoothing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Distance between the prior and the single-measurement denoiser output.
    DenoiseSweep(Options),
    /// Same for several independent measurements.
    MultiSweep(Options),
    /// Mixing time and stationary distance of both kernels over a step-size grid.
    MixingSweep(Options),
    /// Stationary law at η = 1/α, before and after denoising.
    StationaryDenoise(Options),
    /// Trajectory dump of one or more chains.
    Sample(Options),
    /// Train a denoiser and write its checkpoint.
    Learn(Options),
    /// Exact bound-check suite; exits with 2 if any check fails.
    CheckBounds(Options),
    /// Monte Carlo summary of sequential multi-measurement walk-jump sampling.
    SeqSample(Options),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::DenoiseSweep(_) => "denoise-sweep",
            Command::MultiSweep(_) => "multi-sweep",
            Command::MixingSweep(_) => "mixing-sweep",
            Command::StationaryDenoise(_) => "stationary-denoise",
            Command::Sample(_) => "sample",
            Command::Learn(_) => "learn",
            Command::CheckBounds(_) => "check-bounds",
            Command::SeqSample(_) => "seq-sample",
        }
    }

    fn options(&self) -> &Options {
        match self {
            Command::DenoiseSweep(o)
            | Command::MultiSweep(o)
            | Command::MixingSweep(o)
            | Command::StationaryDenoise(o)
            | Command::Sample(o)
            | Command::Learn(o)
            | Command::CheckBounds(o)
            | Command::SeqSample(o) => o,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] flipwalk::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0} bound check(s) failed")]
    BoundFailure(usize),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BOUND: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_CAP: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use flipwalk::Error as E;
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::BoundFailure(_) => EXIT_BOUND,
            CliError::Core(E::CapExceeded { .. }) => EXIT_CAP,
            CliError::Core(
                E::InvalidArgument(_)
                | E::Parse(_)
                | E::ZeroNoise
                | E::DimensionMismatch { .. }
                | E::NonFinite(_),
            ) => EXIT_INVALID,
            CliError::Core(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

/// Runs a parsed command, writing its output to `--out` or to `stdout`.
pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let opts = command.options().resolve(command.name())?;
    let mut buf = Vec::new();
    let outcome = commands::dispatch(command, &opts, &mut buf);
    // bound failures still produce their report
    if outcome.is_ok() || matches!(outcome, Err(CliError::BoundFailure(_))) {
        match &opts.out {
            Some(path) => std::fs::write(path, &buf)?,
            None => stdout.write_all(&buf)?,
        }
    }
    outcome
}

/// Parses `args` and runs them, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_INVALID;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
