//! The `aoi` command: simulations, sweeps, trace analysis, live and
//! emulated measurements, and policy runs. Data goes to files and stdout;
//! diagnostics go to stderr.

mod analyze;
mod error;
mod manifest;
mod measure;
mod model;
mod policy;
mod sim;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;
pub use manifest::{manifest_path, sidecar, write_atomic, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Age of Information toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a queue and write its packet trace.
    Sim(sim::SimArgs),
    /// Run one simulation per rate and write a table of age statistics.
    Sweep(sim::SweepArgs),
    /// Report age statistics of a trace file.
    Analyze(analyze::AnalyzeArgs),
    /// Echo server, sampler, and clock-offset estimation.
    Measure(measure::MeasureArgs),
    /// Run a sending policy against an emulated channel.
    Policy(policy::PolicyArgs),
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Config(e.render().to_string()));
        }
    };
    // recorded without the program name, so a manifest replays anywhere
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match cli.command {
        Command::Sim(a) => sim::cmd_sim(&a, &args),
        Command::Sweep(a) => sim::cmd_sweep(&a, &args),
        Command::Analyze(a) => analyze::cmd_analyze(&a),
        Command::Measure(a) => measure::cmd_measure(&a, &args),
        Command::Policy(a) => policy::cmd_policy(&a, &args),
        Command::Replay { manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .map_err(|e| CliError::config(format!("{}: {e}", manifest.display())))?;
            let m = RunManifest::parse(&text)?;
            if m.args.first().map(String::as_str) == Some("replay") {
                return Err(CliError::config("manifest records a replay"));
            }
            run(std::iter::once("aoi".to_string()).chain(m.args))
        }
    }
}

fn parse_dur(s: &str) -> Result<aoi_core::Nanos, String> {
    aoi_core::time::parse_duration(s).ok_or_else(|| format!("bad duration `{s}`"))
}

fn parse_signed_dur(s: &str) -> Result<i64, String> {
    aoi_core::time::parse_signed_duration(s).ok_or_else(|| format!("bad duration `{s}`"))
}

/// Prints `key=value` summary lines to stdout.
fn report(kv: &aoi_core::kv::KvDoc) {
    print!("{}", kv.render());
}
