use std::path::PathBuf;
use std::process::ExitCode;

use cantorspec::runner::{run, Command, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cantorspec", version, about = "Spectral experiments for Schrödinger operators with substitution measure potentials")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment configuration file.
    #[arg(long, global = true, default_value = "experiment.conf")]
    config: PathBuf,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for the generator behind randomized hull samples.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the config, the decomposition property, aperiodicity and atoms.
    Validate,
    /// Lyapunov exponent estimates over the energy grid.
    LyapunovScan,
    /// Periodic-approximant cascade and gamma-zero scan.
    Spectrum,
    /// Uniformity of the cocycle over hull samples.
    Uniformity,
    /// Weyl m-functions at the configured points.
    Mfunction,
    /// Minimal cylinder frequency profile of the word.
    Boshernitzan,
    /// All of the above plus an aggregate report.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Validate => Command::Validate,
            Cmd::LyapunovScan => Command::LyapunovScan,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Uniformity => Command::Uniformity,
            Cmd::Mfunction => Command::Mfunction,
            Cmd::Boshernitzan => Command::Boshernitzan,
            Cmd::Report => Command::Report,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { out: cli.out, seed: cli.seed, threads: cli.threads };
    let command = Command::from(cli.command);
    match run(command, &cli.config, &opts) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: wrote {} files to {} (config {})",
                command.name(),
                outcome.manifest.files.len() + 1,
                opts.out.display(),
                &outcome.manifest.config_sha256[..12]
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
