use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use eflags_channel::mitigation::Gadget;
use eflags_sim::{execute, parse_grid, CliError, Job, Overrides, RunManifest, SweepParam};

/// Simulated EFLAGS timing channel: leak, sweep, mitigate, analyze.
#[derive(Debug, Parser)]
#[command(name = "eflags-sim", version)]
struct Cli {
    /// TOML config with `micro.*`, `attack.*` and `victim.*` keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `micro.rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `attack.passes`.
    #[arg(long, global = true)]
    passes: Option<usize>,
    /// Independent experiments for accuracy estimates.
    #[arg(long, global = true)]
    experiments: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leak the victim's secret and report the success rate.
    Leak,
    /// Sweep one parameter: delay, revert_stall_window, jitter or passes.
    Sweep {
        param: SweepParam,
        /// `a..b`, `a..=b` or a comma-separated list.
        #[arg(long)]
        grid: String,
    },
    /// Compare accuracy and signal with and without a gadget.
    Mitigate {
        /// delay[:N], lahf_sahf, pushf_popf or hardware_off.
        #[arg(long)]
        gadget: Gadget,
    },
    /// Recompute histograms and decoded bytes from a stored passes.csv.
    Analyze { input: PathBuf },
    /// Re-run a manifest into `--out`.
    Replay { manifest: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let manifest = match cli.command {
        Command::Replay { manifest } => {
            let mut m = RunManifest::load(&manifest)?;
            m.out_dir = cli.out;
            m
        }
        command => {
            let job = match command {
                Command::Leak => Job::Leak,
                Command::Sweep { param, grid } => Job::Sweep {
                    param,
                    grid: parse_grid(&grid)?,
                },
                Command::Mitigate { gadget } => Job::Mitigate { gadget },
                Command::Analyze { input } => Job::Analyze { input },
                Command::Replay { .. } => unreachable!(),
            };
            let opts = Overrides {
                config: cli.config,
                seed: cli.seed,
                passes: cli.passes,
                experiments: cli.experiments,
                out: cli.out,
            };
            RunManifest::resolve(job, &opts)?
        }
    };
    execute(&manifest, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
