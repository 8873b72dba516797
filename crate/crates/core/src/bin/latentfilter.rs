//! Command-line front end of the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latentfilter::harness::{self, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "latentfilter", version, about = "Nonlinear-filtering experiments on SDE generative models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Root seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the config (default: `runs/<experiment>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Built-in reference scenarios.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
}

#[derive(Subcommand)]
enum ScenariosCommand {
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out, threads, no_plots } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(n) = threads {
                if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                    eprintln!("--threads: cannot start a pool of {n} threads");
                    return ExitCode::from(2);
                }
            }
            let out = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.name()));
            match harness::run(&cfg, &out, RunOptions { plots: !no_plots }) {
                Ok(m) => {
                    println!("{}: {} files in {} ({:.1} s)", m.experiment, m.outputs.len(), out.display(), m.wall_clock_seconds);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { config } => {
            let problems = harness::validate_file(&config);
            if problems.is_empty() {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            } else {
                for p in &problems {
                    println!("{p}");
                }
                ExitCode::from(2)
            }
        }
        Command::Scenarios { command: ScenariosCommand::List } => {
            for b in harness::builtin_scenarios() {
                println!("{:<16} {}", b.name, b.description);
            }
            ExitCode::SUCCESS
        }
    }
}
