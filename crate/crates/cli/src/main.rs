mod config;
mod runner;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "netjam", version, about = "Packet traffic on growing networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override out_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override master_seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Rayon thread count (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

/// Exit 1 on config errors, 2 on runtime errors.
fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(msg) => {
                    eprintln!("error: {}: {msg}", config.display());
                    return ExitCode::from(1);
                }
            };
            if let Some(dir) = out {
                cfg.override_out_dir(dir.to_string_lossy().into_owned());
            }
            if let Some(s) = seed {
                cfg.override_master_seed(s);
            }
            if let Some(w) = workers {
                cfg.override_workers(w);
            }
            match runner::run_experiment(&cfg, &config) {
                Ok(files) => {
                    println!(
                        "{}: wrote {} file(s) to {}",
                        cfg.kind.name(),
                        files.len(),
                        cfg.out_dir
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({} experiment)", config.display(), cfg.kind.name());
                ExitCode::SUCCESS
            }
            Err(msg) => {
                eprintln!("error: {}: {msg}", config.display());
                ExitCode::from(1)
            }
        },
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    ExperimentConfig::parse(&text).map_err(|e| e.to_string())
}
