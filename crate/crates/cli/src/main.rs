//! `virialab` command-line runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use virialab::experiment::{load_config_with, run_experiment, Overrides};

#[derive(Parser)]
#[command(name = "virialab", about = "Virial pressure experiments for interacting Brownian particles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Seed override (takes precedence over the config and VIRIALAB_SEED).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sweep points; 0 runs single-threaded.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a config and print it with all defaults resolved.
    Validate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

fn fail(e: virialab::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("virialab {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Validate { config, seed, out } => {
            let overrides = Overrides {
                seed,
                output_dir: out,
            };
            match load_config_with(&config, &overrides) {
                Ok(c) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&c).expect("config serializes")
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let overrides = Overrides {
                seed,
                output_dir: out,
            };
            let config = match load_config_with(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_experiment(&config, threads) {
                Ok(summary) => {
                    for a in &summary.artifacts {
                        if a.exists() {
                            println!("{}", a.display());
                        }
                    }
                    if let Some(e) = &summary.error {
                        eprintln!("error: {e}");
                    }
                    ExitCode::from(summary.exit_code as u8)
                }
                Err(e) => fail(e),
            }
        }
    }
}
