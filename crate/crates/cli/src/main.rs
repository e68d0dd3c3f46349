use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use renormfock_core::config::{parse_config, ExperimentConfig};
use renormfock_core::suite::run_suite;
use renormfock_core::sweep::run_to_file;

#[derive(Parser, Debug)]
#[command(author, version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a sweep and write one CSV row per point.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "RENORMFOCK_THREADS", default_value_t = 1)]
        threads: usize,
        /// Overrides the solver seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the acceptance battery; exits nonzero if any criterion fails.
    Suite {
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    cfg.validate().with_context(|| format!("in {}", path.display()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.solver.seed = seed;
            }
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                bail!("no output path: pass --out or set `output` in the config");
            };
            let rows = run_to_file(&cfg, &out, threads)?;
            eprintln!("{} rows written to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::ValidateConfig { config } => {
            let cfg = load(&config)?;
            println!("{}: {} model, {} points", config.display(), cfg.model.name(), cfg.len());
            Ok(true)
        }
        Command::Suite { seed } => {
            let outcomes = run_suite(seed);
            for o in &outcomes {
                println!("{o}");
            }
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed} of {} criteria passed", outcomes.len());
            Ok(passed == outcomes.len())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
