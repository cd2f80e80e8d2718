use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fpt2d::cli::{exit_code, run, write_outputs, Command, Format, RunConfig};
use fpt2d::Error;

/// Joint first-passage-time densities of bivariate diffusions.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides sim.seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(dir) => {
            eprintln!("wrote outputs to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(args: &Args) -> Result<PathBuf, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let (Some(seed), Some(sim)) = (args.seed, cfg.sim.as_mut()) {
        sim.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let files = run(&cfg, args.command)?;
    write_outputs(&cfg.output.dir, &files)?;
    Ok(cfg.output.dir.clone())
}
