use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilinear_steer::config::{run, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "bilinear-steer",
    version,
    about = "Steer sign patterns of a bilinear heat equation"
)]
struct Cli {
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } => config,
    };
    let cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let problems = cfg.validate();
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("error: {}: {p}", path.display());
        }
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Validate { .. } => {
            println!("ok");
            ExitCode::SUCCESS
        }
        Command::Run { .. } => {
            let out = cli
                .out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            match run(&cfg, &out) {
                Ok(o) => {
                    print!("{}", o.summary.to_text());
                    let failed = o.summary.failures();
                    if failed.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for key in failed {
                            eprintln!("fail\t{key}");
                        }
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
