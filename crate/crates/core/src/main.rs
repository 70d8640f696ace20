use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qkinetic::cli::{self, config};

#[derive(Parser)]
#[command(name = "qkinetic", version, about = "Cumulant-series solutions of the quantum BBGKY hierarchy and the generalized kinetic equation")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads (0: one per core); overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Report path; overrides the config. `-` writes to standard output.
        #[arg(long)]
        output: Option<String>,
    },
    /// Run the invariant suite on the bundled default model.
    Selftest {
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Print the bundled default config.
    PrintDefaultConfig,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: Args) -> Result<bool, Box<dyn std::error::Error>> {
    let (mut cfg, workers, output) = match args.command {
        Cmd::PrintDefaultConfig => {
            print!("{}", config::DEFAULT_CONFIG);
            return Ok(true);
        }
        Cmd::Run { config, workers, output } => {
            let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            (config::parse(&text)?, workers, output)
        }
        Cmd::Selftest { workers, output } => {
            let mut c = config::default_config();
            c.command = config::Command::Selftest;
            (c, workers, output)
        }
    };
    if let Some(o) = output {
        cfg.output_path = Some(o);
    }
    let workers = workers.unwrap_or(cfg.workers);
    let path = cfg.output_path.clone();
    let outcome = cli::run(cfg, workers)?;
    match path.as_deref() {
        None | Some("-") => print!("{}", outcome.text),
        Some(p) => fs::write(p, &outcome.text).map_err(|e| format!("{p}: {e}"))?,
    }
    Ok(outcome.passed)
}
