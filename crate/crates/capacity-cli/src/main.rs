use capacity_cli::{config::ExperimentConfig, run, selftest, CliError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Lattice capacities and derivative-formula sweeps.
#[derive(Parser)]
#[command(name = "capacity", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a single capacity for the configured set A.
    Cap {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a derivative-formula sweep and emit CSV.
    Sweep {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suites.
    Selftest {
        /// Smaller Monte Carlo sample counts.
        #[arg(long)]
        quick: bool,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Cap { config } => load(config).and_then(|cfg| run::run_cap(&cfg)).map(Some),
        Command::Sweep { config, out } => load(config)
            .and_then(|cfg| run::run_sweep(&cfg))
            .and_then(|doc| match out {
                Some(path) => {
                    std::fs::write(path, &doc)?;
                    Ok(None)
                }
                None => Ok(Some(doc)),
            }),
        Command::Selftest { quick } => {
            let report = selftest::run(*quick);
            for line in &report.lines {
                println!("{line}");
            }
            if report.all_passed {
                std::process::exit(0);
            }
            std::process::exit(2);
        }
    };
    match outcome {
        Ok(Some(text)) => print!("{text}"),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
