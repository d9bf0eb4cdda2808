use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dada::harness::{parse_config, run_ablations, run_experiment, sweep_m, write_datasets, RunConfig};

#[derive(Parser)]
#[command(name = "dada", about = "Domain adaptation with generated pseudo domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train `repeat` seeds and write metrics and a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `--key value` overrides of config keys.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Repeat `run` for each number of pseudo domains.
    SweepM {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "m", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run the four ablation arms.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Write the datasets only.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn load(config: &Option<PathBuf>, overrides: &[String]) -> dada::Result<RunConfig> {
    let text = match config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}

fn main_inner(cli: Cli) -> dada::Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let (summary, _) = run_experiment(&cfg)?;
            print!("{}", summary.to_tsv());
        }
        Command::SweepM { config, m, overrides } => {
            let cfg = load(&config, &overrides)?;
            for (m, s) in sweep_m(&cfg, &m)? {
                let a = s.accuracy();
                println!("m={m}\t{:.4}\t{:.4}", a.mean, a.std);
            }
        }
        Command::Ablate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            for (arm, s) in run_ablations(&cfg)? {
                let a = s.accuracy();
                println!("{arm}\t{:.4}\t{:.4}", a.mean, a.std);
            }
        }
        Command::GenData { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let dir = write_datasets(&cfg)?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
