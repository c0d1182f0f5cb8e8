use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scls_sim::run::{run, run_replicates, RunOptions};
use scls_sim::{inspect, load_model, parse_overrides, CliError};

#[derive(Parser)]
#[command(name = "scls-sim", version, about = "Simulate spatial CLS models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write trajectory.csv, frames.jsonl, report.txt
    /// and run.json.
    Run {
        model: PathBuf,
        /// Defaults to the model's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated minutes.
        #[arg(long, default_value_t = 600.0)]
        t_max: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Parameter override, `key=value`; repeatable.
        #[arg(long = "config", value_name = "KEY=VALUE")]
        config: Vec<String>,
        #[arg(long, overrides_with = "no_frames")]
        frames: bool,
        #[arg(long)]
        no_frames: bool,
        /// Run this many seeds, starting at `--seed`, into `seed-<n>/`.
        #[arg(long)]
        replicates: Option<usize>,
        /// Worker threads for `--replicates`; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Check a model and print a summary.
    Validate {
        model: PathBuf,
        #[arg(long = "config", value_name = "KEY=VALUE")]
        config: Vec<String>,
    },
    /// Compare combination counts with brute-force enumeration on the
    /// initial term.
    Oracle {
        model: PathBuf,
        /// Largest multiplicity kept for any element of the initial term.
        #[arg(long, default_value_t = 6)]
        max_elements: u64,
        #[arg(long = "config", value_name = "KEY=VALUE")]
        config: Vec<String>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            model,
            seed,
            t_max,
            out,
            config,
            frames: _,
            no_frames,
            replicates,
            threads,
        } => {
            if !(t_max >= 0.0) {
                return Err(CliError::Config(format!("--t-max must be >= 0, got {t_max}")));
            }
            let overrides = parse_overrides(&config)?;
            let m = load_model(&model, &overrides)?;
            let opts = RunOptions {
                seed,
                t_max,
                frames: !no_frames,
                config: overrides,
                model_path: model.display().to_string(),
            };
            let records = match replicates {
                Some(n) => run_replicates(&m, &opts, n, threads, &out)?,
                None => vec![run(&m, &opts, &out)?],
            };
            for r in &records {
                println!("{}", r.summary());
                for w in &r.waiting {
                    eprintln!(
                        "seed {}: cell {} holds {} but its checkpoint is not met",
                        r.seed, w.cell, w.marker
                    );
                }
            }
            Ok(())
        }
        Command::Validate { model, config } => {
            let m = load_model(&model, &parse_overrides(&config)?)?;
            print!("{}", inspect::validate(&m)?);
            Ok(())
        }
        Command::Oracle {
            model,
            max_elements,
            config,
            inject_fault,
        } => {
            let m = load_model(&model, &parse_overrides(&config)?)?;
            let report = inspect::oracle(&m, max_elements, inject_fault)?;
            print!("{}", report.text);
            if report.mismatches > 0 {
                return Err(CliError::Mismatch(format!(
                    "{} oracle mismatches",
                    report.mismatches
                )));
            }
            Ok(())
        }
    }
}
