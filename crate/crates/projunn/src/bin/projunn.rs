//! Command-line front end: `verify` runs the oracle self-check suite,
//! `train` runs a configured training job, `bench` measures the runtime
//! scaling of the update kernels.
//!
//! Exit codes: 0 success, 1 step/check failure, 2 config error.

use clap::{Parser, Subcommand};
use projunn::error::Error;
use projunn::trainer::{bench, bench_csv, init_thread_pool, train, verify, BenchOp, TrainConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "projunn", version, about = "Low-rank updates on the unitary manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every derived-oracle self-check and print one verdict per line.
    Verify {
        /// Write the machine-readable JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train from a TOML config file.
    Train {
        /// Flat key-value config mirroring the TrainConfig fields.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for train_log.csv and summary.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure runtime scaling of an update kernel over matrix sizes.
    Bench {
        /// One of: update_d, update_t, polar_dense.
        #[arg(long)]
        op: String,
        /// Comma-separated ascending sizes, e.g. 256,512,1024,2048.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Verify { out } => {
            let report = verify();
            for check in &report.checks {
                let verdict = if check.pass { "pass" } else { "FAIL" };
                println!("{verdict}  {:45} {}", check.name, check.detail);
            }
            println!(
                "{}/{} checks passed",
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len()
            );
            if let Some(path) = out {
                std::fs::write(&path, report.json() + "\n")?;
            }
            Ok(if report.all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Train { config, out, seed } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = TrainConfig::from_toml(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let report = train(&cfg)?;
            report.write_to_dir(&out)?;
            println!("{}", report.summary_json());
            match &report.summary.aborted {
                None => Ok(ExitCode::SUCCESS),
                Some(reason) => {
                    // Partial records are already flushed above.
                    eprintln!("step failure: {reason}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Bench { op, sizes, k, reps, out } => {
            let op: BenchOp = op.parse()?;
            let rows = bench(op, &sizes, k, reps)?;
            let csv = bench_csv(&rows);
            print!("{csv}");
            if let Some(path) = out {
                std::fs::write(&path, &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
