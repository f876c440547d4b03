use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wigs::data::Dgp;
use wigs::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "wigs",
    version,
    about = "Weighted improved Greedy Sampling benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method over every replication seed, then write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (0 uses every core); overrides the config.
        #[arg(long)]
        parallel: Option<usize>,
        /// Output directory; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset to CSV.
    Synth {
        #[arg(long, value_parser = parse_dgp)]
        dgp: Dgp,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute tables and plots from a finished run directory.
    Report {
        #[arg(long)]
        record: PathBuf,
        /// Where to write the report (defaults to the record directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the density-veto construction on one tuple and 1000 random ones.
    VetoDemo {
        #[arg(long, requires_all = ["u_star", "d_prime", "u_prime"])]
        d_star: Option<f64>,
        #[arg(long, requires = "d_star")]
        u_star: Option<f64>,
        #[arg(long, requires = "d_star")]
        d_prime: Option<f64>,
        #[arg(long, requires = "d_star")]
        u_prime: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_dgp(s: &str) -> Result<Dgp, String> {
    Dgp::parse(s)
        .ok_or_else(|| format!("unknown generator {s:?} (expected two_regime or three_regime)"))
}

fn run(cli: Cli) -> wigs::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            parallel,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(p) = parallel {
                cfg.experiment.parallelism = p;
            }
            if let Some(dir) = out {
                cfg.experiment.output_dir = dir;
            }
            let dir = cfg.experiment.output_dir.clone();
            let record = harness::run_experiment(&cfg, &dir)?;
            harness::emit_report(&record, &dir)?;
            println!(
                "{} traces written to {} ({} failed)",
                record.traces.len(),
                dir.display(),
                record.failures.len()
            );
            for f in &record.failures {
                eprintln!("failed: {} seed {}: {}", f.method, f.seed, f.error);
            }
            Ok(if record.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Synth { dgp, n, seed, out } => {
            let ds = dgp.sample(n, seed)?;
            ds.write_csv(&out)?;
            println!("wrote {n} rows from {} to {}", dgp.name(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { record, out } => {
            let rec = harness::load_record(&record)?;
            let dir = out.unwrap_or(record);
            for p in harness::emit_report(&rec, &dir)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VetoDemo {
            d_star,
            u_star,
            d_prime,
            u_prime,
            seed,
        } => {
            let tuple = match (d_star, u_star, d_prime, u_prime) {
                (Some(a), Some(b), Some(c), Some(d)) => Some((a, b, c, d)),
                _ => None,
            };
            let demo = harness::veto_demo(tuple, seed)?;
            for line in &demo.lines {
                println!("{line}");
            }
            println!("{}", if demo.passed() { "PASS" } else { "FAIL" });
            Ok(if demo.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
