//! `seqrec` — command-line front end for the simulation laboratory.
//!
//! Exit codes: 0 on success, 1 when the consistency assertion fails,
//! 2 on usage, config, or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use seqrec::config::{parse_config, ScenarioConfig};
use seqrec::estimator;
use seqrec::experiments;
use seqrec::fixture::parse_fixture;
use seqrec::report::{self, RunManifest, Table};
use seqrec::similarity::{penalized_similarity, sbar, SmoothingPsi};

#[derive(Parser)]
#[command(
    name = "seqrec",
    version,
    about = "Sequential collaborative-recommendation simulator"
)]
struct Cli {
    /// Freeze the manifest timestamp for byte-identical outputs.
    #[arg(long, global = true)]
    reproducible: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the query-vs-row similarity table for a snapshot fixture.
    Similarity {
        /// Snapshot fixture file.
        #[arg(long)]
        fixture: PathBuf,
        /// Penalty smoothing: identity or sqrt.
        #[arg(long, default_value = "identity")]
        psi: String,
    },
    /// Estimate the new user's target rating from a snapshot fixture.
    Estimate {
        /// Snapshot fixture file.
        #[arg(long)]
        fixture: PathBuf,
        /// Neighbor count.
        #[arg(long)]
        k: usize,
        /// Penalty smoothing: identity or sqrt.
        #[arg(long, default_value = "identity")]
        psi: String,
    },
    /// Compare closed-form non-corating probabilities against simulation.
    ValidateAlpha {
        /// Item count (>= 4).
        #[arg(long)]
        d: usize,
        /// Database time.
        #[arg(long)]
        n: usize,
        /// Simulation trials per user index.
        #[arg(long)]
        trials: usize,
        /// Simulation seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run the error experiment for a scenario config and write mae.csv,
    /// ratefit.csv and mae.dat.
    Rates {
        /// Scenario config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the error experiment and assert that the error shrinks from the
    /// smallest to the largest database size (exit 1 if it does not).
    Consistency {
        /// Scenario config file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print version and RNG algorithm.
    Version,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn timestamp(reproducible: bool) -> String {
    if reproducible {
        RunManifest::frozen_timestamp().to_string()
    } else {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("unix:{secs}")
    }
}

fn manifest(seed: u64, reproducible: bool, config: Option<&ScenarioConfig>) -> RunManifest {
    let command: Vec<String> = std::env::args().skip(1).collect();
    let mut manifest =
        RunManifest::new(seed, command.join(" ")).with_timestamp(timestamp(reproducible));
    if let Some(cfg) = config {
        manifest = manifest.with_config_lines(cfg.resolved_lines());
    }
    manifest
}

fn parse_psi(raw: &str) -> anyhow::Result<SmoothingPsi> {
    raw.parse::<SmoothingPsi>()
        .with_context(|| format!("--psi {raw}"))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Similarity { fixture, psi } => {
            let psi = parse_psi(&psi)?;
            let snapshot = parse_fixture(&fixture)?;
            let mut table = Table::new(&["row", "col", "sbar", "penalty", "s"]);
            for i in 1..=snapshot.n() {
                let row = snapshot.row(i);
                let p = snapshot.penalty(i);
                table.push(vec![
                    "0".into(),
                    i.to_string(),
                    report::fmt_f64(sbar(snapshot.query(), row)),
                    report::fmt_f64(p),
                    report::fmt_f64(penalized_similarity(snapshot.query(), row, p, psi)),
                ]);
            }
            print!(
                "{}",
                report::csv_string(&table, &manifest(0, cli.reproducible, None))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { fixture, k, psi } => {
            let psi = parse_psi(&psi)?;
            let snapshot = parse_fixture(&fixture)?;
            let result = estimator::estimate(&snapshot, k, psi)?;
            let mut table = Table::new(&[
                "record",
                "user",
                "sbar",
                "penalty",
                "similarity",
                "target",
                "value",
            ]);
            table.push(vec![
                "estimate".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                report::fmt_f64(result.value),
            ]);
            table.push(vec![
                "degenerate".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                result.degenerate_tag().into(),
            ]);
            for neighbor in &result.selection.neighbors {
                table.push(vec![
                    "neighbor".into(),
                    neighbor.user.to_string(),
                    report::fmt_f64(neighbor.sbar),
                    report::fmt_f64(neighbor.penalty),
                    report::fmt_f64(neighbor.similarity),
                    report::fmt_f64(snapshot.target(neighbor.user).unwrap_or(f64::NAN)),
                    String::new(),
                ]);
            }
            print!(
                "{}",
                report::csv_string(&table, &manifest(0, cli.reproducible, None))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateAlpha { d, n, trials, seed } => {
            let rows = experiments::validate_alpha(n, d, trials, seed)?;
            let table = report::alpha_table(&rows);
            print!(
                "{}",
                report::csv_string(&table, &manifest(seed, cli.reproducible, None))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates { config, out } => {
            let cfg = parse_config(&config)?;
            let manifest = manifest(cfg.seed, cli.reproducible, Some(&cfg));
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let table = experiments::run_mae(&cfg, &cfg.n_values, &cfg.schedule, cfg.trials)?;
            let mae = report::mae_table(&table);
            report::emit_csv(&mae, &manifest, out.join("mae.csv"))?;
            report::emit_dat(&mae, &manifest, out.join("mae.dat"))?;
            let fit = experiments::fit_rate(&table)?;
            report::emit_csv(
                &report::ratefit_table(&fit),
                &manifest,
                out.join("ratefit.csv"),
            )?;
            eprintln!(
                "wrote {}, slope {:.4} over n in [{}, {}]",
                out.join("mae.csv").display(),
                fit.slope,
                fit.n_range.0,
                fit.n_range.1
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Consistency { config } => {
            let cfg = parse_config(&config)?;
            let manifest = manifest(cfg.seed, cli.reproducible, Some(&cfg));
            let table = experiments::run_mae(&cfg, &cfg.n_values, &cfg.schedule, cfg.trials)?;
            let verdict = experiments::monotone_consistency(&table)?;
            let mut out = Table::new(&[
                "n_first",
                "mae_first",
                "n_last",
                "mae_last",
                "separation_sigmas",
                "holds",
            ]);
            out.push(vec![
                verdict.first.n.to_string(),
                report::fmt_f64(verdict.first.mae),
                verdict.last.n.to_string(),
                report::fmt_f64(verdict.last.mae),
                report::fmt_f64(verdict.separation_sigmas),
                verdict.holds.to_string(),
            ]);
            print!("{}", report::csv_string(&out, &manifest));
            if verdict.holds {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "consistency assertion failed: mae({}) = {} vs mae({}) = {} ({}σ)",
                    verdict.first.n,
                    verdict.first.mae,
                    verdict.last.n,
                    verdict.last.mae,
                    verdict.separation_sigmas
                );
                Ok(ExitCode::from(1))
            }
        }
        Command::Version => {
            println!(
                "seqrec {} (rng: {})",
                env!("CARGO_PKG_VERSION"),
                seqrec::rng::ALGORITHM_ID
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
