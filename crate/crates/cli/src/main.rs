use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kadsim::harness::{self, catalog, emit, ScenarioConfig};

#[derive(Parser)]
#[command(name = "kadsim", version, about = "Kademlia lookup-latency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write CSV, JSON and SVG outputs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a catalog scenario over seeds 1..=k and report per-strategy medians.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Replay the first `window` rounds at the end of the run and compare
    /// the two latency histograms.
    ReplayHistogram {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[arg(long, default_value = "runs/replay")]
        out: PathBuf,
    },
    /// List catalog scenarios, or print one as a config file.
    Scenarios { name: Option<String> },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = harness::simulate(&cfg, &out)
                .with_context(|| format!("running {}", config.display()))?;
            for s in &summary.strategies {
                println!(
                    "{:<8} queries {:>9}  mean {:>9.1}  p90 {:>9.1}  success {:.3}",
                    s.strategy,
                    s.queries,
                    s.mean.unwrap_or(f64::NAN),
                    s.p90.unwrap_or(f64::NAN),
                    s.successes as f64 / s.queries.max(1) as f64
                );
            }
            println!("outputs in {}", out.display());
        }
        Command::Compare {
            scenario,
            seeds,
            out,
        } => {
            let cfg = catalog::scenario(&scenario)?;
            let seeds: Vec<u64> = (1..=seeds).collect();
            let report = harness::compare(&cfg, &seeds)?;
            let dir = out.join(&scenario);
            emit::write_compare(&report, &dir)?;
            println!(
                "{:<8} {:>14} {:>18}",
                "strategy", "median mean", "median converged"
            );
            for row in &report.rows {
                println!(
                    "{:<8} {:>14.1} {:>18.1}",
                    row.strategy,
                    row.median_mean.unwrap_or(f64::NAN),
                    row.median_converged.unwrap_or(f64::NAN)
                );
            }
            println!("report in {}", dir.join("compare.json").display());
        }
        Command::ReplayHistogram {
            config,
            window,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let hists = harness::before_after_histogram(&cfg, window)?;
            emit::write_histograms(&hists, &out)?;
            for h in &hists {
                println!(
                    "{:<8} p90 first {:>9.1}  last {:>9.1}  ratio {:.3}",
                    h.strategy, h.p90_first, h.p90_last, h.ratio
                );
            }
            println!("histograms in {}", out.display());
        }
        Command::Scenarios { name: None } => {
            for (name, about) in catalog::NAMES {
                println!("{name:<28} {about}");
            }
        }
        Command::Scenarios { name: Some(name) } => {
            print!("{}", catalog::scenario(&name)?.to_toml());
        }
    }
    Ok(())
}
