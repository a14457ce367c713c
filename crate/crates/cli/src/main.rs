//! `efql`: train, compare and verify fuzzy Q(λ) agents.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use efql_core::agents::AgentKind;
use efql_core::harness::{self, ExperimentConfig, RunSummary};
use efql_core::oracle::verification_suite;
use efql_core::Error;

#[derive(Debug, Parser)]
#[command(name = "efql", version, about = "Fuzzy Q(lambda) learning with segment replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent on one or more seeds and write CSV/JSON (and SVG) artifacts.
    Train(TrainArgs),
    /// Train all three agents on shared seeds and write a combined summary and plot.
    Compare(CommonArgs),
    /// Check contraction and fixed-point properties of the fuzzified Bellman operator.
    Verify {
        /// Fixed-point stopping tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Seed for the random tables.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat JSON config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write learning_curve.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// enhanced-fql, nstep-fql or fuzzy-sarsa.
    #[arg(long)]
    agent: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

fn build_config(common: &CommonArgs, agent: Option<&str>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => harness::load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(name) = agent {
        cfg.agent = name
            .parse::<AgentKind>()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(n) = common.episodes {
        cfg.episodes = n;
    }
    if let Some(seeds) = &common.seed {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.emit_svg |= common.svg;
    cfg.validate()?;
    Ok(cfg)
}

fn print_runs(runs: &[RunSummary]) {
    println!("{:<14} {:>6} {:>16} {:>12} {:>12}", "agent", "seed", "avg_last_10pct", "conv_episode", "update_ms");
    for r in runs {
        let conv = r.convergence_episode.map_or("-".to_string(), |e| e.to_string());
        println!(
            "{:<14} {:>6} {:>16.3} {:>12} {:>12.4}",
            r.agent.name(),
            r.seed,
            r.avg_return_last_10pct,
            conv,
            r.mean_update_time_ms
        );
    }
}

fn finish(runs: &[RunSummary], cfg: &ExperimentConfig) -> Result<(), Error> {
    print_runs(runs);
    let written = harness::emit_artifacts(runs, cfg)?;
    println!("wrote {} files to {}", written.len(), cfg.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = build_config(&args.common, args.agent.as_deref())?;
            let runs = harness::run_experiment(&cfg)?;
            finish(&runs, &cfg)?;
            Ok(true)
        }
        Command::Compare(common) => {
            let mut cfg = build_config(&common, None)?;
            cfg.emit_svg = true;
            let runs = harness::run_comparison(&cfg)?;
            finish(&runs, &cfg)?;
            Ok(true)
        }
        Command::Verify { tol, seed } => {
            if !(tol > 0.0) {
                return Err(Error::Config(format!("--tol must be positive, got {tol}")));
            }
            let results = verification_suite(tol, seed)?;
            for p in &results {
                println!("{} {} ({})", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
            }
            Ok(results.iter().all(|p| p.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_divergence() { 2 } else { 1 })
        }
    }
}
