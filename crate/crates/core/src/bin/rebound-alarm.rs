use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rebound_alarm::config::PipelineConfig;
use rebound_alarm::pipeline::{Pipeline, PipelineError};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rebound-alarm", version, about = "Negative-bubble rebound alarms from LPPL fits")]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Enumerate fit windows into windows.csv.
    Windows,
    /// Fit every window, caching results in fits.jsonl.
    FitAll,
    /// Detect rebounds, select informative parameters and extract features.
    Learn,
    /// Build the out-of-sample alarm index series.
    Predict,
    /// Error diagrams and Bayesian posteriors.
    Evaluate,
    /// Threshold trading strategy with random-strategy significance.
    Backtest,
    /// Summarize all finished stages into report.json.
    Report,
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .expect("thread pool is configured once");
    }
    let p = Pipeline::new(cfg)?;
    match cli.command {
        Command::Windows => print(&p.windows()?),
        Command::FitAll => print(&p.fit_all()?),
        Command::Learn => print(&p.learn()?),
        Command::Predict => print(&p.predict()?),
        Command::Evaluate => print(&p.evaluate()?),
        Command::Backtest => {
            let reports: Vec<_> = p
                .backtest()?
                .into_iter()
                .map(|(q, mut r)| {
                    r.trades.clear();
                    (q, r)
                })
                .collect();
            print(&reports)
        }
        Command::Report => print(&p.report()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
