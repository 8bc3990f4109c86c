use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use isotherm_core::harness::{load_scenario, run_scenario, RunOptions, RunReport};
use log::info;

#[derive(Parser)]
#[command(name = "isotherm-lab", version, about = "Run isotherm scenarios and their experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (JSON)
    scenario: PathBuf,
    /// Output directory; overrides the scenario's `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every snapshot as a binary grid dump with a JSON sidecar
    #[arg(long)]
    grid_dump: bool,
    /// Override the grid spacing
    #[arg(long = "h")]
    h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve only
    Solve(Common),
    /// Varadhan profile convergence
    Varadhan(Common),
    /// Localized heat content asymptotics
    HeatContent(Common),
    /// Sub/supersolution barriers and envelope
    Barriers(Common),
    /// Balance laws on spheres
    Balance(Common),
    /// Stationary surface detection and classification
    Detect(Common),
    /// Every experiment in the scenario
    Run(Common),
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ISOTHERM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("ISOTHERM_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<RunReport> {
    let (c, only, solve_only) = match cmd {
        Command::Solve(c) => (c, None, true),
        Command::Varadhan(c) => (c, Some("varadhan"), false),
        Command::HeatContent(c) => (c, Some("heat_content"), false),
        Command::Barriers(c) => (c, Some("barriers"), false),
        Command::Balance(c) => (c, Some("balance"), false),
        Command::Detect(c) => (c, Some("detect"), false),
        Command::Run(c) => (c, None, false),
    };
    let mut scenario =
        load_scenario(&c.scenario).with_context(|| format!("loading {}", c.scenario.display()))?;
    if let Some(h) = c.h {
        scenario.grid.h = h;
        scenario.validate().context("scenario with overridden h")?;
    }
    let opts = RunOptions {
        out_dir: c.out,
        grid_dump: c.grid_dump,
        only: only.map(String::from),
        solve_only,
    };
    info!("running `{}`", scenario.name);
    Ok(run_scenario(&scenario, &opts)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(report) => {
            for s in &report.solves {
                if let Some(e) = &s.error {
                    println!("solve {}: FAILED ({e})", s.key);
                }
            }
            for e in &report.experiments {
                let status = if e.pass { "PASS" } else { "FAIL" };
                let metrics: Vec<String> = e.metrics.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
                match &e.error {
                    Some(err) => println!("[{status}] {:02} {}: {err}", e.index, e.kind),
                    None => println!("[{status}] {:02} {} {}", e.index, e.kind, metrics.join(" ")),
                }
            }
            println!("{} ({:.1} s)", if report.pass { "PASS" } else { "FAIL" }, report.timing.total);
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
