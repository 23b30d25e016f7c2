use std::path::PathBuf;

use anyhow::{Context, Result};
use chebexpo_cli::report::{ensure_dir, write_json, RunInfo};
use chebexpo_cli::{adaptive, bench, diagnostics, experiment, formats, xva, RunConfig};
use chebexpo_core::simulation::simulate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "chebexpo",
    version,
    about = "Chebyshev-accelerated counterparty exposure experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (defaults to the BSM European reference setup).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate risk-factor paths and store them.
    Simulate {
        /// Also write a CSV copy.
        #[arg(long)]
        csv: bool,
    },
    /// Full vs accelerated exposure profiles with error table and speed-up.
    Exposure,
    /// Adaptive-degree runs over the configured path counts.
    Adaptive,
    /// CVA delta and MVA with analytic and Chebyshev deltas.
    Xva,
    /// Analytic example, planner, convergence and bound checks.
    Diagnostics,
    /// Per-call pricer vs interpolant timings.
    Bench,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Exposure => "exposure",
            Command::Adaptive => "adaptive",
            Command::Xva => "xva",
            Command::Diagnostics => "diagnostics",
            Command::Bench => "bench",
        }
    }
}

#[derive(Serialize)]
struct SimulateManifest {
    run: RunInfo,
    n: usize,
    m: usize,
    dim: usize,
    files: Vec<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let dir = cli
        .common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));

    match cli.command {
        Command::Simulate { csv } => {
            cfg.validate()?;
            let model = cfg.model_spec()?;
            let paths = simulate(&model, cfg.grid()?, cfg.n, cfg.simulation_measure, cfg.seed)?;
            ensure_dir(&dir)?;
            let mut files = vec!["paths.bin".to_string()];
            formats::save_pathset(&paths, &dir.join("paths.bin"))?;
            if csv {
                formats::save_pathset(&paths, &dir.join("paths.csv"))?;
                files.push("paths.csv".into());
            }
            write_json(
                &dir.join("manifest.json"),
                &SimulateManifest {
                    run: RunInfo::new(&cfg)?,
                    n: paths.n_paths,
                    m: paths.steps(),
                    dim: paths.dim,
                    files,
                },
            )?;
            println!(
                "{} paths x {} dates written to {}",
                paths.n_paths,
                paths.steps(),
                dir.display()
            );
        }
        Command::Exposure => {
            let r = experiment::run_experiment(&cfg, &dir)?;
            print!("{}", experiment::render_table(&r));
        }
        Command::Adaptive => {
            let r = adaptive::run_adaptive(&cfg, &dir)?;
            print!("{}", adaptive::render_sweep(&r));
        }
        Command::Xva => {
            let r = xva::run_xva(&cfg, &dir)?;
            print!("{}", xva::render_xva(&r));
        }
        Command::Diagnostics => {
            let r = diagnostics::run_diagnostics(&cfg, &dir)?;
            print!("{}", diagnostics::render_diagnostics(&r));
        }
        Command::Bench => {
            let r = bench::run_bench(&cfg, &dir)?;
            print!("{}", bench::render_bench(&r));
        }
    }
    eprintln!("outputs in {}", dir.display());
    Ok(())
}
