use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use redbp_cli::{emit::emit_results, load_images, prepare_instances, run_cell, ScenarioConfig};

#[derive(Parser)]
#[command(name = "redbp", version, about = "LS-RED / BP-RED restoration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid-search every fidelity of a scenario and write curves, summary and images.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the numerical verification suite; exit code 0 iff every check passes.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a single (lambda, sigma) cell for debugging.
    Gridcell {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let results = thread_pool(workers)?.install(|| redbp_cli::run_scenario(&cfg))?;
            emit_results(&cfg, &results, &out)?;
            for r in &results {
                println!(
                    "{} {}: lambda {} sigma {} final average PSNR {:.3} dB ({:.1} s)",
                    r.scenario_id,
                    r.fidelity.label(),
                    r.lambda,
                    r.sigma,
                    r.final_avg_psnr(),
                    r.wall_clock_secs
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed } => {
            let records = redbp_cli::verify::run_verification(seed);
            let mut ok = true;
            for r in &records {
                println!("{}", serde_json::to_string(r)?);
                ok &= r.passed || r.informational;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Gridcell {
            config,
            lambda,
            sigma,
            out,
        } => {
            let cfg = load_config(&config, None)?;
            let images = load_images(&cfg)?;
            let instances = prepare_instances(&cfg, &images)?;
            let results = cfg
                .fidelities
                .iter()
                .map(|&f| run_cell(&cfg, &instances, f, lambda, sigma))
                .collect::<redbp_cli::Result<Vec<_>>>()?;
            for r in &results {
                for (k, p) in r.psnr_avg.iter().enumerate() {
                    println!("{},{},{}", r.fidelity.label(), k + 1, p);
                }
            }
            if let Some(dir) = out {
                emit_results(&cfg, &results, &dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
