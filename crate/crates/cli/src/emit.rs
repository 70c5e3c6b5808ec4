//! Result files: `curves.csv`, `summary.json` and restored PGMs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::grid::{CellSummary, ExperimentResult};

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One header line plus one row per method and iteration. Floats use
/// Rust's shortest round-trip formatting, so the file is reproducible
/// byte for byte and `psnr_avg` re-averages exactly from the image columns.
pub fn curves_csv(results: &[ExperimentResult]) -> String {
    let n_images = results.iter().map(|r| r.runs.len()).max().unwrap_or(0);
    let mut out = String::from("method,scenario_id,iteration,psnr_avg");
    for i in 1..=n_images {
        let _ = write!(out, ",psnr_img{i}");
    }
    out.push_str(",update_norm\n");
    for res in results {
        let method = res.fidelity.label();
        for (k, avg) in res.psnr_avg.iter().enumerate() {
            let _ = write!(out, "{method},{},{},{avg}", res.scenario_id, k + 1);
            for i in 0..n_images {
                match res.runs.get(i).and_then(|r| r.trace.records.get(k)) {
                    Some(rec) => {
                        let _ = write!(out, ",{}", rec.psnr.unwrap_or(f64::NAN));
                    }
                    None => out.push(','),
                }
            }
            let _ = writeln!(out, ",{}", res.update_norm_avg[k]);
        }
    }
    out
}

#[derive(Serialize)]
struct MethodSummary<'a> {
    method: &'a str,
    lambda: f64,
    sigma: f64,
    step_size: f64,
    pinv_path: redbp_core::PinvPath,
    final_avg_psnr: f64,
    final_psnrs: Vec<ImagePsnr>,
    wall_clock_secs: f64,
    cells: &'a [CellSummary],
}

#[derive(Serialize)]
struct ImagePsnr {
    image: String,
    psnr: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario_id: &'a str,
    library_version: &'a str,
    seed: u64,
    config: &'a ScenarioConfig,
    warnings: Vec<String>,
    methods: Vec<MethodSummary<'a>>,
}

pub fn summary_json(cfg: &ScenarioConfig, results: &[ExperimentResult]) -> Result<String> {
    let methods = results
        .iter()
        .map(|r| MethodSummary {
            method: r.fidelity.label(),
            lambda: r.lambda,
            sigma: r.sigma,
            step_size: r.runs.first().map_or(f64::NAN, |x| x.trace.step_size),
            pinv_path: r.pinv_path,
            final_avg_psnr: r.final_avg_psnr(),
            final_psnrs: r
                .final_psnrs()
                .into_iter()
                .map(|(image, psnr)| ImagePsnr { image, psnr })
                .collect(),
            wall_clock_secs: r.wall_clock_secs,
            cells: &r.cells,
        })
        .collect();
    let summary = Summary {
        scenario_id: &cfg.id,
        library_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        warnings: cfg.warnings(),
        methods,
    };
    Ok(serde_json::to_string_pretty(&summary)?)
}

fn restored_file_name(res: &ExperimentResult, image: &str) -> String {
    let method = match res.fidelity {
        redbp_core::Fidelity::Ls => "ls",
        redbp_core::Fidelity::Bp => "bp",
    };
    format!("{}_{method}_{image}.pgm", res.scenario_id)
}

pub fn emit_results(cfg: &ScenarioConfig, results: &[ExperimentResult], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(CURVES_FILE), curves_csv(results))?;
    fs::write(out_dir.join(SUMMARY_FILE), summary_json(cfg, results)?)?;
    for res in results {
        for run in &res.runs {
            run.restored.save_pgm(out_dir.join(restored_file_name(res, &run.name)))?;
        }
    }
    Ok(())
}
