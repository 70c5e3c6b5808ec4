//! Hyper-parameter grid search over `(lambda, sigma)`.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use redbp_core::solver::solve_with_step;
use redbp_core::{Fidelity, Image, IterationTrace, PinvPath};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{ExperimentError, Result};
use crate::scenario::Instance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok { final_avg_psnr: f64 },
    Diverged { image: String, iteration: usize },
    Failed { image: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub lambda: f64,
    pub sigma: f64,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellSummary {
    pub fn score(&self) -> Option<f64> {
        match self.status {
            CellStatus::Ok { final_avg_psnr } if final_avg_psnr.is_finite() => Some(final_avg_psnr),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImageRun {
    pub name: String,
    pub restored: Image<f64>,
    pub trace: IterationTrace,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub scenario_id: String,
    pub fidelity: Fidelity,
    pub lambda: f64,
    pub sigma: f64,
    pub pinv_path: PinvPath,
    pub runs: Vec<ImageRun>,
    /// Mean over images of the per-iteration PSNR.
    pub psnr_avg: Vec<f64>,
    /// Mean over images of the per-iteration update norm.
    pub update_norm_avg: Vec<f64>,
    pub cells: Vec<CellSummary>,
    pub wall_clock_secs: f64,
}

impl ExperimentResult {
    pub fn final_avg_psnr(&self) -> f64 {
        *self.psnr_avg.last().expect("at least one iteration")
    }

    pub fn final_psnrs(&self) -> Vec<(String, f64)> {
        self.runs
            .iter()
            .map(|r| (r.name.clone(), r.trace.final_psnr().unwrap_or(f64::NAN)))
            .collect()
    }

    /// First 1-based iteration whose average PSNR reaches `target`.
    pub fn first_iteration_reaching(&self, target: f64) -> Option<usize> {
        self.psnr_avg.iter().position(|&p| p >= target).map(|i| i + 1)
    }
}

/// Mean of per-image curves, summed in image order.
pub fn average_curves(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / n)
        .collect()
}

fn solve_one(
    cfg: &ScenarioConfig,
    inst: &Instance,
    fidelity: Fidelity,
    lambda: f64,
    sigma: f64,
) -> redbp_core::Result<(Image<f64>, IterationTrace)> {
    let solver_cfg = inst.solver_config(cfg, fidelity, lambda, sigma);
    let mu = inst
        .step_size(cfg, fidelity, lambda)
        .map_err(|e| redbp_core::Error::InvalidParameter(e.to_string()))?;
    solve_with_step(
        &inst.y,
        &inst.scenario.op,
        &cfg.denoiser,
        &solver_cfg,
        mu,
        &inst.x0,
        Some(&inst.truth),
    )
}

/// Runs one `(lambda, sigma)` cell on every image.
pub fn run_cell(
    cfg: &ScenarioConfig,
    instances: &[Instance],
    fidelity: Fidelity,
    lambda: f64,
    sigma: f64,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    let runs = instances
        .par_iter()
        .map(|inst| {
            let (restored, trace) = solve_one(cfg, inst, fidelity, lambda, sigma)?;
            Ok(ImageRun {
                name: inst.name.clone(),
                restored,
                trace,
            })
        })
        .collect::<redbp_core::Result<Vec<_>>>()?;
    let psnr_curves: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.trace.records.iter().map(|x| x.psnr.unwrap_or(f64::NAN)).collect())
        .collect();
    let update_curves: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.trace.records.iter().map(|x| x.update_norm).collect())
        .collect();
    let psnr_avg = average_curves(&psnr_curves);
    let cell = CellSummary {
        lambda,
        sigma,
        status: CellStatus::Ok {
            final_avg_psnr: *psnr_avg.last().expect("iterations >= 1"),
        },
    };
    Ok(ExperimentResult {
        scenario_id: cfg.id.clone(),
        fidelity,
        lambda,
        sigma,
        pinv_path: runs[0].trace.pinv_path,
        update_norm_avg: average_curves(&update_curves),
        psnr_avg,
        runs,
        cells: vec![cell],
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// `true` if `a` should be preferred over `b`: higher score, then smaller
/// lambda, then smaller sigma.
pub fn better_cell(a: &CellSummary, b: &CellSummary) -> bool {
    match (a.score(), b.score()) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(sa), Some(sb)) => match sa.partial_cmp(&sb).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (a.lambda, a.sigma) < (b.lambda, b.sigma),
        },
    }
}

pub fn select_best(cells: &[CellSummary]) -> Option<&CellSummary> {
    cells
        .iter()
        .filter(|c| c.score().is_some())
        .fold(None, |best: Option<&CellSummary>, c| match best {
            Some(b) if !better_cell(c, b) => Some(b),
            _ => Some(c),
        })
}

fn evaluate_cell(
    cfg: &ScenarioConfig,
    instances: &[Instance],
    fidelity: Fidelity,
    lambda: f64,
    sigma: f64,
) -> CellSummary {
    let outcomes: Vec<_> = instances
        .par_iter()
        .map(|inst| solve_one(cfg, inst, fidelity, lambda, sigma).map(|(_, t)| t))
        .collect();
    let mut finals = Vec::with_capacity(instances.len());
    for (inst, outcome) in instances.iter().zip(outcomes) {
        match outcome {
            Ok(trace) => finals.push(trace.final_psnr().unwrap_or(f64::NAN)),
            Err(redbp_core::Error::Diverged { iteration }) => {
                return CellSummary {
                    lambda,
                    sigma,
                    status: CellStatus::Diverged {
                        image: inst.name.clone(),
                        iteration,
                    },
                }
            }
            Err(e) => {
                return CellSummary {
                    lambda,
                    sigma,
                    status: CellStatus::Failed {
                        image: inst.name.clone(),
                        message: e.to_string(),
                    },
                }
            }
        }
    }
    CellSummary {
        lambda,
        sigma,
        status: CellStatus::Ok {
            final_avg_psnr: finals.iter().sum::<f64>() / finals.len() as f64,
        },
    }
}

/// Evaluates every `(lambda, sigma)` cell on all images, picks the cell with
/// the best final average PSNR and re-runs it to collect restorations and
/// traces. Diverged or failed cells are kept in the table but never chosen.
pub fn grid_search(
    cfg: &ScenarioConfig,
    instances: &[Instance],
    fidelity: Fidelity,
) -> Result<ExperimentResult> {
    if instances.is_empty() {
        return Err(ExperimentError::Config("grid search needs at least one image".into()));
    }
    let start = Instant::now();
    let grid: Vec<(f64, f64)> = cfg
        .lambda_grid()
        .into_iter()
        .flat_map(|l| cfg.sigma_grid().into_iter().map(move |s| (l, s)))
        .collect();
    let cells: Vec<CellSummary> = grid
        .par_iter()
        .map(|&(l, s)| evaluate_cell(cfg, instances, fidelity, l, s))
        .collect();
    let best = select_best(&cells).ok_or_else(|| ExperimentError::AllCellsDiverged {
        scenario: cfg.id.clone(),
        method: fidelity.label().to_string(),
    })?;
    let mut result = run_cell(cfg, instances, fidelity, best.lambda, best.sigma)?;
    result.cells = cells;
    result.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(result)
}
