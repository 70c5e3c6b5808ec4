//! JSON scenario configuration.

use std::path::{Path, PathBuf};

use redbp_core::{DenoiserSpec, Fidelity, StepRule};
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

pub const LAMBDA_RANGE: (f64, f64) = (0.005, 2.5);
pub const SIGMA_RANGE: (f64, f64) = (0.5, 20.0);
pub const DEFAULT_GRID_POINTS: usize = 16;
pub const DEFAULT_DEBLUR_ITERS: usize = 200;
pub const DEFAULT_SR_ITERS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Deblur,
    Sr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Uniform { size: usize },
    Gaussian { size: usize, std: f64 },
}

/// Procedurally generated test images (piecewise-constant shapes plus
/// texture), for runs without the classical test set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub count: usize,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub task: Task,
    pub kernel: KernelSpec,
    /// Subsampling factor, SR only.
    #[serde(default)]
    pub scale: Option<usize>,
    /// Observation noise std in intensity units.
    pub sigma_e: f64,
    #[serde(default = "DenoiserSpec::tv_default")]
    pub denoiser: DenoiserSpec,
    #[serde(default = "default_fidelities")]
    pub fidelities: Vec<Fidelity>,
    /// Step rule for LS-RED. BP-RED always uses `mu = 1`.
    #[serde(default = "default_step_rule")]
    pub step_rule: StepRule,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub images: Vec<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    /// Centre-crop loaded images to this square size.
    #[serde(default)]
    pub crop_size: Option<usize>,
    /// Border excluded from PSNR.
    #[serde(default)]
    pub crop_border: usize,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iters")]
    pub cg_max_iters: usize,
}

fn default_fidelities() -> Vec<Fidelity> {
    vec![Fidelity::Ls, Fidelity::Bp]
}

fn default_step_rule() -> StepRule {
    StepRule::LipschitzInverse
}

fn default_cg_tol() -> f64 {
    1e-6
}

fn default_cg_max_iters() -> usize {
    100
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log scale.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        // relative image paths are resolved against the config location
        if let Some(dir) = path.parent() {
            for p in &mut cfg.images {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid
            .clone()
            .unwrap_or_else(|| log_grid(LAMBDA_RANGE.0, LAMBDA_RANGE.1, DEFAULT_GRID_POINTS))
    }

    pub fn sigma_grid(&self) -> Vec<f64> {
        self.sigma_grid
            .clone()
            .unwrap_or_else(|| linear_grid(SIGMA_RANGE.0, SIGMA_RANGE.1, DEFAULT_GRID_POINTS))
    }

    pub fn iterations(&self) -> usize {
        self.iterations.unwrap_or(match self.task {
            Task::Deblur => DEFAULT_DEBLUR_ITERS,
            Task::Sr => DEFAULT_SR_ITERS,
        })
    }

    /// `true` for the SR settings reported in the reference experiments
    /// (scale 3 or 4).
    pub fn is_reference_sr_scale(&self) -> bool {
        matches!(self.scale, Some(3) | Some(4))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.id.is_empty() || self.id.contains(',') {
            return bad(format!("scenario id {:?} must be non-empty and comma-free", self.id));
        }
        if !(self.sigma_e >= 0.0) || !self.sigma_e.is_finite() {
            return bad(format!("sigma_e must be >= 0, got {}", self.sigma_e));
        }
        match (self.task, self.scale) {
            (Task::Sr, None) => return bad("SR scenarios need a scale".into()),
            (Task::Sr, Some(s)) if s < 2 => return bad(format!("SR scale must be >= 2, got {s}")),
            (Task::Deblur, Some(_)) => return bad("deblur scenarios take no scale".into()),
            _ => {}
        }
        let lambdas = self.lambda_grid();
        let sigmas = self.sigma_grid();
        if lambdas.is_empty() || sigmas.is_empty() {
            return bad("hyper-parameter grids must be non-empty".into());
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return bad(format!("lambda grid value {l} must be positive"));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return bad(format!("sigma grid value {s} must be positive"));
        }
        if self.fidelities.is_empty() {
            return bad("at least one fidelity is required".into());
        }
        if self.iterations() == 0 {
            return bad("iterations must be >= 1".into());
        }
        if self.images.is_empty() && self.synthetic.map_or(true, |s| s.count == 0) {
            return bad("no input images: give `images` or `synthetic`".into());
        }
        if self.step_rule == StepRule::RedPaperRule && self.sigma_e == 0.0 {
            return bad("the red_paper_rule step needs sigma_e > 0".into());
        }
        Ok(())
    }

    /// Warnings for settings outside the reference experiments' ranges.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.task == Task::Sr && !self.is_reference_sr_scale() {
            out.push(format!("scale {:?} is not one of the reference SR scales (3, 4)", self.scale));
        }
        let outside = |v: &f64, (lo, hi): (f64, f64)| *v < lo || *v > hi;
        if self.lambda_grid().iter().any(|v| outside(v, LAMBDA_RANGE)) {
            out.push(format!("lambda grid leaves {LAMBDA_RANGE:?}"));
        }
        if self.sigma_grid().iter().any(|v| outside(v, SIGMA_RANGE)) {
            out.push(format!("sigma grid leaves {SIGMA_RANGE:?}"));
        }
        out
    }
}
