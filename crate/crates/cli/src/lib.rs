//! Reproduction harness for LS-RED vs BP-RED experiments: JSON scenario
//! configs, per-method `(lambda, sigma)` grid search, PSNR-vs-iteration
//! curves and the numerical verification suite.

pub mod config;
pub mod emit;
pub mod error;
pub mod grid;
pub mod scenario;
pub mod synthetic;
pub mod verify;

pub use config::{KernelSpec, ScenarioConfig, SyntheticSpec, Task};
pub use error::{ExperimentError, Result};
pub use grid::{grid_search, run_cell, CellStatus, CellSummary, ExperimentResult};
pub use scenario::{bicubic_upsample, build_scenario, load_images, prepare_instances, Instance};

/// Loads images, degrades them and grid-searches every configured fidelity.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ExperimentResult>> {
    let images = load_images(cfg)?;
    let instances = prepare_instances(cfg, &images)?;
    cfg.fidelities
        .iter()
        .map(|&f| grid_search(cfg, &instances, f))
        .collect()
}
