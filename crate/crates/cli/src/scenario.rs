//! Scenario construction: degradation operator, noise, initial iterate and
//! test-image loading.

use redbp_core::image::add_gaussian_noise;
use redbp_core::{
    BlurKernel, DegradationOperator, Fidelity, Image, NoiseSpec, PseudoinverseConfig,
    SolverConfig, StepRule,
};

use crate::config::{KernelSpec, ScenarioConfig, Task};
use crate::error::{ExperimentError, Result};
use crate::synthetic::synthetic_image;

/// Keys cubic-convolution parameter.
pub const BICUBIC_A: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initializer {
    /// `x0 = y`
    Observation,
    /// `x0 = bicubic(y)`
    Bicubic { scale: usize },
}

impl Initializer {
    pub fn initialize(&self, y: &Image<f64>) -> Image<f64> {
        match *self {
            Initializer::Observation => y.clone(),
            Initializer::Bicubic { scale } => bicubic_upsample(y, scale),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub op: DegradationOperator<f64>,
    pub noise: NoiseSpec,
    pub initializer: Initializer,
    pub pinv: PseudoinverseConfig,
}

pub fn make_kernel(spec: KernelSpec) -> Result<BlurKernel<f64>> {
    Ok(match spec {
        KernelSpec::Uniform { size } => BlurKernel::uniform(size)?,
        KernelSpec::Gaussian { size, std } => BlurKernel::gaussian(size, std)?,
    })
}

/// Builds the operator, base noise spec and initializer for images of size
/// `width x height`.
pub fn build_scenario(cfg: &ScenarioConfig, width: usize, height: usize) -> Result<Scenario> {
    let kernel = make_kernel(cfg.kernel)?;
    let (op, initializer) = match (cfg.task, cfg.scale) {
        (Task::Deblur, None) => (
            DegradationOperator::blur(kernel, width, height)?,
            Initializer::Observation,
        ),
        (Task::Sr, Some(scale)) => (
            DegradationOperator::blur_downsample(kernel, scale, width, height)?,
            Initializer::Bicubic { scale },
        ),
        (task, scale) => {
            return Err(ExperimentError::Config(format!(
                "invalid task/scale combination {task:?}/{scale:?}"
            )))
        }
    };
    let pinv = PseudoinverseConfig {
        cg_tol: cfg.cg_tol,
        cg_max_iters: cfg.cg_max_iters,
        ..PseudoinverseConfig::for_noise_level(cfg.sigma_e)
    };
    pinv.validate()?;
    Ok(Scenario {
        op,
        noise: NoiseSpec::new(cfg.sigma_e, cfg.seed)?,
        initializer,
        pinv,
    })
}

/// Noise seed for the `index`-th image, so every image gets its own stream
/// and both fidelities see the same observation.
pub fn image_noise_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Separable cubic-convolution upsampling (`a = -0.5`) with periodic
/// boundaries. Output sample `X` reads input position `X / scale`, matching
/// the subsampling phase of the degradation operator.
pub fn bicubic_upsample(y: &Image<f64>, scale: usize) -> Image<f64> {
    assert!(scale >= 1, "scale must be positive");
    let rows = upsample_rows(y, scale);
    transpose(&upsample_rows(&transpose(&rows), scale))
}

fn keys_weight(d: f64) -> f64 {
    let a = BICUBIC_A;
    let d = d.abs();
    if d <= 1.0 {
        (a + 2.0) * d.powi(3) - (a + 3.0) * d * d + 1.0
    } else if d < 2.0 {
        a * d.powi(3) - 5.0 * a * d * d + 8.0 * a * d - 4.0 * a
    } else {
        0.0
    }
}

fn upsample_rows(y: &Image<f64>, scale: usize) -> Image<f64> {
    let (w, h) = (y.width(), y.height());
    let weights: Vec<[f64; 4]> = (0..scale)
        .map(|p| {
            let t = p as f64 / scale as f64;
            [
                keys_weight(t + 1.0),
                keys_weight(t),
                keys_weight(1.0 - t),
                keys_weight(2.0 - t),
            ]
        })
        .collect();
    Image::from_fn(w * scale, h, |r, c| {
        let (base, phase) = ((c / scale) as isize, c % scale);
        weights[phase]
            .iter()
            .enumerate()
            .map(|(k, wt)| {
                let idx = (base + k as isize - 1).rem_euclid(w as isize) as usize;
                wt * y.get(r, idx)
            })
            .sum()
    })
}

fn transpose(x: &Image<f64>) -> Image<f64> {
    Image::from_fn(x.height(), x.width(), |r, c| x.get(c, r))
}

#[derive(Clone, Debug)]
pub struct NamedImage {
    pub name: String,
    pub image: Image<f64>,
}

/// One test image prepared for a scenario.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub truth: Image<f64>,
    pub y: Image<f64>,
    pub x0: Image<f64>,
    pub scenario: Scenario,
    /// `||A^T A||` by the power method; the LS Lipschitz constant.
    pub ls_lipschitz: f64,
}

impl Instance {
    pub fn step_size(&self, cfg: &ScenarioConfig, fidelity: Fidelity, lambda: f64) -> Result<f64> {
        Ok(match (fidelity, cfg.step_rule) {
            (Fidelity::Bp, _) => 1.0,
            (Fidelity::Ls, StepRule::LipschitzInverse) => 1.0 / self.ls_lipschitz,
            (Fidelity::Ls, StepRule::RedPaperRule) => redbp_core::solver::default_step_size(
                &self.scenario.op,
                Fidelity::Ls,
                cfg.sigma_e,
                lambda,
                StepRule::RedPaperRule,
            )?,
        })
    }

    pub fn solver_config(
        &self,
        cfg: &ScenarioConfig,
        fidelity: Fidelity,
        lambda: f64,
        sigma: f64,
    ) -> SolverConfig {
        SolverConfig {
            fidelity,
            lambda,
            sigma,
            sigma_e: cfg.sigma_e,
            step_rule: match fidelity {
                Fidelity::Ls => cfg.step_rule,
                Fidelity::Bp => StepRule::LipschitzInverse,
            },
            iterations: cfg.iterations(),
            pinv: self.scenario.pinv,
            psnr_border: cfg.crop_border,
        }
    }
}

fn center_crop(img: &Image<f64>, w: usize, h: usize) -> Result<Image<f64>> {
    let (r0, c0) = ((img.height() - h.min(img.height())) / 2, (img.width() - w.min(img.width())) / 2);
    Ok(img.crop(r0, c0, w, h)?)
}

/// Loads (or synthesises) the scenario's test images, applying the centre
/// crop and, for SR, trimming to a multiple of the scale.
pub fn load_images(cfg: &ScenarioConfig) -> Result<Vec<NamedImage>> {
    let mut out = Vec::new();
    for path in &cfg.images {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("image{}", out.len() + 1));
        out.push(NamedImage {
            name,
            image: Image::load_pgm(path)?,
        });
    }
    if let Some(s) = cfg.synthetic {
        for i in 0..s.count {
            out.push(NamedImage {
                name: format!("synthetic{}", i + 1),
                image: synthetic_image(s.size, s.seed.wrapping_add(i as u64)),
            });
        }
    }
    for item in &mut out {
        if let Some(size) = cfg.crop_size {
            if item.image.width() < size || item.image.height() < size {
                return Err(ExperimentError::Config(format!(
                    "{} is smaller than crop size {size}",
                    item.name
                )));
            }
            item.image = center_crop(&item.image, size, size)?;
        }
        if let Some(scale) = cfg.scale {
            let (w, h) = (item.image.width(), item.image.height());
            let (tw, th) = (w - w % scale, h - h % scale);
            if tw == 0 || th == 0 {
                return Err(ExperimentError::Config(format!(
                    "{} is smaller than the scale {scale}",
                    item.name
                )));
            }
            if (tw, th) != (w, h) {
                item.image = item.image.crop(0, 0, tw, th)?;
            }
        }
    }
    Ok(out)
}

/// Degrades every image: `y = A x + e`, `x0` from the initializer.
pub fn prepare_instances(cfg: &ScenarioConfig, images: &[NamedImage]) -> Result<Vec<Instance>> {
    images
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let mut scenario = build_scenario(cfg, item.image.width(), item.image.height())?;
            scenario.noise.seed = image_noise_seed(cfg.seed, i);
            let clean = scenario.op.apply(&item.image)?;
            let y = add_gaussian_noise(&clean, &scenario.noise);
            let x0 = scenario.initializer.initialize(&y);
            let est = scenario.op.operator_norm_sq(
                redbp_core::solver::POWER_ITERS,
                redbp_core::solver::POWER_TOL,
            );
            Ok(Instance {
                name: item.name.clone(),
                truth: item.image.clone(),
                y,
                x0,
                ls_lipschitz: est.value,
                scenario,
            })
        })
        .collect()
}
