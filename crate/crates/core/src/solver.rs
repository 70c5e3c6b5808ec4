//! LS-RED and BP-RED gradient iterations.
//!
//! Both schemes share the update
//!
//! ```text
//! x_{k+1} = x_k - mu * ( grad_fidelity(x_k) + lambda * (x_k - D(x_k; sigma)) )
//! ```
//!
//! where the fidelity gradient is `A^T (A x - y)` for least squares and
//! `A^+ (A x - y)` for back-projection.

use serde::{Deserialize, Serialize};

use crate::denoise::DenoiserSpec;
use crate::error::{Error, Result};
use crate::image::{psnr_cropped, Image};
use crate::operators::{DegradationOperator, OperatorKind, PseudoinverseConfig};
use crate::scalar::Scalar;

/// Power-method budget used for the least-squares Lipschitz constant.
pub const POWER_ITERS: usize = 1000;
pub const POWER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// `||y - A x||^2 / 2`
    Ls,
    /// `||A^+ (y - A x)||^2 / 2`
    Bp,
}

impl Fidelity {
    pub fn label(self) -> &'static str {
        match self {
            Fidelity::Ls => "LS-RED",
            Fidelity::Bp => "BP-RED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `1 / L` with `L` the Lipschitz constant of the fidelity gradient.
    LipschitzInverse,
    /// `2 / (1 / sigma_e^2 + lambda)`, least squares with noisy data only.
    RedPaperRule,
}

/// Which route computed `A^+` during a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinvPath {
    None,
    Fft,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub fidelity: Fidelity,
    /// Regularisation weight.
    pub lambda: f64,
    /// Noise level handed to the denoiser. Not the observation noise.
    pub sigma: f64,
    /// Observation noise std, only read by [`StepRule::RedPaperRule`].
    #[serde(default)]
    pub sigma_e: f64,
    pub step_rule: StepRule,
    pub iterations: usize,
    #[serde(default)]
    pub pinv: PseudoinverseConfig,
    /// Border excluded from the traced PSNR.
    #[serde(default)]
    pub psnr_border: usize,
}

impl SolverConfig {
    pub fn new(fidelity: Fidelity, lambda: f64, sigma: f64, iterations: usize) -> Self {
        Self {
            fidelity,
            lambda,
            sigma,
            sigma_e: 0.0,
            step_rule: StepRule::LipschitzInverse,
            iterations,
            pinv: PseudoinverseConfig::default(),
            psnr_border: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        self.pinv.validate()
    }

    /// The `A^+` route this configuration takes on `op`.
    pub fn pinv_path<T: Scalar>(&self, op: &DegradationOperator<T>) -> PinvPath {
        match (self.fidelity, op.kind()) {
            (Fidelity::Ls, _) => PinvPath::None,
            (Fidelity::Bp, OperatorKind::Blur) => PinvPath::Fft,
            (Fidelity::Bp, OperatorKind::BlurDownsample { .. }) => PinvPath::Cg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based: the record describes `x_k` after `k` updates.
    pub iteration: usize,
    pub psnr: Option<f64>,
    pub update_norm: f64,
    pub fidelity_grad_norm: f64,
    pub red_grad_norm: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub fidelity: Fidelity,
    pub step_size: f64,
    pub pinv_path: PinvPath,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn final_psnr(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.psnr)
    }

    pub fn psnr_curve(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.psnr).collect()
    }
}

/// `g_RED(x) = x - D(x; sigma)`
pub fn red_gradient<T: Scalar>(x: &Image<T>, denoiser: &DenoiserSpec, sigma: T) -> Result<Image<T>> {
    Ok(x.sub(&denoiser.denoise(x, sigma)?))
}

/// `A^T (A x - y)` (LS) or `A^+ (A x - y)` (BP).
pub fn fidelity_gradient<T: Scalar>(
    op: &DegradationOperator<T>,
    x: &Image<T>,
    y: &Image<T>,
    fidelity: Fidelity,
    pinv: &PseudoinverseConfig,
) -> Result<Image<T>> {
    Ok(fidelity_gradient_counted(op, x, y, fidelity, pinv)?.0)
}

fn fidelity_gradient_counted<T: Scalar>(
    op: &DegradationOperator<T>,
    x: &Image<T>,
    y: &Image<T>,
    fidelity: Fidelity,
    pinv: &PseudoinverseConfig,
) -> Result<(Image<T>, usize)> {
    let (ow, oh) = op.output_dims();
    y.check_dims(ow, oh)?;
    let residual = op.apply(x)?.sub(y);
    match fidelity {
        Fidelity::Ls => Ok((op.apply_adjoint(&residual)?, 0)),
        Fidelity::Bp => op.apply_pseudoinverse_counted(&residual, pinv),
    }
}

/// Default step size `mu` for a fidelity / rule pair.
///
/// `LipschitzInverse` gives 1 for BP (`A^+ A` is a projection) and
/// `1 / ||A^T A||` for LS, the norm estimated by the power method.
pub fn default_step_size<T: Scalar>(
    op: &DegradationOperator<T>,
    fidelity: Fidelity,
    sigma_e: f64,
    lambda: f64,
    rule: StepRule,
) -> Result<f64> {
    match (rule, fidelity) {
        (StepRule::LipschitzInverse, Fidelity::Bp) => Ok(1.0),
        (StepRule::LipschitzInverse, Fidelity::Ls) => {
            let est = op.operator_norm_sq(POWER_ITERS, POWER_TOL);
            let l = est.value.as_f64();
            if !(l > 0.0) {
                return Err(Error::InvalidParameter(
                    "operator has zero norm; no Lipschitz step exists".into(),
                ));
            }
            Ok(1.0 / l)
        }
        (StepRule::RedPaperRule, Fidelity::Bp) => Err(Error::InvalidParameter(
            "the 2/(1/sigma_e^2 + lambda) rule applies to LS-RED only".into(),
        )),
        (StepRule::RedPaperRule, Fidelity::Ls) => {
            if !(sigma_e > 0.0) {
                return Err(Error::InvalidParameter(
                    "the 2/(1/sigma_e^2 + lambda) rule needs sigma_e > 0 (noiseless data)".into(),
                ));
            }
            Ok(2.0 / (1.0 / (sigma_e * sigma_e) + lambda))
        }
    }
}

struct StepParts<T> {
    next: Image<T>,
    fidelity_grad_norm: f64,
    red_grad_norm: f64,
    cg_iterations: usize,
}

fn step_parts<T: Scalar>(
    x: &Image<T>,
    y: &Image<T>,
    op: &DegradationOperator<T>,
    denoiser: &DenoiserSpec,
    cfg: &SolverConfig,
    mu: T,
) -> Result<StepParts<T>> {
    let (grad, cg_iterations) = fidelity_gradient_counted(op, x, y, cfg.fidelity, &cfg.pinv)?;
    let mut next = x.clone();
    next.axpy(-mu, &grad);
    let lambda = T::of(cfg.lambda);
    let red_grad_norm = if lambda != T::zero() {
        let g = red_gradient(x, denoiser, T::of(cfg.sigma))?;
        next.axpy(-mu * lambda, &g);
        g.norm().as_f64()
    } else {
        0.0
    };
    Ok(StepParts {
        next,
        fidelity_grad_norm: grad.norm().as_f64(),
        red_grad_norm,
        cg_iterations,
    })
}

/// One update `x_k - mu (grad_fidelity(x_k) + lambda g_RED(x_k))`.
pub fn step<T: Scalar>(
    x: &Image<T>,
    y: &Image<T>,
    op: &DegradationOperator<T>,
    denoiser: &DenoiserSpec,
    cfg: &SolverConfig,
    mu: T,
) -> Result<Image<T>> {
    Ok(step_parts(x, y, op, denoiser, cfg, mu)?.next)
}

/// Runs `cfg.iterations` updates from `x0` with the default step size for
/// `cfg.step_rule`.
pub fn solve<T: Scalar>(
    y: &Image<T>,
    op: &DegradationOperator<T>,
    denoiser: &DenoiserSpec,
    cfg: &SolverConfig,
    x0: &Image<T>,
    reference: Option<&Image<T>>,
) -> Result<(Image<T>, IterationTrace)> {
    let mu = default_step_size(op, cfg.fidelity, cfg.sigma_e, cfg.lambda, cfg.step_rule)?;
    solve_with_step(y, op, denoiser, cfg, mu, x0, reference)
}

/// [`solve`] with an explicit step size.
pub fn solve_with_step<T: Scalar>(
    y: &Image<T>,
    op: &DegradationOperator<T>,
    denoiser: &DenoiserSpec,
    cfg: &SolverConfig,
    mu: f64,
    x0: &Image<T>,
    reference: Option<&Image<T>>,
) -> Result<(Image<T>, IterationTrace)> {
    cfg.validate()?;
    let (w, h) = op.input_dims();
    x0.check_dims(w, h)?;
    if let Some(r) = reference {
        r.check_dims(w, h)?;
    }
    let (ow, oh) = op.output_dims();
    y.check_dims(ow, oh)?;
    denoiser.validate(w, h)?;

    let mu_t = T::of(mu);
    let mut x = x0.clone();
    let mut records = Vec::with_capacity(cfg.iterations);
    for k in 1..=cfg.iterations {
        let parts = step_parts(&x, y, op, denoiser, cfg, mu_t)?;
        if !parts.next.is_finite() {
            return Err(Error::Diverged { iteration: k });
        }
        let update_norm = parts.next.sub(&x).norm().as_f64();
        x = parts.next;
        let psnr = match reference {
            Some(r) => Some(psnr_cropped(r, &x, 255.0, cfg.psnr_border)?),
            None => None,
        };
        records.push(IterationRecord {
            iteration: k,
            psnr,
            update_norm,
            fidelity_grad_norm: parts.fidelity_grad_norm,
            red_grad_norm: parts.red_grad_norm,
            cg_iterations: parts.cg_iterations,
        });
    }
    let trace = IterationTrace {
        fidelity: cfg.fidelity,
        step_size: mu,
        pinv_path: cfg.pinv_path(op),
        records,
    };
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::RegularizerKind;
    use crate::image::GaussianStream;
    use crate::operators::BlurKernel;
    use approx::assert_abs_diff_eq;

    fn noise_image(w: usize, h: usize, seed: u64, amp: f64) -> Image<f64> {
        let mut s = GaussianStream::new(seed);
        Image::from_fn(w, h, |_, _| amp * s.next_normal())
    }

    const TIK_ID: DenoiserSpec = DenoiserSpec::Tikhonov {
        regularizer: RegularizerKind::Identity,
    };

    #[test]
    fn red_gradient_of_near_noop_denoiser_vanishes() {
        let x = noise_image(8, 8, 1, 10.0);
        let g = red_gradient(&x, &TIK_ID, 1e-9).unwrap();
        assert!(g.max_abs() < 1e-12);
    }

    #[test]
    fn red_gradient_tikhonov_identity_two_routes() {
        let x = Image::from_fn(4, 2, |r, c| if (r + c) % 2 == 0 { 2.0 } else { -4.0 });
        let g = red_gradient(&x, &TIK_ID, 1.0).unwrap();
        assert!(g.sub(&x.scale(0.5)).max_abs() < 1e-15);
        // sigma^2 grad s(D(x)) with grad s = identity
        let via_prior = tikhonov_route(&x, 1.0);
        assert!(g.sub(&via_prior).max_abs() < 1e-15);
    }

    fn tikhonov_route(x: &Image<f64>, sigma: f64) -> Image<f64> {
        let s2 = sigma * sigma;
        x.scale(s2 / (1.0 + s2))
    }

    #[test]
    fn zero_residual_gives_zero_fidelity_gradient() {
        let op = DegradationOperator::blur(BlurKernel::gaussian(5, 1.0).unwrap(), 8, 8).unwrap();
        let x = noise_image(8, 8, 2, 5.0);
        let y = op.apply(&x).unwrap();
        for f in [Fidelity::Ls, Fidelity::Bp] {
            let g = fidelity_gradient(&op, &x, &y, f, &PseudoinverseConfig::default()).unwrap();
            assert!(g.max_abs() < 1e-10);
        }
    }

    #[test]
    fn step_size_rules() {
        let op = DegradationOperator::<f64>::blur(BlurKernel::identity(), 8, 8).unwrap();
        let bp = default_step_size(&op, Fidelity::Bp, 0.0, 0.3, StepRule::LipschitzInverse).unwrap();
        assert_eq!(bp, 1.0);
        let ls = default_step_size(&op, Fidelity::Ls, 0.0, 0.3, StepRule::LipschitzInverse).unwrap();
        assert_abs_diff_eq!(ls, 1.0, epsilon = 1e-9);
        let red =
            default_step_size(&op, Fidelity::Ls, 2f64.sqrt(), 0.5, StepRule::RedPaperRule).unwrap();
        assert_abs_diff_eq!(red, 2.0, epsilon = 1e-12);
        assert!(default_step_size(&op, Fidelity::Ls, 0.0, 0.5, StepRule::RedPaperRule).is_err());
        assert!(default_step_size(&op, Fidelity::Bp, 1.0, 0.5, StepRule::RedPaperRule).is_err());
    }

    #[test]
    fn exact_step_with_identity_operator() {
        let op = DegradationOperator::blur(BlurKernel::identity(), 8, 8).unwrap();
        let y = noise_image(8, 8, 3, 20.0);
        let x = noise_image(8, 8, 4, 20.0);
        for f in [Fidelity::Ls, Fidelity::Bp] {
            let cfg = SolverConfig::new(f, 0.0, 1.0, 1);
            let next = step(&x, &y, &op, &TIK_ID, &cfg, 1.0).unwrap();
            assert!(next.sub(&y).max_abs() < 1e-12);
            let same = step(&x, &y, &op, &TIK_ID, &cfg, 0.0).unwrap();
            assert_eq!(same, x);
        }
    }

    #[test]
    fn single_iteration_solve_is_one_step() {
        let op = DegradationOperator::blur(BlurKernel::uniform(3).unwrap(), 8, 8).unwrap();
        let y = noise_image(8, 8, 5, 20.0);
        let cfg = SolverConfig::new(Fidelity::Bp, 0.4, 2.0, 1);
        let spec = DenoiserSpec::WaveletSoft { levels: 2 };
        let (x1, trace) = solve(&y, &op, &spec, &cfg, &y, None).unwrap();
        let direct = step(&y, &y, &op, &spec, &cfg, 1.0).unwrap();
        assert_eq!(x1, direct);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.pinv_path, PinvPath::Fft);
        assert_eq!(trace.records[0].psnr, None);
    }

    #[test]
    fn stationary_point_stays_put() {
        let op = DegradationOperator::blur(BlurKernel::identity(), 16, 16).unwrap();
        let x0 = Image::filled(16, 16, 77.0);
        let cfg = SolverConfig::new(Fidelity::Ls, 0.5, 3.0, 10);
        let (_, trace) = solve(&x0, &op, &DenoiserSpec::tv_default(), &cfg, &x0, Some(&x0)).unwrap();
        assert!(trace.records.iter().all(|r| r.update_norm <= 1e-10));
    }

    #[test]
    fn divergent_step_aborts() {
        let op = DegradationOperator::blur(BlurKernel::uniform(3).unwrap(), 8, 8).unwrap();
        let y = noise_image(8, 8, 6, 50.0);
        let cfg = SolverConfig::new(Fidelity::Ls, 1.0, 1.0, 5000);
        let err = solve_with_step(&y, &op, &TIK_ID, &cfg, 50.0, &y, None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn config_validation() {
        let op = DegradationOperator::blur(BlurKernel::identity(), 8, 8).unwrap();
        let y = Image::<f64>::zeros(8, 8);
        let mut cfg = SolverConfig::new(Fidelity::Ls, 0.5, 0.0, 3);
        assert!(solve(&y, &op, &TIK_ID, &cfg, &y, None).is_err());
        cfg.sigma = 1.0;
        cfg.iterations = 0;
        assert!(solve(&y, &op, &TIK_ID, &cfg, &y, None).is_err());
        cfg.iterations = 2;
        assert!(solve(&y, &op, &TIK_ID, &cfg, &Image::zeros(4, 4), None).is_err());
    }

    #[test]
    fn ls_residual_is_monotone_without_prior() {
        let op = DegradationOperator::blur(BlurKernel::gaussian(9, 1.6).unwrap(), 16, 16).unwrap();
        let truth = noise_image(16, 16, 7, 40.0);
        let y = op.apply(&truth).unwrap();
        let mu = default_step_size(&op, Fidelity::Ls, 0.0, 0.0, StepRule::LipschitzInverse).unwrap();
        let cfg = SolverConfig::new(Fidelity::Ls, 0.0, 1.0, 1);
        let mut x = Image::zeros(16, 16);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            x = step(&x, &y, &op, &TIK_ID, &cfg, mu).unwrap();
            let res = op.apply(&x).unwrap().sub(&y).norm();
            assert!(res <= last + 1e-9);
            last = res;
        }
    }
}
