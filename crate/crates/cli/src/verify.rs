//! The `verify` suite: seeded numerical checks of the RED gradient's
//! subgradient interpretation and of the fidelity gradients.

use redbp_core::image::GaussianStream;
use redbp_core::interpretation::{
    angle_report, check_l1_membership, check_tikhonov_identity, finite_difference_gradient,
};
use redbp_core::solver::fidelity_gradient;
use redbp_core::{
    BlurKernel, DegradationOperator, Fidelity, Image, PseudoinverseConfig, RegularizerKind,
};
use serde::Serialize;

pub const TIKHONOV_TOL: f64 = 1e-9;
pub const MEMBERSHIP_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const DRAWS: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    /// Informational records never fail the suite.
    pub informational: bool,
    pub detail: String,
}

fn random_image(w: usize, h: usize, rng: &mut GaussianStream) -> Image<f64> {
    let offset = 255.0 * rng.next_uniform();
    let amp = 1.0 + 60.0 * rng.next_uniform();
    Image::from_fn(w, h, |_, _| offset + amp * rng.next_normal())
}

pub fn tikhonov_identity_check(seed: u64) -> CheckRecord {
    let mut rng = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for k in 0..DRAWS {
        let x = random_image(16, 16, &mut rng);
        let sigma = 0.1 + 9.9 * rng.next_uniform();
        let kind = if k % 2 == 0 {
            RegularizerKind::Identity
        } else {
            RegularizerKind::DiscreteGradient
        };
        worst = worst.max(check_tikhonov_identity(kind, sigma, &x));
    }
    CheckRecord {
        name: "tikhonov_identity".into(),
        passed: worst <= TIKHONOV_TOL,
        value: worst,
        threshold: TIKHONOV_TOL,
        informational: false,
        detail: format!("{DRAWS} draws, 16x16, both regularizers"),
    }
}

pub fn l1_membership_check(seed: u64) -> CheckRecord {
    let mut rng = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    let mut interior = 0;
    for k in 0..DRAWS {
        let x = random_image(16, 16, &mut rng);
        let sigma = 0.5 + 7.5 * rng.next_uniform();
        let levels = 1 + k % 2;
        let report = check_l1_membership(&x, sigma, levels).expect("16x16 divisible by 4");
        interior += report.count(redbp_core::interpretation::MembershipCase::Interior);
        worst = worst.max(report.max_violation);
    }
    CheckRecord {
        name: "l1_subgradient_membership".into(),
        passed: worst <= MEMBERSHIP_TOL,
        value: worst,
        threshold: MEMBERSHIP_TOL,
        informational: false,
        detail: format!("{DRAWS} draws, 16x16, levels 1-2, {interior} interior coefficients"),
    }
}

/// Worst relative error between analytic and central-difference gradients.
pub fn fidelity_gradient_error(op: &DegradationOperator<f64>, fidelity: Fidelity, seed: u64) -> f64 {
    let mut rng = GaussianStream::new(seed);
    let (w, h) = op.input_dims();
    let (ow, oh) = op.output_dims();
    let x = random_image(w, h, &mut rng);
    let y = random_image(ow, oh, &mut rng);
    let pinv = PseudoinverseConfig {
        eps: 0.0,
        cg_tol: 1e-13,
        cg_max_iters: 1000,
    };
    let objective = |z: &Image<f64>| -> f64 {
        let r = y.sub(&op.apply(z).expect("geometry"));
        let r = match fidelity {
            Fidelity::Ls => r,
            Fidelity::Bp => op.apply_pseudoinverse(&r, &pinv).expect("cg converges"),
        };
        0.5 * r.dot(&r)
    };
    let fd = finite_difference_gradient(objective, &x, 1e-4);
    let g = fidelity_gradient(op, &x, &y, fidelity, &pinv).expect("gradient");
    fd.sub(&g).norm() / g.norm()
}

/// 8x8 deblurring and 8x8 SR (scale 2) instances used by the gradient check.
pub fn gradient_check_operators() -> Vec<(&'static str, DegradationOperator<f64>)> {
    vec![
        (
            "deblur8",
            DegradationOperator::blur(BlurKernel::gaussian(3, 0.7).expect("kernel"), 8, 8)
                .expect("operator"),
        ),
        (
            "sr8x2",
            DegradationOperator::blur_downsample(BlurKernel::gaussian(3, 1.0).expect("kernel"), 2, 8, 8)
                .expect("operator"),
        ),
    ]
}

pub fn gradient_checks(seed: u64) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for (name, op) in gradient_check_operators() {
        for fidelity in [Fidelity::Ls, Fidelity::Bp] {
            let err = fidelity_gradient_error(&op, fidelity, seed);
            out.push(CheckRecord {
                name: format!("fidelity_gradient_{}_{name}", fidelity.label()),
                passed: err <= GRADIENT_TOL,
                value: err,
                threshold: GRADIENT_TOL,
                informational: false,
                detail: "central differences, h = 1e-4".into(),
            });
        }
    }
    out
}

pub fn angle_check(seed: u64) -> CheckRecord {
    let mut rng = GaussianStream::new(seed);
    let x = random_image(16, 16, &mut rng);
    let report = angle_report(&x, 2.0, 2, 200, seed).expect("geometry");
    let fmt = |s: Option<redbp_core::interpretation::AngleStats>| match s {
        Some(s) => format!("mean {:.4} min {:.4} max {:.4}", s.mean, s.min, s.max),
        None => "undefined".into(),
    };
    CheckRecord {
        name: "angle_report".into(),
        passed: true,
        value: report.at_input_point.map_or(f64::NAN, |s| s.mean),
        threshold: f64::NAN,
        informational: true,
        detail: format!(
            "angles to g_RED (rad): subgradients at D(x): {}; at x: {}",
            fmt(report.at_denoised_point),
            fmt(report.at_input_point)
        ),
    }
}

pub fn run_verification(seed: u64) -> Vec<CheckRecord> {
    let mut out = vec![tikhonov_identity_check(seed), l1_membership_check(seed + 1)];
    out.extend(gradient_checks(seed + 2));
    out.push(angle_check(seed + 3));
    out
}
