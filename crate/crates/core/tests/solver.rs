mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use redbp_core::interpretation::finite_difference_gradient;
use redbp_core::solver::{
    default_step_size, fidelity_gradient, solve, solve_with_step, step, red_gradient,
};
use redbp_core::{
    BlurKernel, DegradationOperator, DenoiserSpec, Fidelity, Image, PseudoinverseConfig,
    RegularizerKind, SolverConfig, StepRule,
};

fn rel_err(a: &Image<f64>, b: &Image<f64>) -> f64 {
    a.sub(b).norm() / b.norm()
}

fn tight_pinv() -> PseudoinverseConfig {
    PseudoinverseConfig {
        eps: 0.0,
        cg_tol: 1e-13,
        cg_max_iters: 1000,
    }
}

#[test]
fn fidelity_gradients_match_finite_differences() {
    let cases = [
        // mild blur: with eps = 0 the BP objective scales with 1/min|K|^2, which
        // swamps central differences in roundoff for strong kernels
        DegradationOperator::blur(BlurKernel::gaussian(5, 0.7).unwrap(), 8, 8).unwrap(),
        DegradationOperator::blur_downsample(BlurKernel::gaussian(3, 1.0).unwrap(), 2, 8, 8).unwrap(),
    ];
    let pinv = tight_pinv();
    for op in &cases {
        let (w, h) = op.input_dims();
        let (ow, oh) = op.output_dims();
        let x = noise_image(w, h, 1, 20.0).map(|v| v + 100.0);
        let y = noise_image(ow, oh, 2, 20.0).map(|v| v + 100.0);

        let ls = |z: &Image<f64>| {
            let r = op.apply(z).unwrap().sub(&y);
            0.5 * r.dot(&r)
        };
        let fd = finite_difference_gradient(ls, &x, 1e-4);
        let g = fidelity_gradient(op, &x, &y, Fidelity::Ls, &pinv).unwrap();
        assert!(rel_err(&fd, &g) <= 1e-5, "LS {:?}: {}", op.kind(), rel_err(&fd, &g));

        let bp = |z: &Image<f64>| {
            let r = op.apply_pseudoinverse(&y.sub(&op.apply(z).unwrap()), &pinv).unwrap();
            0.5 * r.dot(&r)
        };
        let fd = finite_difference_gradient(bp, &x, 1e-4);
        let g = fidelity_gradient(op, &x, &y, Fidelity::Bp, &pinv).unwrap();
        assert!(rel_err(&fd, &g) <= 1e-5, "BP {:?}: {}", op.kind(), rel_err(&fd, &g));
    }
}

fn dense_tikhonov_denoiser(w: usize, h: usize, sigma: f64) -> DMatrix<f64> {
    let d = dense_gradient(w, h);
    let sys = (d.transpose() * &d) * (sigma * sigma) + DMatrix::identity(w * h, w * h);
    sys.try_inverse().unwrap()
}

#[test]
fn step_matches_dense_update() {
    let (w, h) = (8, 8);
    let k = BlurKernel::gaussian(5, 1.3).unwrap();
    let op = DegradationOperator::blur(k.clone(), w, h).unwrap();
    let a = dense_blur(&k, w, h);
    let den = dense_tikhonov_denoiser(w, h, 1.5);
    let spec = DenoiserSpec::Tikhonov {
        regularizer: RegularizerKind::DiscreteGradient,
    };
    let x = noise_image(w, h, 3, 30.0);
    let y = noise_image(w, h, 4, 30.0);
    let (mu, lambda) = (0.8, 0.3);
    let mut cfg = SolverConfig::new(Fidelity::Ls, lambda, 1.5, 1);
    let got = step(&x, &y, &op, &spec, &cfg, mu).unwrap();
    let xv = to_vec(&x);
    let yv = to_vec(&y);
    let expected = &xv - (a.transpose() * (&a * &xv - &yv) + (&xv - &den * &xv) * lambda) * mu;
    assert!(got.sub(&to_image(&expected, w, h)).max_abs() <= 1e-9);

    // back-projection with the exact dense pseudoinverse (square, invertible A)
    cfg.fidelity = Fidelity::Bp;
    let got = step(&x, &y, &op, &spec, &cfg, mu).unwrap();
    let a_pinv = a.clone().try_inverse().unwrap();
    let expected = &xv - (&a_pinv * (&a * &xv - &yv) + (&xv - &den * &xv) * lambda) * mu;
    assert!(got.sub(&to_image(&expected, w, h)).max_abs() <= 1e-6);
}

#[test]
fn ls_red_with_tikhonov_reaches_quadratic_minimizer() {
    let (w, h) = (16, 16);
    let k = BlurKernel::gaussian(9, 1.6).unwrap();
    let op = DegradationOperator::blur(k.clone(), w, h).unwrap();
    let truth = Image::from_fn(w, h, |r, c| if (r / 4 + c / 4) % 2 == 0 { 60.0 } else { 180.0 });
    let y = redbp_core::image::add_gaussian_noise(
        &op.apply(&truth).unwrap(),
        &redbp_core::NoiseSpec::new(2.0, 5).unwrap(),
    );
    let (lambda, sigma) = (0.5, 1.0);
    let spec = DenoiserSpec::Tikhonov {
        regularizer: RegularizerKind::DiscreteGradient,
    };

    // stationary point of 1/2||y - Ax||^2 + lambda/2 x^T M x, M = I - (s^2 R^T R + I)^{-1}
    let a = dense_blur(&k, w, h);
    let m = DMatrix::identity(w * h, w * h) - dense_tikhonov_denoiser(w, h, sigma);
    let lhs = a.transpose() * &a + m * lambda;
    let rhs = a.transpose() * to_vec(&y);
    let x_star: DVector<f64> = lhs.lu().solve(&rhs).unwrap();

    let cfg = SolverConfig::new(Fidelity::Ls, lambda, sigma, 2000);
    let (x, _) = solve(&y, &op, &spec, &cfg, &y, None).unwrap();
    let err = x.sub(&to_image(&x_star, w, h)).max_abs();
    assert!(err <= 1e-6, "distance to minimizer {err}");
}

#[test]
fn traces_are_bit_identical_across_runs() {
    let op = DegradationOperator::blur(BlurKernel::uniform(5).unwrap(), 16, 16).unwrap();
    let truth = noise_image(16, 16, 6, 30.0).map(|v| v + 128.0);
    let y = op.apply(&truth).unwrap();
    let cfg = SolverConfig::new(Fidelity::Bp, 0.2, 2.0, 25);
    let run = || solve(&y, &op, &DenoiserSpec::tv_default(), &cfg, &y, Some(&truth)).unwrap();
    let (x1, t1) = run();
    let (x2, t2) = run();
    assert_eq!(x1, x2);
    assert_eq!(t1, t2);
    assert_eq!(t1.records.len(), 25);
    assert!(t1.final_psnr().is_some());
}

#[test]
fn sr_bp_uses_cg_path() {
    let op = DegradationOperator::blur_downsample(BlurKernel::gaussian(7, 1.6).unwrap(), 3, 24, 24).unwrap();
    let truth = noise_image(24, 24, 7, 30.0).map(|v| v + 128.0);
    let y = op.apply(&truth).unwrap();
    let x0 = op.apply_adjoint(&y).unwrap();
    let cfg = SolverConfig::new(Fidelity::Bp, 0.1, 1.0, 3);
    let (_, trace) = solve(&y, &op, &DenoiserSpec::tv_default(), &cfg, &x0, Some(&truth)).unwrap();
    assert_eq!(trace.pinv_path, redbp_core::PinvPath::Cg);
    assert!(trace.records.iter().all(|r| r.cg_iterations >= 1));
    assert_eq!(trace.step_size, 1.0);
}

#[test]
fn red_paper_step_rule_is_used_by_solve() {
    let op = DegradationOperator::blur(BlurKernel::uniform(3).unwrap(), 8, 8).unwrap();
    let y = noise_image(8, 8, 8, 30.0);
    let mut cfg = SolverConfig::new(Fidelity::Ls, 0.5, 1.0, 2);
    cfg.step_rule = StepRule::RedPaperRule;
    cfg.sigma_e = 2f64.sqrt();
    let spec = DenoiserSpec::WaveletSoft { levels: 1 };
    let (_, trace) = solve(&y, &op, &spec, &cfg, &y, None).unwrap();
    assert!((trace.step_size - 2.0).abs() < 1e-12);
    let mu = default_step_size(&op, Fidelity::Ls, 2f64.sqrt(), 0.5, StepRule::RedPaperRule).unwrap();
    let (a, _) = solve_with_step(&y, &op, &spec, &cfg, mu, &y, None).unwrap();
    let (b, _) = solve(&y, &op, &spec, &cfg, &y, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn red_gradient_of_wavelet_denoiser_lies_in_scaled_box() {
    let x = noise_image(16, 16, 9, 10.0);
    let sigma = 1.5;
    let g = red_gradient(&x, &DenoiserSpec::WaveletSoft { levels: 2 }, sigma).unwrap();
    let z = redbp_core::denoise::haar_analysis(&g, 2).unwrap();
    for (i, v) in z.values().iter().enumerate() {
        let zi = v / (sigma * sigma);
        if z.is_detail(i) {
            assert!(zi.abs() <= 1.0 + 1e-12);
        } else {
            assert!(zi.abs() < 1e-12);
        }
    }
}
