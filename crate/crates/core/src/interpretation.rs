//! Numerical checks that the RED gradient `x - D(x; sigma)` is `sigma^2`
//! times a (sub)gradient of the prior evaluated at the denoised point
//! `D(x; sigma)`, plus a finite-difference gradient oracle.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::denoise::{
    haar_analysis, regularizer_symbol, soft_threshold_scalar, tikhonov_denoise, wavelet_denoise,
    RegularizerKind,
};
use crate::error::Result;
use crate::fft::Fft2d;
use crate::image::{GaussianStream, Image};
use crate::scalar::Scalar;

/// Compares `x - D(x)` with `sigma^2 R^T R (sigma^2 R^T R + I)^{-1} x`
/// (the latter applied as a single Fourier multiplier) and returns
/// `max |a - b| / max(|a|_inf, |b|_inf)`, or 0 when both vanish.
pub fn check_tikhonov_identity<T: Scalar>(kind: RegularizerKind, sigma: T, x: &Image<T>) -> f64 {
    let direct = x.sub(&tikhonov_denoise(x, sigma, kind));
    let s2 = (sigma * sigma).as_f64();
    let (w, h) = (x.width(), x.height());
    let via_prior = match kind {
        RegularizerKind::Identity => x.scale(T::of(s2 / (1.0 + s2))),
        RegularizerKind::DiscreteGradient => {
            let fft = Fft2d::new(w, h);
            let mut spec = fft.forward_real(x.samples());
            for (s, &lam) in spec.iter_mut().zip(&regularizer_symbol(kind, w, h)) {
                let m = s2 * lam / (s2 * lam + 1.0);
                *s = *s * Complex::new(T::of(m), T::zero());
            }
            Image::new(w, h, fft.inverse_real(spec)).expect("geometry preserved")
        }
    };
    let scale = direct.max_abs().max(via_prior.max_abs()).as_f64();
    if scale == 0.0 {
        return 0.0;
    }
    direct.sub(&via_prior).max_abs().as_f64() / scale
}

/// Which branch of the l1 subdifferential a coefficient falls into, decided
/// by the sign of `T_{sigma^2}(W^T x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipCase {
    Positive,
    Negative,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipEntry {
    pub index: usize,
    pub case: MembershipCase,
    pub z: f64,
    /// Distance of `z` from the admissible set for `case`.
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub sigma: f64,
    pub levels: usize,
    pub entries: Vec<MembershipEntry>,
    pub max_violation: f64,
}

impl MembershipReport {
    pub fn count(&self, case: MembershipCase) -> usize {
        self.entries.iter().filter(|e| e.case == case).count()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Classifies every detail-band entry of
/// `z_RED = W^T (x - D(x; sigma)) / sigma^2` against the subdifferential of
/// `||.||_1` at `T_{sigma^2}(W^T x)`: `z = 1` where positive, `z = -1` where
/// negative, `z in [-1, 1]` where zero. The coarse band is not penalised by
/// the prior and is skipped.
pub fn check_l1_membership<T: Scalar>(
    x: &Image<T>,
    sigma: T,
    levels: usize,
) -> Result<MembershipReport> {
    let t = sigma * sigma;
    let alpha = haar_analysis(x, levels)?;
    let red = x.sub(&wavelet_denoise(x, sigma, levels)?);
    let z_coeffs = haar_analysis(&red, levels)?;
    let inv_t = t.as_f64().recip();

    let mut entries = Vec::new();
    let mut max_violation = 0.0f64;
    for (i, (&a, &zc)) in alpha.values().iter().zip(z_coeffs.values()).enumerate() {
        if !alpha.is_detail(i) {
            continue;
        }
        let shrunk = soft_threshold_scalar(a, t);
        let z = zc.as_f64() * inv_t;
        let (case, violation) = if shrunk > T::zero() {
            (MembershipCase::Positive, (z - 1.0).abs())
        } else if shrunk < T::zero() {
            (MembershipCase::Negative, (z + 1.0).abs())
        } else {
            (MembershipCase::Interior, (z.abs() - 1.0).max(0.0))
        };
        max_violation = max_violation.max(violation);
        entries.push(MembershipEntry {
            index: i,
            case,
            z,
            violation,
        });
    }
    Ok(MembershipReport {
        sigma: sigma.as_f64(),
        levels,
        entries,
        max_violation,
    })
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every pixel.
pub fn finite_difference_gradient<T: Scalar>(
    f: impl Fn(&Image<T>) -> T,
    x: &Image<T>,
    h: T,
) -> Image<T> {
    let mut probe = x.clone();
    let mut grad = Image::zeros(x.width(), x.height());
    let two_h = h + h;
    for i in 0..x.len() {
        let orig = probe.samples()[i];
        probe.samples_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.samples_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.samples_mut()[i] = orig;
        grad.samples_mut()[i] = (plus - minus) / two_h;
    }
    grad
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub samples: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Angles (radians) between `g_RED` and random subgradients of
/// `s = ||W^T .||_1` drawn from `partial s(D(x))` and from `partial s(x)`.
///
/// Exploratory only. Free coordinates (zero coefficients) are drawn
/// uniformly from `[-1, 1]`. `None` marks an undefined angle population,
/// e.g. when `g_RED = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub red_gradient_norm: f64,
    pub denoised_point_singleton: bool,
    pub input_point_singleton: bool,
    pub at_denoised_point: Option<AngleStats>,
    pub at_input_point: Option<AngleStats>,
}

pub fn angle_report<T: Scalar>(
    x: &Image<T>,
    sigma: T,
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<AngleReport> {
    let t = sigma * sigma;
    let alpha = haar_analysis(x, levels)?;
    let red = x.sub(&wavelet_denoise(x, sigma, levels)?);
    let red_norm = red.norm().as_f64();
    let z_red: Vec<f64> = haar_analysis(&red, levels)?
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| alpha.is_detail(*i))
        .map(|(_, v)| v.as_f64() / t.as_f64())
        .collect();
    let details: Vec<f64> = alpha
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| alpha.is_detail(*i))
        .map(|(_, v)| v.as_f64())
        .collect();

    // sign pattern, 0 marks a free coordinate
    let at_denoised: Vec<f64> = details
        .iter()
        .map(|&a| soft_threshold_scalar(a, t.as_f64()).signum_or_zero())
        .collect();
    let at_input: Vec<f64> = details.iter().map(|&a| a.signum_or_zero()).collect();

    let mut stream = GaussianStream::new(seed);
    let stats_for = |pattern: &[f64], stream: &mut GaussianStream| -> Option<AngleStats> {
        if red_norm == 0.0 || samples == 0 {
            return None;
        }
        let mut angles = Vec::with_capacity(samples);
        for _ in 0..samples {
            let g: Vec<f64> = pattern
                .iter()
                .map(|&s| if s == 0.0 { 2.0 * stream.next_uniform() - 1.0 } else { s })
                .collect();
            angles.push(angle_between(&z_red, &g)?);
        }
        Some(AngleStats {
            samples,
            mean: angles.iter().sum::<f64>() / samples as f64,
            min: angles.iter().copied().fold(f64::INFINITY, f64::min),
            max: angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    };
    let at_denoised_point = stats_for(&at_denoised, &mut stream);
    let at_input_point = stats_for(&at_input, &mut stream);
    Ok(AngleReport {
        red_gradient_norm: red_norm,
        denoised_point_singleton: at_denoised.iter().all(|&s| s != 0.0),
        input_point_singleton: at_input.iter().all(|&s| s != 0.0),
        at_denoised_point,
        at_input_point,
    })
}

trait SignumOrZero {
    fn signum_or_zero(self) -> Self;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

fn angle_between(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0).acos())
}
