//! Plug-in denoising engines `D(x; sigma)`.
//!
//! Each engine is the proximal map of `sigma^2 s(.)` for its prior `s`:
//! `D(x; sigma) = argmin_z ||z - x||^2 / (2 sigma^2) + s(z)`.
//!
//! * Tikhonov, `s(z) = ||R z||^2 / 2` with `R` the identity or the circular
//!   forward-difference gradient. Solved exactly in the Fourier domain.
//! * Haar soft thresholding, `s(z) = ||W^T z||_1` over the detail bands of an
//!   orthonormal multilevel Haar basis `W`. The coarsest scaling band is not
//!   penalised.
//! * Isotropic total variation, solved approximately by Chambolle's dual
//!   projection iteration with circular forward differences.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2d;
use crate::image::Image;
use crate::scalar::Scalar;

pub const TV_DEFAULT_INNER_ITERS: usize = 40;
pub const TV_DEFAULT_DUAL_STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    Identity,
    DiscreteGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    Tikhonov { regularizer: RegularizerKind },
    WaveletSoft { levels: usize },
    Tv { inner_iters: usize, dual_step: f64 },
}

impl DenoiserSpec {
    pub fn tv_default() -> Self {
        DenoiserSpec::Tv {
            inner_iters: TV_DEFAULT_INNER_ITERS,
            dual_step: TV_DEFAULT_DUAL_STEP,
        }
    }

    /// Checks the parameters and their compatibility with a `width x height` image.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        match *self {
            DenoiserSpec::Tikhonov { .. } => Ok(()),
            DenoiserSpec::WaveletSoft { levels } => check_haar_geometry(width, height, levels),
            DenoiserSpec::Tv {
                inner_iters,
                dual_step,
            } => {
                if inner_iters == 0 {
                    return Err(Error::InvalidParameter("TV inner_iters must be >= 1".into()));
                }
                if !(dual_step > 0.0 && dual_step <= 0.25) {
                    return Err(Error::InvalidParameter(format!(
                        "TV dual_step must lie in (0, 0.25], got {dual_step}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn denoise<T: Scalar>(&self, x: &Image<T>, sigma: T) -> Result<Image<T>> {
        self.validate(x.width(), x.height())?;
        check_sigma(sigma)?;
        match *self {
            DenoiserSpec::Tikhonov { regularizer } => Ok(tikhonov_denoise(x, sigma, regularizer)),
            DenoiserSpec::WaveletSoft { levels } => wavelet_denoise(x, sigma, levels),
            DenoiserSpec::Tv {
                inner_iters,
                dual_step,
            } => Ok(tv_denoise(x, sigma, inner_iters, T::of(dual_step))),
        }
    }
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma > T::zero() && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "denoiser sigma must be positive, got {sigma}"
        )))
    }
}

/// Fourier symbol of `R^T R` on the periodic `width x height` grid.
pub(crate) fn regularizer_symbol(kind: RegularizerKind, width: usize, height: usize) -> Vec<f64> {
    match kind {
        RegularizerKind::Identity => vec![1.0; width * height],
        RegularizerKind::DiscreteGradient => {
            let tau = 2.0 * std::f64::consts::PI;
            let mut out = Vec::with_capacity(width * height);
            for k in 0..height {
                let cy = 2.0 - 2.0 * (tau * k as f64 / height as f64).cos();
                for l in 0..width {
                    let cx = 2.0 - 2.0 * (tau * l as f64 / width as f64).cos();
                    out.push(cx + cy);
                }
            }
            out
        }
    }
}

/// Exact `(sigma^2 R^T R + I)^{-1} x`.
pub fn tikhonov_denoise<T: Scalar>(x: &Image<T>, sigma: T, kind: RegularizerKind) -> Image<T> {
    let s2 = sigma * sigma;
    match kind {
        RegularizerKind::Identity => x.scale(T::one() / (T::one() + s2)),
        RegularizerKind::DiscreteGradient => {
            let (w, h) = (x.width(), x.height());
            let fft = Fft2d::new(w, h);
            let mut spec = fft.forward_real(x.samples());
            for (s, &lam) in spec.iter_mut().zip(&regularizer_symbol(kind, w, h)) {
                *s = *s / Complex::new(T::one() + s2 * T::of(lam), T::zero());
            }
            Image::new(w, h, fft.inverse_real(spec)).expect("geometry preserved")
        }
    }
}

/// Circular forward differences `(d/dcol, d/drow)`.
pub fn gradient<T: Scalar>(x: &Image<T>) -> (Image<T>, Image<T>) {
    let (w, h) = (x.width(), x.height());
    let gx = Image::from_fn(w, h, |r, c| x.get(r, (c + 1) % w) - x.get(r, c));
    let gy = Image::from_fn(w, h, |r, c| x.get((r + 1) % h, c) - x.get(r, c));
    (gx, gy)
}

/// Negative adjoint of [`gradient`]: `div = -grad^T`.
pub fn divergence<T: Scalar>(px: &Image<T>, py: &Image<T>) -> Image<T> {
    assert!(px.same_shape(py), "shape mismatch");
    let (w, h) = (px.width(), px.height());
    let mut out = vec![T::zero(); w * h];
    divergence_into(px.samples(), py.samples(), w, h, &mut out);
    Image::new(w, h, out).expect("geometry preserved")
}

/// Isotropic total variation with circular forward differences.
pub fn total_variation<T: Scalar>(x: &Image<T>) -> T {
    let (gx, gy) = gradient(x);
    gx.samples()
        .iter()
        .zip(gy.samples())
        .map(|(&a, &b)| (a * a + b * b).sqrt())
        .sum()
}

/// `||z - x||^2 / (2 sigma^2) + TV(z)`
pub fn tv_prox_objective<T: Scalar>(z: &Image<T>, x: &Image<T>, sigma: T) -> T {
    let d = z.sub(x);
    d.dot(&d) / (T::of(2.0) * sigma * sigma) + total_variation(z)
}

pub fn tv_denoise<T: Scalar>(x: &Image<T>, sigma: T, inner_iters: usize, dual_step: T) -> Image<T> {
    tv_chambolle(x, sigma, inner_iters, dual_step, None)
}

/// [`tv_denoise`] plus the prox objective after every inner iteration.
pub fn tv_denoise_traced<T: Scalar>(
    x: &Image<T>,
    sigma: T,
    inner_iters: usize,
    dual_step: T,
) -> (Image<T>, Vec<T>) {
    let mut history = Vec::with_capacity(inner_iters);
    let mut record = |z: &Image<T>| history.push(tv_prox_objective(z, x, sigma));
    let out = tv_chambolle(x, sigma, inner_iters, dual_step, Some(&mut record));
    (out, history)
}

fn tv_chambolle<T: Scalar>(
    x: &Image<T>,
    sigma: T,
    inner_iters: usize,
    tau: T,
    mut observe: Option<&mut dyn FnMut(&Image<T>)>,
) -> Image<T> {
    let (w, h) = (x.width(), x.height());
    let n = w * h;
    let lambda = sigma * sigma;
    let inv_lambda = T::one() / lambda;
    let xs = x.samples();
    let mut px = vec![T::zero(); n];
    let mut py = vec![T::zero(); n];
    let mut u = vec![T::zero(); n];
    let primal = |px: &[T], py: &[T], u: &mut [T]| -> Image<T> {
        divergence_into(px, py, w, h, u);
        let data = xs.iter().zip(u.iter()).map(|(&v, &d)| v - lambda * d).collect();
        Image::new(w, h, data).expect("geometry preserved")
    };
    for _ in 0..inner_iters {
        divergence_into(&px, &py, w, h, &mut u);
        for (ui, &xi) in u.iter_mut().zip(xs) {
            *ui = *ui - xi * inv_lambda;
        }
        for r in 0..h {
            let down = if r + 1 == h { 0 } else { (r + 1) * w };
            for c in 0..w {
                let i = r * w + c;
                let right = if c + 1 == w { r * w } else { i + 1 };
                let gx = u[right] - u[i];
                let gy = u[down + c] - u[i];
                let denom = T::one() + tau * (gx * gx + gy * gy).sqrt();
                px[i] = (px[i] + tau * gx) / denom;
                py[i] = (py[i] + tau * gy) / denom;
            }
        }
        if let Some(f) = observe.as_mut() {
            f(&primal(&px, &py, &mut u));
        }
    }
    primal(&px, &py, &mut u)
}

fn divergence_into<T: Scalar>(px: &[T], py: &[T], w: usize, h: usize, out: &mut [T]) {
    for r in 0..h {
        let up = if r == 0 { (h - 1) * w } else { (r - 1) * w };
        for c in 0..w {
            let i = r * w + c;
            let left = if c == 0 { r * w + w - 1 } else { i - 1 };
            out[i] = px[i] - px[left] + py[i] - py[up + c];
        }
    }
}

fn check_haar_geometry(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("wavelet levels must be >= 1".into()));
    }
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || width % block != 0 || height % block != 0 {
        return Err(Error::Geometry(format!(
            "{width}x{height} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Orthonormal multilevel Haar coefficients `alpha = W^T x`, stored in the
/// usual Mallat layout: each level splits the current top-left block into
/// LL (top-left), HL, LH and HH quadrants.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs<T> {
    width: usize,
    height: usize,
    levels: usize,
    data: Vec<T>,
}

impl<T: Scalar> WaveletCoeffs<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Size of the coarsest scaling block.
    pub fn coarse_dims(&self) -> (usize, usize) {
        (self.width >> self.levels, self.height >> self.levels)
    }

    /// `true` for coefficients outside the coarsest scaling block.
    pub fn is_detail(&self, index: usize) -> bool {
        let (cw, ch) = self.coarse_dims();
        let (r, c) = (index / self.width, index % self.width);
        r >= ch || c >= cw
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Elementwise `sign(a) max(|a| - t, 0)` on every coefficient.
    pub fn soft_threshold(&self, t: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = soft_threshold_scalar(*v, t);
        }
        out
    }

    /// Soft thresholding of the detail bands only.
    pub fn soft_threshold_details(&self, t: T) -> Self {
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            if self.is_detail(i) {
                *v = soft_threshold_scalar(*v, t);
            }
        }
        out
    }
}

#[inline]
pub fn soft_threshold_scalar<T: Scalar>(a: T, t: T) -> T {
    a.signum() * (a.abs() - t).max(T::zero())
}

pub fn haar_analysis<T: Scalar>(x: &Image<T>, levels: usize) -> Result<WaveletCoeffs<T>> {
    let (w, h) = (x.width(), x.height());
    check_haar_geometry(w, h, levels)?;
    let mut data = x.samples().to_vec();
    let mut scratch = Vec::new();
    for l in 0..levels {
        let (bw, bh) = (w >> l, h >> l);
        for r in 0..bh {
            let row = &mut data[r * w..r * w + bw];
            haar_forward_1d(row, &mut scratch);
        }
        let mut col = vec![T::zero(); bh];
        for c in 0..bw {
            for r in 0..bh {
                col[r] = data[r * w + c];
            }
            haar_forward_1d(&mut col, &mut scratch);
            for r in 0..bh {
                data[r * w + c] = col[r];
            }
        }
    }
    Ok(WaveletCoeffs {
        width: w,
        height: h,
        levels,
        data,
    })
}

pub fn haar_synthesis<T: Scalar>(coeffs: &WaveletCoeffs<T>) -> Image<T> {
    let (w, h) = (coeffs.width, coeffs.height);
    let mut data = coeffs.data.clone();
    let mut scratch = Vec::new();
    for l in (0..coeffs.levels).rev() {
        let (bw, bh) = (w >> l, h >> l);
        let mut col = vec![T::zero(); bh];
        for c in 0..bw {
            for r in 0..bh {
                col[r] = data[r * w + c];
            }
            haar_inverse_1d(&mut col, &mut scratch);
            for r in 0..bh {
                data[r * w + c] = col[r];
            }
        }
        for r in 0..bh {
            haar_inverse_1d(&mut data[r * w..r * w + bw], &mut scratch);
        }
    }
    Image::new(w, h, data).expect("geometry preserved")
}

fn haar_forward_1d<T: Scalar>(v: &mut [T], scratch: &mut Vec<T>) {
    let half = v.len() / 2;
    let s = T::FRAC_1_SQRT_2();
    scratch.clear();
    scratch.extend_from_slice(v);
    for i in 0..half {
        let (a, b) = (scratch[2 * i], scratch[2 * i + 1]);
        v[i] = (a + b) * s;
        v[half + i] = (a - b) * s;
    }
}

fn haar_inverse_1d<T: Scalar>(v: &mut [T], scratch: &mut Vec<T>) {
    let half = v.len() / 2;
    let s = T::FRAC_1_SQRT_2();
    scratch.clear();
    scratch.extend_from_slice(v);
    for i in 0..half {
        let (a, d) = (scratch[i], scratch[half + i]);
        v[2 * i] = (a + d) * s;
        v[2 * i + 1] = (a - d) * s;
    }
}

/// `W T_{sigma^2}(W^T x)` with the coarsest scaling band passed through.
pub fn wavelet_denoise<T: Scalar>(x: &Image<T>, sigma: T, levels: usize) -> Result<Image<T>> {
    check_sigma(sigma)?;
    let coeffs = haar_analysis(x, levels)?;
    Ok(haar_synthesis(&coeffs.soft_threshold_details(sigma * sigma)))
}
