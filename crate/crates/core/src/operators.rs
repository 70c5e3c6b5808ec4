//! The degradation operator `A` of the observation model `y = A x + e`.
//!
//! Two kinds are supported: circular blur, and circular blur followed by
//! subsampling at offset 0 along both axes. Convolution is periodic so the
//! blur is diagonalised exactly by the 2D DFT.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2d;
use crate::image::{GaussianStream, Image};
use crate::scalar::Scalar;

/// Seed of the power-method start vector.
pub const POWER_METHOD_SEED: u64 = 0x5eed_0f_a7a;

/// Square, odd-sized convolution kernel. Tap `(i, j)` sits at offset
/// `(i - size/2, j - size/2)` from the output pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel<T> {
    size: usize,
    taps: Vec<T>,
}

impl<T: Scalar> BlurKernel<T> {
    pub fn from_taps(size: usize, taps: Vec<T>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if taps.len() != size * size {
            return Err(Error::InvalidParameter(format!(
                "{} taps for a {size}x{size} kernel",
                taps.len()
            )));
        }
        Ok(Self { size, taps })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            taps: vec![T::one()],
        }
    }

    /// Sampled isotropic Gaussian on the centred grid, normalised to unit sum.
    pub fn gaussian(size: usize, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian std must be positive, got {std}"
            )));
        }
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        let half = (size / 2) as f64;
        let mut raw = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let (di, dj) = (i as f64 - half, j as f64 - half);
                raw.push((-(di * di + dj * dj) / (2.0 * std * std)).exp());
            }
        }
        let total: f64 = raw.iter().sum();
        Self::from_taps(size, raw.into_iter().map(|v| T::of(v / total)).collect())
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        let tap = T::one() / T::of((size * size) as f64);
        Self::from_taps(size, vec![tap; size * size])
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, i: usize, j: usize) -> T {
        self.taps[i * self.size + j]
    }

    pub fn sum(&self) -> T {
        self.taps.iter().copied().sum()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            size: self.size,
            taps: self.taps.iter().map(|&t| t * factor).collect(),
        }
    }

    /// The kernel wrapped onto a `width x height` periodic grid with its
    /// centre at `(0, 0)`. Taps that alias onto the same cell are summed.
    fn embed(&self, width: usize, height: usize) -> Vec<T> {
        let mut grid = vec![T::zero(); width * height];
        let half = (self.size / 2) as isize;
        for i in 0..self.size {
            for j in 0..self.size {
                let r = (i as isize - half).rem_euclid(height as isize) as usize;
                let c = (j as isize - half).rem_euclid(width as isize) as usize;
                grid[r * width + c] = grid[r * width + c] + self.tap(i, j);
            }
        }
        grid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Blur,
    BlurDownsample { scale: usize },
}

/// Settings for `A^+`: the FFT denominator regulariser (blur) and the
/// conjugate-gradient controls (blur + subsample).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoinverseConfig {
    pub eps: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for PseudoinverseConfig {
    fn default() -> Self {
        Self {
            eps: 0.0,
            cg_tol: 1e-6,
            cg_max_iters: 100,
        }
    }
}

impl PseudoinverseConfig {
    /// Default settings with the FFT denominator regularised by `0.01 sigma_e^2`.
    pub fn for_noise_level(sigma_e: f64) -> Self {
        Self {
            eps: 0.01 * sigma_e * sigma_e,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps {} < 0", self.eps)));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cg_tol must be positive, got {}",
                self.cg_tol
            )));
        }
        if self.cg_max_iters == 0 {
            return Err(Error::InvalidParameter("cg_max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CgSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for `M x = b` with `M` symmetric positive
/// (semi)definite, given only its action. Starts from `x = 0` and stops once
/// `||r|| / ||b|| <= tol` (recursively updated residual).
pub fn conjugate_gradient<T: Scalar>(
    mut matvec: impl FnMut(&[T]) -> Vec<T>,
    b: &[T],
    tol: f64,
    max_iters: usize,
) -> Result<CgSolution<T>> {
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&u, &v)| u * v).sum::<T>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![T::zero(); b.len()];
    if b_norm == T::zero() {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut rel = 1.0;
    for k in 1..=max_iters {
        let mp = matvec(&p);
        let pmp = dot(&p, &mp);
        if !(pmp > T::zero()) {
            // direction in the null space, or breakdown
            break;
        }
        let alpha = rr / pmp;
        for ((xi, ri), (&pi, &mpi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&mp)) {
            *xi = *xi + alpha * pi;
            *ri = *ri - alpha * mpi;
        }
        let rr_new = dot(&r, &r);
        rel = (rr_new.sqrt() / b_norm).as_f64();
        if rel <= tol {
            return Ok(CgSolution {
                x,
                iterations: k,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Err(Error::CgNotConverged {
        iterations: max_iters,
        residual: rel,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct PowerEstimate<T> {
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

/// `A` as an operational object over a fixed input geometry.
#[derive(Clone, Debug)]
pub struct DegradationOperator<T: Scalar> {
    kind: OperatorKind,
    kernel: BlurKernel<T>,
    width: usize,
    height: usize,
    fft: Fft2d<T>,
    transfer: Vec<Complex<T>>,
    /// Blur + subsample only: `A A^T` as a circular convolution on the
    /// observation grid (subsampled autocorrelation of the kernel).
    gram: Option<(Fft2d<T>, Vec<T>)>,
}

impl<T: Scalar> DegradationOperator<T> {
    pub fn blur(kernel: BlurKernel<T>, width: usize, height: usize) -> Result<Self> {
        Self::new(OperatorKind::Blur, kernel, width, height)
    }

    pub fn blur_downsample(
        kernel: BlurKernel<T>,
        scale: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        Self::new(OperatorKind::BlurDownsample { scale }, kernel, width, height)
    }

    pub fn new(kind: OperatorKind, kernel: BlurKernel<T>, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty geometry {width}x{height}")));
        }
        if let OperatorKind::BlurDownsample { scale } = kind {
            if scale < 2 {
                return Err(Error::InvalidParameter(format!(
                    "subsampling scale must be >= 2, got {scale}"
                )));
            }
            if width % scale != 0 || height % scale != 0 {
                return Err(Error::Geometry(format!(
                    "{width}x{height} is not divisible by scale {scale}"
                )));
            }
        }
        let fft = Fft2d::new(width, height);
        let transfer = fft.forward_real(&kernel.embed(width, height));
        let gram = match kind {
            OperatorKind::Blur => None,
            OperatorKind::BlurDownsample { scale } => {
                let power: Vec<Complex<T>> = transfer
                    .iter()
                    .map(|k| Complex::new(k.norm_sqr(), T::zero()))
                    .collect();
                let autocorr = fft.inverse_real(power);
                let (ow, oh) = (width / scale, height / scale);
                let taps: Vec<T> = (0..oh * ow)
                    .map(|i| autocorr[(i / ow) * scale * width + (i % ow) * scale])
                    .collect();
                let small = Fft2d::new(ow, oh);
                // the autocorrelation is symmetric, so its symbol is real
                let symbol = small.forward_real(&taps).into_iter().map(|c| c.re).collect();
                Some((small, symbol))
            }
        };
        Ok(Self {
            kind,
            kernel,
            width,
            height,
            fft,
            transfer,
            gram,
        })
    }

    #[inline]
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    #[inline]
    pub fn kernel(&self) -> &BlurKernel<T> {
        &self.kernel
    }

    /// `(width, height)` of the signal `x`.
    #[inline]
    pub fn input_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// `(width, height)` of the observation `y`.
    pub fn output_dims(&self) -> (usize, usize) {
        match self.kind {
            OperatorKind::Blur => (self.width, self.height),
            OperatorKind::BlurDownsample { scale } => (self.width / scale, self.height / scale),
        }
    }

    fn scale(&self) -> usize {
        match self.kind {
            OperatorKind::Blur => 1,
            OperatorKind::BlurDownsample { scale } => scale,
        }
    }

    fn filter(&self, x: &[T], conj: bool) -> Vec<T> {
        let mut spec = self.fft.forward_real(x);
        for (s, k) in spec.iter_mut().zip(&self.transfer) {
            *s = *s * if conj { k.conj() } else { *k };
        }
        self.fft.inverse_real(spec)
    }

    fn blur_full(&self, x: &Image<T>) -> Image<T> {
        Image::new(self.width, self.height, self.filter(x.samples(), false))
            .expect("geometry preserved")
    }

    fn correlate_full(&self, x: &Image<T>) -> Image<T> {
        Image::new(self.width, self.height, self.filter(x.samples(), true))
            .expect("geometry preserved")
    }

    fn subsample(&self, x: &Image<T>) -> Image<T> {
        let s = self.scale();
        let (ow, oh) = self.output_dims();
        Image::from_fn(ow, oh, |r, c| x.get(r * s, c * s))
    }

    fn zero_fill(&self, r: &Image<T>) -> Image<T> {
        let s = self.scale();
        let mut up = Image::zeros(self.width, self.height);
        for i in 0..r.height() {
            for j in 0..r.width() {
                up.set(i * s, j * s, r.get(i, j));
            }
        }
        up
    }

    /// `A A^T z` on the observation grid, blur + subsample only.
    fn gram_apply(&self, z: &[T]) -> Vec<T> {
        let (small, symbol) = self.gram.as_ref().expect("built for blur + subsample");
        let mut spec = small.forward_real(z);
        for (s, g) in spec.iter_mut().zip(symbol) {
            *s = *s * *g;
        }
        small.inverse_real(spec)
    }

    /// `A x`
    pub fn apply(&self, x: &Image<T>) -> Result<Image<T>> {
        x.check_dims(self.width, self.height)?;
        let blurred = self.blur_full(x);
        Ok(match self.kind {
            OperatorKind::Blur => blurred,
            OperatorKind::BlurDownsample { .. } => self.subsample(&blurred),
        })
    }

    /// `A^T r`
    pub fn apply_adjoint(&self, r: &Image<T>) -> Result<Image<T>> {
        let (ow, oh) = self.output_dims();
        r.check_dims(ow, oh)?;
        Ok(match self.kind {
            OperatorKind::Blur => self.correlate_full(r),
            OperatorKind::BlurDownsample { .. } => self.correlate_full(&self.zero_fill(r)),
        })
    }

    /// `A^T A x`
    pub fn apply_normal(&self, x: &Image<T>) -> Result<Image<T>> {
        self.apply_adjoint(&self.apply(x)?)
    }

    /// `A^+ r = A^T (A A^T)^{-1} r`.
    ///
    /// Blur: `conj(K) / (|K|^2 + eps)` per frequency; frequencies where the
    /// denominator vanishes map to zero. Blur + subsample: CG on
    /// `A A^T z = r` in the observation space, then `A^T z` (`eps` unused).
    pub fn apply_pseudoinverse(&self, r: &Image<T>, cfg: &PseudoinverseConfig) -> Result<Image<T>> {
        Ok(self.apply_pseudoinverse_counted(r, cfg)?.0)
    }

    /// Like [`Self::apply_pseudoinverse`], also returning the CG iteration
    /// count (0 on the FFT path).
    pub fn apply_pseudoinverse_counted(
        &self,
        r: &Image<T>,
        cfg: &PseudoinverseConfig,
    ) -> Result<(Image<T>, usize)> {
        cfg.validate()?;
        let (ow, oh) = self.output_dims();
        r.check_dims(ow, oh)?;
        match self.kind {
            OperatorKind::Blur => {
                let eps = T::of(cfg.eps);
                let mut spec = self.fft.forward_real(r.samples());
                for (s, k) in spec.iter_mut().zip(&self.transfer) {
                    let denom = k.norm_sqr() + eps;
                    *s = if denom > T::zero() {
                        *s * k.conj() / denom
                    } else {
                        Complex::new(T::zero(), T::zero())
                    };
                }
                let out = Image::new(self.width, self.height, self.fft.inverse_real(spec))?;
                Ok((out, 0))
            }
            OperatorKind::BlurDownsample { .. } => {
                let sol = conjugate_gradient(|z| self.gram_apply(z), r.samples(), cfg.cg_tol, cfg.cg_max_iters)?;
                let z = Image::new(ow, oh, sol.x)?;
                Ok((self.apply_adjoint(&z)?, sol.iterations))
            }
        }
    }

    /// Power-method estimate of `||A^T A||`, the largest eigenvalue of `A^T A`.
    pub fn operator_norm_sq(&self, iters: usize, tol: f64) -> PowerEstimate<T> {
        let mut stream = GaussianStream::new(POWER_METHOD_SEED);
        let mut v = Image::from_fn(self.width, self.height, |_, _| T::of(stream.next_normal()));
        let n = v.norm();
        v = v.scale(T::one() / n);
        let mut value = T::zero();
        for k in 1..=iters.max(1) {
            let w = self.apply_normal(&v).expect("geometry fixed");
            let next = w.norm();
            if next == T::zero() {
                return PowerEstimate {
                    value: T::zero(),
                    iterations: k,
                    converged: true,
                };
            }
            v = w.scale(T::one() / next);
            let change = ((next - value).abs() / next).as_f64();
            value = next;
            if change < tol {
                return PowerEstimate {
                    value,
                    iterations: k,
                    converged: true,
                };
            }
        }
        PowerEstimate {
            value,
            iterations: iters.max(1),
            converged: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn noise_image(w: usize, h: usize, seed: u64) -> Image<f64> {
        let mut s = GaussianStream::new(seed);
        Image::from_fn(w, h, |_, _| s.next_normal())
    }

    /// O(n^2 k^2) periodic convolution, independent of the FFT path.
    fn direct_circular_conv(x: &Image<f64>, k: &BlurKernel<f64>) -> Image<f64> {
        let (w, h) = (x.width() as isize, x.height() as isize);
        let half = (k.size() / 2) as isize;
        Image::from_fn(x.width(), x.height(), |r, c| {
            let mut acc = 0.0;
            for i in 0..k.size() {
                for j in 0..k.size() {
                    let (di, dj) = (i as isize - half, j as isize - half);
                    let rr = (r as isize - di).rem_euclid(h) as usize;
                    let cc = (c as isize - dj).rem_euclid(w) as usize;
                    acc += k.tap(i, j) * x.get(rr, cc);
                }
            }
            acc
        })
    }

    #[test]
    fn kernel_factories() {
        let g = BlurKernel::<f64>::gaussian(1, 2.0).unwrap();
        assert_eq!(g.taps(), &[1.0]);

        let g = BlurKernel::<f64>::gaussian(9, 1.6).unwrap();
        assert_abs_diff_eq!(g.sum(), 1.0, epsilon = 1e-12);
        for i in 0..9 {
            for j in 0..9 {
                // 90 degree rotation (i, j) -> (j, 8 - i)
                assert_abs_diff_eq!(g.tap(i, j), g.tap(j, 8 - i), epsilon = 1e-15);
            }
        }

        let flat = BlurKernel::<f64>::gaussian(3, 1e6).unwrap();
        assert!(flat.taps().iter().all(|&t| (t - 1.0 / 9.0).abs() < 1e-6));

        let u = BlurKernel::<f64>::uniform(9).unwrap();
        assert_eq!(u.taps().len(), 81);
        assert!(u.taps().iter().all(|&t| t == 1.0 / 81.0));
        assert_abs_diff_eq!(u.sum(), 1.0, epsilon = 1e-14);
        assert_eq!(BlurKernel::<f64>::uniform(1).unwrap(), BlurKernel::identity());
    }

    #[test]
    fn kernel_factory_errors() {
        assert!(BlurKernel::<f64>::gaussian(4, 1.0).is_err());
        assert!(BlurKernel::<f64>::gaussian(3, 0.0).is_err());
        assert!(BlurKernel::<f64>::gaussian(3, -1.0).is_err());
        assert!(BlurKernel::<f64>::uniform(8).is_err());
        assert!(BlurKernel::<f64>::from_taps(3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn identity_blur_is_identity() {
        let x = noise_image(7, 5, 1);
        let op = DegradationOperator::blur(BlurKernel::identity(), 7, 5).unwrap();
        let y = op.apply(&x).unwrap();
        let z = op.apply_adjoint(&x).unwrap();
        let p = op
            .apply_pseudoinverse(&x, &PseudoinverseConfig::default())
            .unwrap();
        for im in [y, z, p] {
            assert!(im.sub(&x).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gram_symbol_matches_composition() {
        let k = BlurKernel::gaussian(7, 1.6).unwrap();
        for (scale, w, h) in [(2, 12, 8), (3, 24, 18)] {
            let op = DegradationOperator::blur_downsample(k.clone(), scale, w, h).unwrap();
            let z = noise_image(w / scale, h / scale, 4);
            let slow = op.apply(&op.apply_adjoint(&z).unwrap()).unwrap();
            let fast = Image::new(w / scale, h / scale, op.gram_apply(z.samples())).unwrap();
            assert!(fast.sub(&slow).max_abs() < 1e-12);
        }
    }

    #[test]
    fn constant_images_are_preserved() {
        let x = Image::filled(12, 12, 37.0);
        let op = DegradationOperator::blur(BlurKernel::uniform(5).unwrap(), 12, 12).unwrap();
        assert!(op.apply(&x).unwrap().sub(&x).max_abs() < 1e-10);
    }

    #[test]
    fn fft_blur_matches_direct_convolution() {
        let x = noise_image(8, 8, 2);
        let k = BlurKernel::from_taps(3, (1..=9).map(|v| v as f64 / 45.0).collect()).unwrap();
        let op = DegradationOperator::blur(k.clone(), 8, 8).unwrap();
        let diff = op.apply(&x).unwrap().sub(&direct_circular_conv(&x, &k));
        assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn kernel_larger_than_image_wraps() {
        let x = noise_image(6, 4, 3);
        let k = BlurKernel::gaussian(9, 1.6).unwrap();
        let op = DegradationOperator::blur(k.clone(), 6, 4).unwrap();
        let diff = op.apply(&x).unwrap().sub(&direct_circular_conv(&x, &k));
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn geometry_checks() {
        let k = BlurKernel::<f64>::uniform(3).unwrap();
        assert!(DegradationOperator::blur_downsample(k.clone(), 3, 8, 8).is_err());
        assert!(DegradationOperator::blur_downsample(k.clone(), 1, 8, 8).is_err());
        let op = DegradationOperator::blur_downsample(k, 2, 8, 6).unwrap();
        assert_eq!(op.output_dims(), (4, 3));
        assert!(op.apply(&Image::zeros(4, 3)).is_err());
        assert!(op.apply_adjoint(&Image::zeros(8, 6)).is_err());
        assert!(op
            .apply_pseudoinverse(&Image::zeros(8, 6), &PseudoinverseConfig::default())
            .is_err());
    }

    #[test]
    fn downsample_adjoint_of_delta() {
        // A = S H on 4x4 with scale 2; A^T e_(0,0) = H^T S^T e_(0,0) is the
        // flipped kernel centred at (0, 0), i.e. column (0,0) of A^T.
        let k = BlurKernel::from_taps(3, (1..=9).map(|v| v as f64).collect()).unwrap();
        let op = DegradationOperator::blur_downsample(k.clone(), 2, 4, 4).unwrap();
        let mut delta = Image::zeros(2, 2);
        delta.set(0, 0, 1.0);
        let col = op.apply_adjoint(&delta).unwrap();
        // explicit row (0,0) of A: y00 = sum_{di,dj} k[di+1][dj+1] x[-di, -dj]
        let mut expected = Image::<f64>::zeros(4, 4);
        for i in 0..3 {
            for j in 0..3 {
                let r = (-(i as isize - 1)).rem_euclid(4) as usize;
                let c = (-(j as isize - 1)).rem_euclid(4) as usize;
                expected.set(r, c, expected.get(r, c) + k.tap(i, j));
            }
        }
        assert!(col.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn gaussian_deblur_pseudoinverse_is_right_inverse() {
        let op = DegradationOperator::blur(BlurKernel::gaussian(9, 1.6).unwrap(), 32, 32).unwrap();
        let r = noise_image(32, 32, 4);
        let p = op
            .apply_pseudoinverse(&r, &PseudoinverseConfig::default())
            .unwrap();
        let back = op.apply(&p).unwrap();
        assert!(back.sub(&r).norm() / r.norm() <= 1e-8);
    }

    #[test]
    fn sr_pseudoinverse_is_right_inverse() {
        let op = DegradationOperator::blur_downsample(BlurKernel::gaussian(3, 1.0).unwrap(), 2, 16, 16)
            .unwrap();
        let r = noise_image(8, 8, 5);
        let cfg = PseudoinverseConfig {
            cg_tol: 1e-10,
            cg_max_iters: 500,
            ..Default::default()
        };
        let p = op.apply_pseudoinverse(&r, &cfg).unwrap();
        assert!(op.apply(&p).unwrap().sub(&r).max_abs() <= 1e-6);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let op = DegradationOperator::blur_downsample(BlurKernel::gaussian(7, 1.6).unwrap(), 3, 24, 24)
            .unwrap();
        let r = noise_image(8, 8, 6);
        let cfg = PseudoinverseConfig {
            cg_tol: 1e-14,
            cg_max_iters: 1,
            ..Default::default()
        };
        match op.apply_pseudoinverse(&r, &cfg) {
            Err(Error::CgNotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn cg_identity_and_diagonal() {
        let b = vec![1.0, -2.0, 3.0];
        let sol = conjugate_gradient(|v: &[f64]| v.to_vec(), &b, 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x, b);

        let ones = vec![1.0f64; 5];
        let sol = conjugate_gradient(
            |v: &[f64]| v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).collect(),
            &ones,
            1e-14,
            50,
        )
        .unwrap();
        for (i, x) in sol.x.iter().enumerate() {
            assert_abs_diff_eq!(*x, 1.0 / (i + 1) as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn cg_zero_rhs() {
        let sol = conjugate_gradient(|v: &[f64]| v.to_vec(), &[0.0; 4], 1e-6, 3).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pseudoinverse_config_validation() {
        let bad = PseudoinverseConfig {
            eps: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PseudoinverseConfig {
            cg_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(PseudoinverseConfig::for_noise_level(2.0).eps, 0.04);
        assert_eq!(PseudoinverseConfig::for_noise_level(0.0).eps, 0.0);
    }

    #[test]
    fn power_method_identity_and_scaling() {
        let op = DegradationOperator::<f64>::blur(BlurKernel::identity(), 8, 8).unwrap();
        let est = op.operator_norm_sq(1000, 1e-9);
        assert!(est.converged);
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-9);

        let k = BlurKernel::gaussian(5, 1.2).unwrap();
        let a = DegradationOperator::blur(k.clone(), 16, 16).unwrap().operator_norm_sq(1000, 1e-12);
        let b = DegradationOperator::blur(k.scaled(2.0), 16, 16)
            .unwrap()
            .operator_norm_sq(1000, 1e-12);
        assert_abs_diff_eq!(b.value, 4.0 * a.value, epsilon = 1e-6);
    }

    #[test]
    fn works_in_single_precision() {
        let op = DegradationOperator::<f32>::blur(BlurKernel::uniform(3).unwrap(), 8, 8).unwrap();
        let x = Image::<f32>::filled(8, 8, 3.0);
        assert!(op.apply(&x).unwrap().sub(&x).max_abs() < 1e-5);
    }
}
