use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Planned 2D DFT for a fixed `width x height` row-major grid.
///
/// Plans are immutable and shared; every call allocates its own buffers, so
/// one instance can be used from many threads.
#[derive(Clone)]
pub(crate) struct Fft2d<T: Scalar> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for Fft2d<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2d({}x{})", self.width, self.height)
    }
}

impl<T: Scalar> Fft2d<T> {
    pub(crate) fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub(crate) fn forward_real(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        buf
    }

    /// Inverse DFT (normalised by `1 / (width * height)`), keeping the real part.
    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex<T>>) -> Vec<T> {
        self.transform(&mut buf, &self.row_inv, &self.col_inv);
        let norm = T::one() / T::of((self.width * self.height) as f64);
        buf.into_iter().map(|c| c.re * norm).collect()
    }

    fn transform(&self, buf: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(buf.len(), w * h);
        rows.process(buf);
        if h > 1 {
            let mut t = transpose(buf, w, h);
            cols.process(&mut t);
            let back = transpose(&t, h, w);
            buf.copy_from_slice(&back);
        }
    }
}

fn transpose<T: Copy>(src: &[T], w: usize, h: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h);
    for c in 0..w {
        for r in 0..h {
            out.push(src[r * w + c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let (w, h) = (6, 5);
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        let f = Fft2d::new(w, h);
        let back = f.inverse_real(f.forward_real(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_bin_is_sum() {
        let f = Fft2d::<f64>::new(4, 3);
        let x = vec![1.5; 12];
        let spec = f.forward_real(&x);
        assert!((spec[0].re - 18.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|c| c.norm() < 1e-12));
    }
}
