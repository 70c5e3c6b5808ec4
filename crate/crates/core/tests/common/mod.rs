#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use redbp_core::image::GaussianStream;
use redbp_core::{BlurKernel, Image};

pub fn noise_image(w: usize, h: usize, seed: u64, amp: f64) -> Image<f64> {
    let mut s = GaussianStream::new(seed);
    Image::from_fn(w, h, |_, _| amp * s.next_normal())
}

pub fn to_vec(x: &Image<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.samples())
}

pub fn to_image(v: &DVector<f64>, w: usize, h: usize) -> Image<f64> {
    Image::new(w, h, v.as_slice().to_vec()).unwrap()
}

/// Dense periodic blur matrix built by placing taps directly.
pub fn dense_blur(k: &BlurKernel<f64>, w: usize, h: usize) -> DMatrix<f64> {
    let n = w * h;
    let half = (k.size() / 2) as isize;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..h {
        for c in 0..w {
            for i in 0..k.size() {
                for j in 0..k.size() {
                    let rr = (r as isize - (i as isize - half)).rem_euclid(h as isize) as usize;
                    let cc = (c as isize - (j as isize - half)).rem_euclid(w as isize) as usize;
                    m[(r * w + c, rr * w + cc)] += k.tap(i, j);
                }
            }
        }
    }
    m
}

/// Dense `S H`: periodic blur then keep rows/cols at multiples of `scale`.
pub fn dense_blur_downsample(k: &BlurKernel<f64>, scale: usize, w: usize, h: usize) -> DMatrix<f64> {
    let full = dense_blur(k, w, h);
    let (ow, oh) = (w / scale, h / scale);
    let mut m = DMatrix::zeros(ow * oh, w * h);
    for r in 0..oh {
        for c in 0..ow {
            m.set_row(r * ow + c, &full.row(r * scale * w + c * scale));
        }
    }
    m
}

/// Dense circular forward-difference gradient, stacked `[D_col; D_row]`.
pub fn dense_gradient(w: usize, h: usize) -> DMatrix<f64> {
    let n = w * h;
    let mut m = DMatrix::zeros(2 * n, n);
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            m[(p, p)] -= 1.0;
            m[(p, r * w + (c + 1) % w)] += 1.0;
            m[(n + p, p)] -= 1.0;
            m[(n + p, ((r + 1) % h) * w + c)] += 1.0;
        }
    }
    m
}
