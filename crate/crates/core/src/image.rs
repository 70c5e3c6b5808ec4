//! Grayscale raster, quality metrics, Gaussian noise synthesis and binary
//! PGM (P5) I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// PSNR reported when the two images are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

/// Row-major grayscale image with real-valued samples, nominally in `[0, 255]`.
///
/// Samples are never clamped by arithmetic; clamping only happens in
/// [`Image::save_pgm`].
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Geometry(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn samples(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        self.check_dims(other.width, other.height)
    }

    /// Errors unless `self` is `width x height`.
    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: self.width,
                got_h: self.height,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `f(self, other)`. Panics on shape mismatch.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.same_shape(other), "shape mismatch");
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        assert!(self.same_shape(other), "shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        assert!(self.same_shape(other), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Top-left-anchored sub-image.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || row + height > self.height || col + width > self.width {
            return Err(Error::Geometry(format!(
                "crop {width}x{height}@({row},{col}) outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |r, c| self.get(row + r, col + c)))
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Mean squared difference between two equally-sized images.
pub fn mse<T: Scalar>(reference: &Image<T>, test: &Image<T>) -> Result<f64> {
    mse_cropped(reference, test, 0)
}

/// [`mse`] ignoring a `border`-pixel frame on every side.
pub fn mse_cropped<T: Scalar>(reference: &Image<T>, test: &Image<T>, border: usize) -> Result<f64> {
    test.check_shape(reference)?;
    let (w, h) = (reference.width(), reference.height());
    if 2 * border >= w || 2 * border >= h {
        return Err(Error::InvalidParameter(format!(
            "crop border {border} leaves nothing of a {w}x{h} image"
        )));
    }
    let mut acc = 0.0;
    for r in border..h - border {
        for c in border..w - border {
            let d = reference.get(r, c).as_f64() - test.get(r, c).as_f64();
            acc += d * d;
        }
    }
    Ok(acc / ((w - 2 * border) * (h - 2 * border)) as f64)
}

/// Converts an MSE into decibels against `peak`, capping exact matches at
/// [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

pub fn psnr<T: Scalar>(reference: &Image<T>, test: &Image<T>, peak: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, test)?, peak))
}

pub fn psnr_cropped<T: Scalar>(
    reference: &Image<T>,
    test: &Image<T>,
    peak: f64,
    border: usize,
) -> Result<f64> {
    Ok(psnr_from_mse(mse_cropped(reference, test, border)?, peak))
}

/// Additive white Gaussian noise parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_e: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_e: f64, seed: u64) -> Result<Self> {
        if !(sigma_e >= 0.0) || !sigma_e.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and >= 0, got {sigma_e}"
            )));
        }
        Ok(Self { sigma_e, seed })
    }
}

/// Deterministic standard-normal stream.
///
/// ChaCha8 keyed by the 64-bit seed produces uniform 64-bit words; each pair
/// of words becomes two normals through the Box-Muller transform with
/// `u1 = (w1 >> 11 + 1) / 2^53` in `(0, 1]` and `u2 = (w2 >> 11) / 2^53`.
/// ChaCha output is specified bit-for-bit, so streams match across platforms.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }
}

/// Returns `x + e` with `e ~ N(0, sigma_e^2)` i.i.d. No clipping is applied.
pub fn add_gaussian_noise<T: Scalar>(x: &Image<T>, spec: &NoiseSpec) -> Image<T> {
    if spec.sigma_e == 0.0 {
        return x.clone();
    }
    let mut stream = GaussianStream::new(spec.seed);
    x.map(|v| v + T::of(spec.sigma_e * stream.next_normal()))
}

impl<T: Scalar> Image<T> {
    /// Reads a binary (P5) PGM with maxval 255.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::decode_pgm(&bytes)
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(Error::MalformedPgm(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let width = parse_header_int(bytes, &mut pos, "width")?;
        let height = parse_header_int(bytes, &mut pos, "height")?;
        let maxval = parse_header_int(bytes, &mut pos, "maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::MalformedPgm(format!("zero size {width}x{height}")));
        }
        if maxval != 255 {
            return Err(Error::UnsupportedMaxval(maxval as u32));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::MalformedPgm("missing header terminator".into())),
        }
        let expected = width * height;
        let payload = &bytes[pos..];
        if payload.len() < expected {
            return Err(Error::TruncatedPgm {
                expected,
                found: payload.len(),
            });
        }
        let data = payload[..expected].iter().map(|&b| T::of(b as f64)).collect();
        Self::new(width, height, data)
    }

    /// Writes a P5 PGM, rounding and clamping samples to `[0, 255]`.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.encode_pgm())?;
        Ok(())
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| {
            let v = v.as_f64();
            if v.is_nan() {
                0
            } else {
                v.round().clamp(0.0, 255.0) as u8
            }
        }));
        out
    }
}

fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b.is_ascii_whitespace() {
            *pos += 1;
        } else if b == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    skip_ws_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedPgm("unexpected end of header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| {
            Error::MalformedPgm(format!("bad {what} {:?}", String::from_utf8_lossy(tok)))
        })
}
