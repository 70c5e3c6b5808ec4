//! Image restoration by regularization-by-denoising (RED).
//!
//! The crate is organised bottom-up:
//!
//! * [`image`] holds the raster type, PSNR, Gaussian noise and PGM I/O.
//! * [`operators`] models the degradation `A` (circular blur, optionally
//!   followed by subsampling) with forward, adjoint and pseudoinverse actions.
//! * [`denoise`] provides the plug-in engines `D(x; sigma)`: Tikhonov,
//!   Haar-wavelet soft thresholding and isotropic total variation.
//! * [`solver`] runs the LS-RED and BP-RED gradient iterations.
//! * [`interpretation`] numerically checks that the RED gradient is a
//!   scaled (sub)gradient of the prior evaluated at the denoised point.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below pin the common choices.

pub mod denoise;
pub mod error;
mod fft;
pub mod image;
pub mod interpretation;
pub mod operators;
pub mod scalar;
pub mod solver;

pub use denoise::{DenoiserSpec, RegularizerKind, WaveletCoeffs};
pub use error::{Error, Result};
pub use image::{Image, NoiseSpec};
pub use operators::{
    BlurKernel, CgSolution, DegradationOperator, OperatorKind, PowerEstimate, PseudoinverseConfig,
};
pub use scalar::Scalar;
pub use solver::{Fidelity, IterationRecord, IterationTrace, PinvPath, SolverConfig, StepRule};

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type BlurKernel64 = BlurKernel<f64>;
pub type BlurKernel32 = BlurKernel<f32>;
pub type Operator64 = DegradationOperator<f64>;
pub type Operator32 = DegradationOperator<f32>;

