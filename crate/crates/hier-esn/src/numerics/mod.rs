//! Deterministic numerical kernels shared by every module: seeded random
//! generation, spectral-radius estimation, ridge regression, FFT magnitudes
//! and squared correlation.
//!
//! All operations are pure given their inputs. [`SeededRng`] is single-owner:
//! parallel work never shares a generator, it derives independent children
//! with [`child_seed`].

mod fft;
mod linalg;
mod rng;

pub use fft::fft_magnitude;
pub use linalg::{ridge_solve, spectral_radius_estimate, squared_correlation};
pub use rng::{child_seed, SeededRng};
