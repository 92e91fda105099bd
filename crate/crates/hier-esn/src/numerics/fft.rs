//! Radix-2 FFT magnitude spectrum.

use ndarray::Array1;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One-sided magnitude spectrum of a real signal.
///
/// The signal is truncated or zero-padded to `n`, which must be a power of
/// two. Returns `n/2 + 1` magnitudes; bin `k` corresponds to frequency
/// `k / n` cycles per step.
pub fn fft_magnitude(signal: &[f64], n: usize) -> Result<Array1<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "fft length must be a power of two, got {n}"
        )));
    }
    if signal.is_empty() {
        return Err(Error::InvalidArgument("empty signal".into()));
    }

    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let take = signal.len().min(n);
    re[..take].copy_from_slice(&signal[..take]);

    fft_in_place(&mut re, &mut im);

    Ok(Array1::from_iter(
        (0..=n / 2).map(|k| (re[k] * re[k] + im[k] * im[k]).sqrt()),
    ))
}

/// Iterative Cooley-Tukey radix-2 decimation-in-time FFT.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    if n < 2 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let angle_step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let angle = angle_step * k as f64;
                let (wr, wi) = (angle.cos(), angle.sin());
                let even = start + k;
                let odd = even + len / 2;
                let tr = wr * re[odd] - wi * im[odd];
                let ti = wr * im[odd] + wi * re[odd];
                re[odd] = re[even] - tr;
                im[odd] = im[even] - ti;
                re[even] += tr;
                im[even] += ti;
            }
        }
        len <<= 1;
    }
}
