//! FFT helpers for periodic, band-limited sequences.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::geometry::C64;

fn fft(buf: &mut [C64]) {
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(buf);
}

/// Unnormalized inverse transform.
fn ifft(buf: &mut [C64]) {
    FftPlanner::<f64>::new()
        .plan_fft_inverse(buf.len())
        .process(buf);
}

/// Signed frequency index of DFT bin `k` of a length-`len` transform.
/// The Nyquist bin of an even length is reported as `None`.
fn signed_bin(k: usize, len: usize) -> Option<f64> {
    if 2 * k < len {
        Some(k as f64)
    } else if 2 * k == len {
        None
    } else {
        Some(k as f64 - len as f64)
    }
}

/// Delays a periodic sequence by a possibly fractional number of samples,
/// `out[n] = s[n - shift]`, using band-limited interpolation.
pub fn fractional_circular_shift(s: &[C64], shift: f64) -> Vec<C64> {
    let len = s.len();
    if len == 0 {
        return Vec::new();
    }
    let mut buf = s.to_vec();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let rot = match signed_bin(k, len) {
            Some(f) => C64::from_polar(1.0, -2.0 * PI * f * shift / len as f64),
            // split the Nyquist bin symmetrically so real inputs stay real
            None => C64::new((PI * shift).cos(), 0.0),
        };
        *v *= rot;
    }
    ifft(&mut buf);
    let scale = 1.0 / len as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Band-limited upsampling of one period by `factor` (zero-padding in the
/// frequency domain). Sample `n * factor` of the output equals `s[n]`.
pub fn upsample(s: &[C64], factor: usize) -> Vec<C64> {
    let len = s.len();
    if factor <= 1 || len == 0 {
        return s.to_vec();
    }
    let out_len = len * factor;
    let mut spectrum = s.to_vec();
    fft(&mut spectrum);
    let mut padded = vec![C64::new(0.0, 0.0); out_len];
    for (k, &v) in spectrum.iter().enumerate() {
        match signed_bin(k, len) {
            Some(f) if f >= 0.0 => padded[k] = v,
            Some(f) => padded[(out_len as f64 + f) as usize] = v,
            None => {
                padded[k] += v * 0.5;
                padded[out_len - k] += v * 0.5;
            }
        }
    }
    ifft(&mut padded);
    let scale = 1.0 / len as f64;
    padded.iter_mut().for_each(|v| *v *= scale);
    padded
}

/// Periodic cross-correlation `r[m] = Σ_n y[n] conj(s[n - m])`.
pub fn circular_xcorr(y: &[C64], s: &[C64]) -> Vec<C64> {
    assert_eq!(y.len(), s.len(), "circular_xcorr length mismatch");
    let len = y.len();
    if len == 0 {
        return Vec::new();
    }
    let mut fy = y.to_vec();
    let mut fs = s.to_vec();
    fft(&mut fy);
    fft(&mut fs);
    for (a, b) in fy.iter_mut().zip(&fs) {
        *a *= b.conj();
    }
    ifft(&mut fy);
    let scale = 1.0 / len as f64;
    fy.iter_mut().for_each(|v| *v *= scale);
    fy
}
