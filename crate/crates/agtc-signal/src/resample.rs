//! FFT-domain resampling with a boxcar spectral window.
//!
//! Forward FFT, copy/truncate/zero-pad the spectrum (rectangular window,
//! no shaping), symmetric handling of the Nyquist bin, inverse FFT,
//! amplitude rescale by the realized rate ratio.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::SignalError;

/// Round a sample count with banker's rounding (ties to even): 562.5 -> 562.
pub fn round_half_even(v: f64) -> i64 {
    v.round_ties_even() as i64
}

/// Resample `x` from `fs_old` to `fs_new`. Output length is
/// round-half-even(len * fs_new / fs_old).
pub fn fft_resample(x: &[f64], fs_old: f64, fs_new: f64) -> Result<Vec<f64>, SignalError> {
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    if fs_old.is_nan() || fs_old <= 0.0 || fs_new.is_nan() || fs_new <= 0.0 {
        return Err(SignalError::InvalidSamplingRate(if fs_old > 0.0 { fs_new } else { fs_old }));
    }
    if fs_new == fs_old {
        return Ok(x.to_vec());
    }
    let n = x.len();
    let m = round_half_even(n as f64 * fs_new / fs_old);
    if m <= 0 {
        return Err(SignalError::DegenerateResample { n, from: fs_old, to: fs_new });
    }
    let m = m as usize;

    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);

    // boxcar copy of the shared band
    let shared = n.min(m);
    let nyq = shared / 2 + 1;
    let mut out_spec = vec![Complex64::new(0.0, 0.0); m];
    out_spec[..nyq].copy_from_slice(&spec[..nyq]);
    let neg = shared - nyq; // negative-frequency bins
    if neg > 0 {
        for i in 0..neg {
            out_spec[m - neg + i] = spec[n - neg + i];
        }
    }
    if shared.is_multiple_of(2) {
        let half = shared / 2;
        if m < n {
            // fold the mirrored Nyquist energy onto the new self-conjugate bin
            out_spec[half] += spec[n - half];
        } else if m > n {
            // split the old Nyquist bin across its two new positions
            out_spec[half] *= 0.5;
            out_spec[m - half] = out_spec[half];
        }
    }

    planner.plan_fft_inverse(m).process(&mut out_spec);
    // rustfft leaves the inverse unnormalized (x n); 1/n both normalizes and
    // applies the fs_new/fs_old amplitude rescale in one step
    let scale = 1.0 / n as f64;
    Ok(out_spec.iter().map(|c| c.re * scale).collect())
}
