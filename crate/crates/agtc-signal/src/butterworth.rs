//! Digital Butterworth low-pass design and biquad-cascade filtering.
//!
//! Design path: analog prototype poles, frequency prewarping, bilinear
//! transform, factorization into second-order sections. Filtering is causal
//! single-pass (direct form II transposed, zero initial state), so the
//! output carries the filter's phase delay; nothing compensates it.

use rustfft::num_complex::Complex64;

use crate::SignalError;

/// One second-order section, normalized so a0 = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Clone, Debug)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    /// (order, cutoff_hz, sampling_rate_hz)
    pub design_meta: (usize, f64, f64),
}

impl SosFilter {
    /// |H(e^{j 2 pi f / fs})| of the full cascade.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let fs = self.design_meta.2;
        let w = 2.0 * std::f64::consts::PI * freq_hz / fs;
        let zinv = Complex64::from_polar(1.0, -w);
        let zinv2 = zinv * zinv;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            let num = Complex64::new(s.b0, 0.0) + zinv * s.b1 + zinv2 * s.b2;
            let den = Complex64::new(1.0, 0.0) + zinv * s.a1 + zinv2 * s.a2;
            h *= num / den;
        }
        h.norm()
    }

    /// Largest pole magnitude across sections (< 1 means stable).
    pub fn max_pole_magnitude(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                // roots of z^2 + a1 z + a2
                let disc = Complex64::new(s.a1 * s.a1 - 4.0 * s.a2, 0.0).sqrt();
                let r1 = (Complex64::new(-s.a1, 0.0) + disc) * 0.5;
                let r2 = (Complex64::new(-s.a1, 0.0) - disc) * 0.5;
                r1.norm().max(r2.norm())
            })
            .fold(0.0f64, f64::max)
    }
}

/// Maximally flat low-pass of the given order, factored into
/// ceil(order/2) sections ordered by ascending pole-pair Q. Each section is
/// normalized to exactly unit DC gain.
pub fn design_butterworth_lowpass(
    order: usize,
    cutoff_hz: f64,
    sampling_rate_hz: f64,
) -> Result<SosFilter, SignalError> {
    if order == 0 {
        return Err(SignalError::InvalidOrder);
    }
    let nyquist = sampling_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(SignalError::InvalidCutoff { cutoff_hz, nyquist, fs: sampling_rate_hz });
    }

    // prewarped analog cutoff so the digital response hits -3 dB at cutoff_hz
    let warped = 2.0 * sampling_rate_hz * (std::f64::consts::PI * cutoff_hz / sampling_rate_hz).tan();
    let fs2 = 2.0 * sampling_rate_hz;
    let n = order;

    // conjugate pole pairs k = 1..n/2 at angle phi from the negative real axis
    let mut sections: Vec<(f64, Biquad)> = Vec::with_capacity(order.div_ceil(2));
    for k in 1..=n / 2 {
        let phi = (2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * n as f64);
        let pole = Complex64::new(-warped * phi.sin(), warped * phi.cos());
        // bilinear transform
        let zp = (Complex64::new(fs2, 0.0) + pole) / (Complex64::new(fs2, 0.0) - pole);
        let a1 = -2.0 * zp.re;
        let a2 = zp.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        let q = 1.0 / (2.0 * phi.sin());
        sections.push((q, Biquad { b0: g, b1: 2.0 * g, b2: g, a1, a2 }));
    }
    if n % 2 == 1 {
        // single real pole at -warped
        let zp = (fs2 - warped) / (fs2 + warped);
        let a1 = -zp;
        let g = (1.0 + a1) / 2.0;
        sections.push((0.5, Biquad { b0: g, b1: g, b2: 0.0, a1, a2: 0.0 }));
    }
    sections.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let filter = SosFilter {
        sections: sections.into_iter().map(|(_, s)| s).collect(),
        design_meta: (order, cutoff_hz, sampling_rate_hz),
    };
    debug_assert!(filter.max_pole_magnitude() < 1.0);
    Ok(filter)
}

/// Causal forward pass through the cascade, zero initial state.
/// Output length equals input length.
pub fn apply_filter(filter: &SosFilter, x: &[f64]) -> Result<Vec<f64>, SignalError> {
    if x.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    let mut y = x.to_vec();
    for s in &filter.sections {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for v in &mut y {
            let xin = *v;
            let out = s.b0 * xin + z1;
            z1 = s.b1 * xin - s.a1 * out + z2;
            z2 = s.b2 * xin - s.a2 * out;
            *v = out;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth magnitude evaluated at the prewarped frequency,
    /// the closed form the digital design must reproduce.
    fn prewarped_oracle(order: usize, f: f64, fc: f64, fs: f64) -> f64 {
        let w = 2.0 * fs * (std::f64::consts::PI * f / fs).tan();
        let wc = 2.0 * fs * (std::f64::consts::PI * fc / fs).tan();
        1.0 / (1.0 + (w / wc).powi(2 * order as i32)).sqrt()
    }

    #[test]
    fn section_count_and_stability() {
        for order in [1, 2, 3, 7, 12] {
            let f = design_butterworth_lowpass(order, 62.5, 250.0).unwrap();
            assert_eq!(f.sections.len(), order.div_ceil(2));
            assert!(f.max_pole_magnitude() < 1.0, "order {order} unstable");
        }
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        let mag = f.magnitude_at(62.5);
        let db_error = 20.0 * (mag * 2f64.sqrt()).log10();
        assert!(db_error.abs() < 0.1, "cutoff gain off by {db_error} dB");
    }

    #[test]
    fn exact_unit_dc_gain() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        assert!((f.magnitude_at(0.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stopband_attenuation_matches_prewarped_oracle() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        let mag = f.magnitude_at(93.75);
        let db = 20.0 * mag.log10();
        assert!(db <= -40.0, "1.5x cutoff only {db} dB down");
        for freq in [10.0, 30.0, 50.0, 62.5, 80.0, 93.75, 110.0] {
            let oracle = prewarped_oracle(12, freq, 62.5, 250.0);
            let got = f.magnitude_at(freq);
            let rel = (got - oracle).abs() / oracle.max(1e-300);
            assert!(rel < 1e-6, "at {freq} Hz: {got} vs oracle {oracle}");
        }
    }

    #[test]
    fn invalid_cutoffs_rejected() {
        assert!(design_butterworth_lowpass(12, 125.0, 250.0).is_err());
        assert!(design_butterworth_lowpass(12, 130.0, 250.0).is_err());
        assert!(design_butterworth_lowpass(12, 0.0, 250.0).is_err());
        assert!(design_butterworth_lowpass(0, 10.0, 250.0).is_err());
    }

    #[test]
    fn zero_in_zero_out_and_length_preserved() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        let y = apply_filter(&f, &[0.0; 100]).unwrap();
        assert_eq!(y.len(), 100);
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(apply_filter(&f, &[]).is_err());
    }

    #[test]
    fn dc_settles_to_unit_gain() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        let x = vec![3.7; 2000];
        let y = apply_filter(&f, &x).unwrap();
        let tail = y.last().unwrap();
        assert!((tail - 3.7).abs() / 3.7 < 1e-6, "steady state {tail}");
    }

    #[test]
    fn passband_sinusoid_amplitude_matches_response() {
        let fs = 250.0;
        let f = design_butterworth_lowpass(12, 62.5, fs).unwrap();
        let n = 2000;
        let x: Vec<f64> =
            (0..n).map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / fs).sin()).collect();
        let y = apply_filter(&f, &x).unwrap();
        // steady-state amplitude over the last quarter
        let amp = y[3 * n / 4..].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let gain = f.magnitude_at(5.0);
        assert!((amp - gain).abs() / gain < 0.01, "amp {amp} vs |H| {gain}");
        assert!((amp - 1.0).abs() < 0.01, "5 Hz should pass nearly unattenuated");
    }

    #[test]
    fn impulse_response_decays() {
        let f = design_butterworth_lowpass(12, 62.5, 250.0).unwrap();
        let mut x = vec![0.0; 4096];
        x[0] = 1.0;
        let y = apply_filter(&f, &x).unwrap();
        let early: f64 = y[..2048].iter().map(|v| v.abs()).sum();
        let late: f64 = y[2048..].iter().map(|v| v.abs()).sum();
        assert!(late < 1e-9 * early.max(1.0), "impulse response does not decay");
        assert!(y.iter().all(|v| v.is_finite()));
    }
}
