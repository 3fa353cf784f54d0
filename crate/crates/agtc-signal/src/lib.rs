//! EEG preprocessing: unit scaling, anti-aliased FFT downsampling, common
//! average referencing and timeframe epoching.
//!
//! Everything here is a pure function of its inputs; identical inputs give
//! bit-identical outputs, and recordings/channels can be processed in
//! parallel by the caller.

mod butterworth;
mod car;
mod pipeline;
mod resample;

pub use butterworth::{apply_filter, design_butterworth_lowpass, Biquad, SosFilter};
pub use car::apply_car;
pub use pipeline::{
    extract_epochs, preprocess, scale_to_microvolts, EpochExtraction, EpochedTrial, Event,
    RawRecording, SkippedEpoch, TrialOrigin, Unit,
};
pub use resample::{fft_resample, round_half_even};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist} Hz) for fs {fs} Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist: f64, fs: f64 },
    #[error("filter order must be positive")]
    InvalidOrder,
    #[error("empty input signal")]
    EmptyInput,
    #[error("invalid sampling rate {0}")]
    InvalidSamplingRate(f64),
    #[error("common average referencing needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid timeframe: start {t_start} s must precede end {t_end} s")]
    InvalidTimeframe { t_start: f64, t_end: f64 },
    #[error("resampled length would be zero ({n} samples, {from} -> {to} Hz)")]
    DegenerateResample { n: usize, from: f64, to: f64 },
}
