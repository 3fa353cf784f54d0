//! Recording-level preprocessing and epoch extraction.

use std::collections::BTreeMap;

use crate::butterworth::{apply_filter, design_butterworth_lowpass};
use crate::car::apply_car;
use crate::resample::{fft_resample, round_half_even};
use crate::SignalError;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Unit {
    Volts,
    Microvolts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub onset_sample: usize,
    pub code: String,
}

/// One multichannel recording in physical units.
#[derive(Clone, Debug)]
pub struct RawRecording {
    pub channel_labels: Vec<String>,
    /// channels x samples
    pub data: Vec<Vec<f64>>,
    pub sampling_rate: f64,
    pub unit: Unit,
    pub events: Vec<Event>,
}

impl RawRecording {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.data.len() != self.channel_labels.len() {
            return Err(SignalError::InvalidRecording(format!(
                "{} data rows vs {} channel labels",
                self.data.len(),
                self.channel_labels.len()
            )));
        }
        if self.sampling_rate.is_nan() || self.sampling_rate <= 0.0 {
            return Err(SignalError::InvalidSamplingRate(self.sampling_rate));
        }
        if let Some(first) = self.data.first() {
            if self.data.iter().any(|row| row.len() != first.len()) {
                return Err(SignalError::InvalidRecording("ragged channel lengths".into()));
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.data.first().map(|r| r.len()).unwrap_or(0)
    }
}

/// Provenance stamped onto extracted trials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrialOrigin {
    pub subject_id: String,
    pub session_id: String,
    pub run_id: String,
}

/// One labeled model-ready epoch in microvolts.
#[derive(Clone, Debug)]
pub struct EpochedTrial {
    /// channels x samples, microvolts
    pub data: Vec<Vec<f64>>,
    pub sampling_rate: f64,
    pub label: usize,
    pub subject_id: String,
    pub session_id: String,
    pub run_id: String,
    /// Half-open [start, end) sample window in the source recording's
    /// post-resample timeline; kept for leakage auditing.
    pub window_span: (usize, usize),
}

impl EpochedTrial {
    pub fn num_channels(&self) -> usize {
        self.data.len()
    }

    pub fn num_samples(&self) -> usize {
        self.data.first().map(|r| r.len()).unwrap_or(0)
    }
}

/// Multiply by 1e6 iff the recording is in volts; microvolt input passes
/// through untouched.
pub fn scale_to_microvolts(rec: &RawRecording) -> RawRecording {
    match rec.unit {
        Unit::Microvolts => rec.clone(),
        Unit::Volts => RawRecording {
            channel_labels: rec.channel_labels.clone(),
            data: rec
                .data
                .iter()
                .map(|row| row.iter().map(|v| v * 1e6).collect())
                .collect(),
            sampling_rate: rec.sampling_rate,
            unit: Unit::Microvolts,
            events: rec.events.clone(),
        },
    }
}

/// Full preprocessing chain: scaling, then (for recordings above 200 Hz
/// with a target rate) a 12th-order anti-alias low-pass at half the target
/// rate followed by FFT resampling, then common average referencing.
/// Event onsets are rescaled onto the new timeline.
pub fn preprocess(rec: &RawRecording, target_fs: Option<f64>) -> Result<RawRecording, SignalError> {
    rec.validate()?;
    let mut out = scale_to_microvolts(rec);

    if let Some(target) = target_fs {
        if out.sampling_rate > 200.0 {
            let filter = design_butterworth_lowpass(12, target / 2.0, out.sampling_rate)?;
            let ratio = target / out.sampling_rate;
            for row in &mut out.data {
                let filtered = apply_filter(&filter, row)?;
                *row = fft_resample(&filtered, out.sampling_rate, target)?;
            }
            for ev in &mut out.events {
                ev.onset_sample = round_half_even(ev.onset_sample as f64 * ratio).max(0) as usize;
            }
            out.sampling_rate = target;
        }
    }

    out.data = apply_car(&out.data)?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SkippedEpoch {
    pub onset_sample: usize,
    pub code: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct EpochExtraction {
    pub trials: Vec<EpochedTrial>,
    pub skipped: Vec<SkippedEpoch>,
}

/// Cut one epoch per mapped event. The epoch covers samples
/// [onset + round(t_start * fs), onset + round(t_start * fs) + L) with
/// L = round((t_end - t_start) * fs), so every epoch in a run shares a
/// length. Out-of-bounds windows are reported and skipped, not fatal.
pub fn extract_epochs(
    rec: &RawRecording,
    t_start: f64,
    t_end: f64,
    label_map: &BTreeMap<String, usize>,
    origin: &TrialOrigin,
) -> Result<EpochExtraction, SignalError> {
    rec.validate()?;
    if t_start >= t_end {
        return Err(SignalError::InvalidTimeframe { t_start, t_end });
    }
    let fs = rec.sampling_rate;
    let len = round_half_even((t_end - t_start) * fs);
    if len <= 0 {
        return Err(SignalError::InvalidTimeframe { t_start, t_end });
    }
    let len = len as usize;
    let offset = round_half_even(t_start * fs);
    let total = rec.num_samples() as i64;

    let mut out = EpochExtraction::default();
    for ev in &rec.events {
        let Some(&label) = label_map.get(&ev.code) else { continue };
        let start = ev.onset_sample as i64 + offset;
        let end = start + len as i64;
        if start < 0 || end > total {
            out.skipped.push(SkippedEpoch {
                onset_sample: ev.onset_sample,
                code: ev.code.clone(),
                reason: format!("window [{start}, {end}) outside recording of {total} samples"),
            });
            continue;
        }
        let (s, e) = (start as usize, end as usize);
        out.trials.push(EpochedTrial {
            data: rec.data.iter().map(|row| row[s..e].to_vec()).collect(),
            sampling_rate: fs,
            label,
            subject_id: origin.subject_id.clone(),
            session_id: origin.session_id.clone(),
            run_id: origin.run_id.clone(),
            window_span: (s, e),
        });
    }
    Ok(out)
}
