//! The "EEGT" single-trial container: magic, version u16, channels u32,
//! samples u32, sampling_rate f64, label u32, then channels x samples
//! little-endian f64 row-major. Payload values are microvolts.

use std::fs;
use std::path::Path;

use agtc_signal::EpochedTrial;

use crate::IoError;

const MAGIC: &[u8; 4] = b"EEGT";
const VERSION: u16 = 1;

#[derive(Clone, Debug)]
pub struct TrialContainer {
    pub sampling_rate: f64,
    pub label: usize,
    /// channels x samples, microvolts
    pub data: Vec<Vec<f64>>,
}

pub fn write_container(path: impl AsRef<Path>, t: &TrialContainer) -> Result<(), IoError> {
    let channels = t.data.len();
    let samples = t.data.first().map(|r| r.len()).unwrap_or(0);
    if channels == 0 || samples == 0 || t.data.iter().any(|r| r.len() != samples) {
        return Err(IoError::Format("container needs a rectangular non-empty matrix".into()));
    }
    let mut buf = Vec::with_capacity(26 + 8 * channels * samples);
    buf.extend(MAGIC);
    buf.extend(VERSION.to_le_bytes());
    buf.extend((channels as u32).to_le_bytes());
    buf.extend((samples as u32).to_le_bytes());
    buf.extend(t.sampling_rate.to_le_bytes());
    buf.extend((t.label as u32).to_le_bytes());
    for row in &t.data {
        for &v in row {
            buf.extend(v.to_le_bytes());
        }
    }
    fs::write(&path, buf).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

pub fn read_container(path: impl AsRef<Path>) -> Result<TrialContainer, IoError> {
    let buf = fs::read(&path).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    let name = path.as_ref().display().to_string();
    if buf.len() < 26 {
        return Err(IoError::ContainerParse {
            path: name,
            detail: format!("{} bytes is shorter than the 26-byte header", buf.len()),
        });
    }
    if &buf[0..4] != MAGIC {
        return Err(IoError::ContainerParse { path: name, detail: "bad magic".into() });
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(IoError::ContainerParse {
            path: name,
            detail: format!("unsupported version {version}"),
        });
    }
    let channels = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
    let samples = u32::from_le_bytes(buf[10..14].try_into().unwrap()) as usize;
    let sampling_rate = f64::from_le_bytes(buf[14..22].try_into().unwrap());
    let label = u32::from_le_bytes(buf[22..26].try_into().unwrap()) as usize;
    let expected = 26 + 8 * channels * samples;
    if buf.len() != expected {
        return Err(IoError::ContainerParse {
            path: name,
            detail: format!(
                "payload of {channels}x{samples} f64 needs {expected} bytes, found {}",
                buf.len()
            ),
        });
    }
    let mut data = Vec::with_capacity(channels);
    let mut at = 26;
    for _ in 0..channels {
        let mut row = Vec::with_capacity(samples);
        for _ in 0..samples {
            row.push(f64::from_le_bytes(buf[at..at + 8].try_into().unwrap()));
            at += 8;
        }
        data.push(row);
    }
    Ok(TrialContainer { sampling_rate, label, data })
}

/// Attach manifest provenance to a loaded container.
pub fn container_to_trial(
    c: TrialContainer,
    subject: &str,
    session: &str,
    run: &str,
    label_override: Option<usize>,
    window_span: Option<(usize, usize)>,
) -> EpochedTrial {
    let samples = c.data.first().map(|r| r.len()).unwrap_or(0);
    EpochedTrial {
        sampling_rate: c.sampling_rate,
        label: label_override.unwrap_or(c.label),
        subject_id: subject.to_string(),
        session_id: session.to_string(),
        run_id: run.to_string(),
        window_span: window_span.unwrap_or((0, samples)),
        data: c.data,
    }
}
