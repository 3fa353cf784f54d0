//! EDF/EDF+ reading, plus a small writer used to generate reference files.
//!
//! The reader parses the 256-byte fixed header, the per-signal header block
//! (fixed-width ASCII fields), and 2-byte little-endian two's-complement
//! data records. "EDF Annotations" signals are decoded as time-stamped
//! annotation lists and never appear as data rows. Every failure is a typed
//! error carrying a byte offset.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use agtc_signal::{round_half_even, Event, RawRecording, Unit};

use crate::IoError;

#[derive(Clone, Debug)]
pub struct EdfSignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
    pub is_annotation: bool,
}

#[derive(Clone, Debug)]
pub struct EdfHeader {
    pub version: String,
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub reserved: String,
    pub record_count: usize,
    pub record_duration: f64,
    pub signals: Vec<EdfSignalHeader>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdfAnnotation {
    pub onset_seconds: f64,
    pub duration_seconds: Option<f64>,
    pub label: String,
}

/// Fully parsed file with digital samples per data signal.
#[derive(Clone, Debug)]
pub struct EdfFile {
    pub header: EdfHeader,
    /// One row per non-annotation signal, concatenated across records.
    pub digital: Vec<Vec<i16>>,
    pub annotations: Vec<EdfAnnotation>,
}

fn field(buf: &[u8], offset: usize, len: usize) -> Result<&str, IoError> {
    let end = offset + len;
    if end > buf.len() {
        return Err(IoError::EdfParse {
            offset,
            detail: format!("file ends inside a {len}-byte header field"),
        });
    }
    std::str::from_utf8(&buf[offset..end]).map_err(|_| IoError::EdfParse {
        offset,
        detail: "header field is not ASCII".into(),
    })
}

fn text(buf: &[u8], offset: usize, len: usize) -> Result<String, IoError> {
    Ok(field(buf, offset, len)?.trim().to_string())
}

fn numeric<T: std::str::FromStr>(
    buf: &[u8],
    offset: usize,
    len: usize,
    what: &str,
) -> Result<T, IoError> {
    let raw = field(buf, offset, len)?.trim();
    raw.parse().map_err(|_| IoError::EdfParse {
        offset,
        detail: format!("non-numeric {what} field: '{raw}'"),
    })
}

pub fn parse_edf_bytes(buf: &[u8]) -> Result<EdfFile, IoError> {
    if buf.len() < 256 {
        return Err(IoError::EdfParse {
            offset: buf.len(),
            detail: format!("file is {} bytes, even the fixed header needs 256", buf.len()),
        });
    }
    let version = text(buf, 0, 8)?;
    let patient = text(buf, 8, 80)?;
    let recording = text(buf, 88, 80)?;
    let start_date = text(buf, 168, 8)?;
    let start_time = text(buf, 176, 8)?;
    let header_bytes: usize = numeric(buf, 184, 8, "header bytes")?;
    let reserved = text(buf, 192, 44)?;
    let record_count: i64 = numeric(buf, 236, 8, "record count")?;
    let record_duration: f64 = numeric(buf, 244, 8, "record duration")?;
    let ns: usize = numeric(buf, 252, 4, "signal count")?;

    if header_bytes != 256 + 256 * ns {
        return Err(IoError::EdfParse {
            offset: 184,
            detail: format!("header claims {header_bytes} bytes, {ns} signals need {}", 256 + 256 * ns),
        });
    }
    if buf.len() < header_bytes {
        return Err(IoError::EdfParse {
            offset: buf.len(),
            detail: format!("file ends inside the {header_bytes}-byte header"),
        });
    }
    if record_count < 0 {
        return Err(IoError::EdfParse {
            offset: 236,
            detail: "unknown record count (-1) is not supported".into(),
        });
    }
    let record_count = record_count as usize;

    // per-signal fields are grouped: all labels, then all transducers, ...
    let mut signals = Vec::with_capacity(ns);
    let base = 256;
    for i in 0..ns {
        let label = text(buf, base + 16 * i, 16)?;
        let transducer = text(buf, base + ns * 16 + 80 * i, 80)?;
        let physical_dimension = text(buf, base + ns * 96 + 8 * i, 8)?;
        let off_pmin = base + ns * 104 + 8 * i;
        let physical_min: f64 = numeric(buf, off_pmin, 8, "physical minimum")?;
        let physical_max: f64 = numeric(buf, base + ns * 112 + 8 * i, 8, "physical maximum")?;
        let digital_min: i32 = numeric(buf, base + ns * 120 + 8 * i, 8, "digital minimum")?;
        let digital_max: i32 = numeric(buf, base + ns * 128 + 8 * i, 8, "digital maximum")?;
        let prefilter = text(buf, base + ns * 136 + 80 * i, 80)?;
        let samples_per_record: usize =
            numeric(buf, base + ns * 216 + 8 * i, 8, "samples per record")?;
        let is_annotation = label == "EDF Annotations";
        if digital_min >= digital_max {
            return Err(IoError::EdfParse {
                offset: base + ns * 120 + 8 * i,
                detail: format!("signal '{label}': digital range [{digital_min}, {digital_max}] is empty"),
            });
        }
        if !is_annotation && physical_min == physical_max {
            return Err(IoError::EdfParse {
                offset: off_pmin,
                detail: format!("signal '{label}': physical range is zero"),
            });
        }
        signals.push(EdfSignalHeader {
            label,
            transducer,
            physical_dimension,
            physical_min,
            physical_max,
            digital_min,
            digital_max,
            prefilter,
            samples_per_record,
            is_annotation,
        });
    }

    let record_bytes: usize = signals
        .iter()
        .try_fold(0usize, |acc, s| {
            s.samples_per_record.checked_mul(2).and_then(|b| acc.checked_add(b))
        })
        .ok_or_else(|| IoError::EdfParse {
            offset: 256,
            detail: "record size overflows".into(),
        })?;
    let expected = record_bytes
        .checked_mul(record_count)
        .and_then(|b| b.checked_add(header_bytes))
        .ok_or_else(|| IoError::EdfParse {
            offset: 236,
            detail: "declared data size overflows".into(),
        })?;
    if buf.len() != expected {
        return Err(IoError::EdfParse {
            offset: buf.len().min(expected),
            detail: format!(
                "{record_count} records of {record_bytes} bytes need a {expected}-byte file, found {}",
                buf.len()
            ),
        });
    }

    let mut digital: Vec<Vec<i16>> = signals
        .iter()
        .filter(|s| !s.is_annotation)
        .map(|s| Vec::with_capacity(s.samples_per_record * record_count))
        .collect();
    let mut annotations = Vec::new();
    let mut at = header_bytes;
    for _record in 0..record_count {
        let mut data_row = 0;
        for s in &signals {
            let n = s.samples_per_record;
            if s.is_annotation {
                let tal_bytes = &buf[at..at + 2 * n];
                annotations.extend(parse_tals(tal_bytes, at)?);
            } else {
                let row = &mut digital[data_row];
                for k in 0..n {
                    row.push(i16::from_le_bytes([buf[at + 2 * k], buf[at + 2 * k + 1]]));
                }
                data_row += 1;
            }
            at += 2 * n;
        }
    }

    Ok(EdfFile {
        header: EdfHeader {
            version,
            patient,
            recording,
            start_date,
            start_time,
            header_bytes,
            reserved,
            record_count,
            record_duration,
            signals,
        },
        digital,
        annotations,
    })
}

/// Time-stamped annotation lists: "+<onset>[\x15<duration>]\x14<label>\x14...\x14\x00".
/// Timekeeping TALs (empty labels) are dropped.
pub fn parse_tals(bytes: &[u8], base_offset: usize) -> Result<Vec<EdfAnnotation>, IoError> {
    let mut out = Vec::new();
    for chunk in bytes.split(|&b| b == 0x00) {
        if chunk.is_empty() {
            continue;
        }
        let text = std::str::from_utf8(chunk).map_err(|_| IoError::EdfParse {
            offset: base_offset,
            detail: "annotation bytes are not UTF-8".into(),
        })?;
        if !text.starts_with('+') && !text.starts_with('-') {
            return Err(IoError::EdfParse {
                offset: base_offset,
                detail: format!("annotation must start with a signed onset, got '{text}'"),
            });
        }
        let mut parts = text.split('\u{14}');
        let head = parts.next().unwrap_or_default();
        let (onset_txt, duration_txt) = match head.split_once('\u{15}') {
            Some((o, d)) => (o, Some(d)),
            None => (head, None),
        };
        let onset_seconds: f64 = onset_txt.parse().map_err(|_| IoError::EdfParse {
            offset: base_offset,
            detail: format!("bad annotation onset '{onset_txt}'"),
        })?;
        let duration_seconds = match duration_txt {
            None => None,
            Some(d) => Some(d.parse().map_err(|_| IoError::EdfParse {
                offset: base_offset,
                detail: format!("bad annotation duration '{d}'"),
            })?),
        };
        for label in parts {
            if label.is_empty() {
                continue;
            }
            out.push(EdfAnnotation {
                onset_seconds,
                duration_seconds,
                label: label.to_string(),
            });
        }
    }
    Ok(out)
}

pub fn read_edf_file(path: impl AsRef<Path>) -> Result<EdfFile, IoError> {
    let buf = fs::read(&path).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    parse_edf_bytes(&buf)
}

impl EdfFile {
    /// Physical value of signal `s`, digital sample `d`:
    /// (d - dmin) * (pmax - pmin) / (dmax - dmin) + pmin.
    pub fn physical(&self, signal: &EdfSignalHeader, d: i16) -> f64 {
        (d as f64 - signal.digital_min as f64)
            * (signal.physical_max - signal.physical_min)
            / (signal.digital_max as f64 - signal.digital_min as f64)
            + signal.physical_min
    }

    /// Convert to an in-memory recording: physical units, uniform sampling
    /// rate, annotations as (sample, code) events.
    pub fn to_raw_recording(&self) -> Result<RawRecording, IoError> {
        let data_signals: Vec<&EdfSignalHeader> =
            self.header.signals.iter().filter(|s| !s.is_annotation).collect();
        if data_signals.is_empty() {
            return Err(IoError::EdfParse { offset: 256, detail: "no data signals".into() });
        }
        let unit = match data_signals[0].physical_dimension.as_str() {
            "uV" | "µV" => Unit::Microvolts,
            "V" => Unit::Volts,
            other => {
                return Err(IoError::EdfParse {
                    offset: 256,
                    detail: format!("unsupported physical dimension '{other}'"),
                })
            }
        };
        if data_signals.iter().any(|s| s.physical_dimension != data_signals[0].physical_dimension)
        {
            return Err(IoError::EdfParse {
                offset: 256,
                detail: "mixed physical dimensions across data signals".into(),
            });
        }
        let spr = data_signals[0].samples_per_record;
        if data_signals.iter().any(|s| s.samples_per_record != spr) {
            return Err(IoError::EdfParse {
                offset: 256,
                detail: "mixed sampling rates across data signals".into(),
            });
        }
        if self.header.record_duration.is_nan() || self.header.record_duration <= 0.0 {
            return Err(IoError::EdfParse {
                offset: 244,
                detail: "record duration must be positive".into(),
            });
        }
        let fs = spr as f64 / self.header.record_duration;

        let data: Vec<Vec<f64>> = self
            .digital
            .iter()
            .zip(&data_signals)
            .map(|(row, s)| row.iter().map(|&d| self.physical(s, d)).collect())
            .collect();
        let events: Vec<Event> = self
            .annotations
            .iter()
            .map(|a| Event {
                onset_sample: round_half_even(a.onset_seconds * fs).max(0) as usize,
                code: a.label.clone(),
            })
            .collect();
        Ok(RawRecording {
            channel_labels: data_signals.iter().map(|s| s.label.clone()).collect(),
            data,
            sampling_rate: fs,
            unit,
            events,
        })
    }
}

// ---- writer (reference-file generator) ----

#[derive(Clone, Debug)]
pub struct EdfSignalSpec {
    pub label: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i16,
    pub digital_max: i16,
    pub samples_per_record: usize,
}

#[derive(Clone, Debug)]
pub struct EdfWriteSpec {
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub record_duration: f64,
    pub signals: Vec<EdfSignalSpec>,
    /// Per signal, length = records * samples_per_record.
    pub digital: Vec<Vec<i16>>,
    pub annotations: Vec<EdfAnnotation>,
}

fn pad(s: &str, len: usize) -> Result<Vec<u8>, IoError> {
    if s.len() > len {
        return Err(IoError::Format(format!("'{s}' does not fit a {len}-byte EDF field")));
    }
    let mut out = s.as_bytes().to_vec();
    out.resize(len, b' ');
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e7 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

const ANNOTATION_SPR: usize = 32; // 64 bytes of TAL text per record

pub fn write_edf(path: impl AsRef<Path>, spec: &EdfWriteSpec) -> Result<(), IoError> {
    if spec.signals.len() != spec.digital.len() {
        return Err(IoError::Format("one digital row per signal required".into()));
    }
    let spr0 = spec
        .signals
        .first()
        .map(|s| s.samples_per_record)
        .ok_or_else(|| IoError::Format("at least one signal required".into()))?;
    if spr0 == 0 || !spec.digital[0].len().is_multiple_of(spr0) {
        return Err(IoError::Format("digital length must be a record multiple".into()));
    }
    let records = spec.digital[0].len() / spr0;
    for (s, d) in spec.signals.iter().zip(&spec.digital) {
        if d.len() != s.samples_per_record * records {
            return Err(IoError::Format(format!(
                "signal '{}' has {} samples, expected {}",
                s.label,
                d.len(),
                s.samples_per_record * records
            )));
        }
    }
    let with_annotations = !spec.annotations.is_empty();
    let ns = spec.signals.len() + usize::from(with_annotations);

    let mut buf: Vec<u8> = Vec::new();
    buf.extend(pad("0", 8)?);
    buf.extend(pad(&spec.patient, 80)?);
    buf.extend(pad(&spec.recording, 80)?);
    buf.extend(pad(&spec.start_date, 8)?);
    buf.extend(pad(&spec.start_time, 8)?);
    buf.extend(pad(&format!("{}", 256 + 256 * ns), 8)?);
    buf.extend(pad(if with_annotations { "EDF+C" } else { "" }, 44)?);
    buf.extend(pad(&format!("{records}"), 8)?);
    buf.extend(pad(&fmt_num(spec.record_duration), 8)?);
    buf.extend(pad(&format!("{ns}"), 4)?);

    let ann_header = EdfSignalSpec {
        label: "EDF Annotations".into(),
        physical_dimension: String::new(),
        physical_min: -32768.0,
        physical_max: 32767.0,
        digital_min: -32768,
        digital_max: 32767,
        samples_per_record: ANNOTATION_SPR,
    };
    let mut all: Vec<&EdfSignalSpec> = spec.signals.iter().collect();
    if with_annotations {
        all.push(&ann_header);
    }
    for s in &all {
        buf.extend(pad(&s.label, 16)?);
    }
    for _ in &all {
        buf.extend(pad("", 80)?); // transducer
    }
    for s in &all {
        buf.extend(pad(&s.physical_dimension, 8)?);
    }
    for s in &all {
        buf.extend(pad(&fmt_num(s.physical_min), 8)?);
    }
    for s in &all {
        buf.extend(pad(&fmt_num(s.physical_max), 8)?);
    }
    for s in &all {
        buf.extend(pad(&format!("{}", s.digital_min), 8)?);
    }
    for s in &all {
        buf.extend(pad(&format!("{}", s.digital_max), 8)?);
    }
    for _ in &all {
        buf.extend(pad("", 80)?); // prefiltering
    }
    for s in &all {
        buf.extend(pad(&format!("{}", s.samples_per_record), 8)?);
    }
    for _ in &all {
        buf.extend(pad("", 32)?); // reserved
    }

    // bucket annotations into their records
    let mut by_record: BTreeMap<usize, Vec<&EdfAnnotation>> = BTreeMap::new();
    for a in &spec.annotations {
        let rec = (a.onset_seconds / spec.record_duration).floor().max(0.0) as usize;
        by_record.entry(rec.min(records.saturating_sub(1))).or_default().push(a);
    }

    for rec in 0..records {
        for (s, d) in spec.signals.iter().zip(&spec.digital) {
            let n = s.samples_per_record;
            for &v in &d[rec * n..(rec + 1) * n] {
                buf.extend(v.to_le_bytes());
            }
        }
        if with_annotations {
            let mut tal: Vec<u8> = Vec::new();
            // timekeeping TAL
            tal.extend(format!("+{}\u{14}\u{14}", fmt_num(rec as f64 * spec.record_duration)).bytes());
            tal.push(0x00);
            for a in by_record.get(&rec).into_iter().flatten() {
                let mut one = format!("+{}", fmt_num(a.onset_seconds));
                if let Some(dur) = a.duration_seconds {
                    one.push('\u{15}');
                    one.push_str(&fmt_num(dur));
                }
                one.push('\u{14}');
                one.push_str(&a.label);
                one.push('\u{14}');
                tal.extend(one.bytes());
                tal.push(0x00);
            }
            if tal.len() > 2 * ANNOTATION_SPR {
                return Err(IoError::Format(format!(
                    "record {rec} annotations need {} bytes, the channel holds {}",
                    tal.len(),
                    2 * ANNOTATION_SPR
                )));
            }
            tal.resize(2 * ANNOTATION_SPR, 0x00);
            buf.extend(tal);
        }
    }

    fs::write(&path, buf).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_signal_spec() -> EdfWriteSpec {
        let n = 50;
        let records = 4;
        let sine: Vec<i16> = (0..n * records)
            .map(|i| ((i as f64 * 0.37).sin() * 10_000.0) as i16)
            .collect();
        let ramp: Vec<i16> = (0..n * records).map(|i| (i % 3000) as i16 - 1500).collect();
        EdfWriteSpec {
            patient: "X X X X".into(),
            recording: "Startdate 01-JAN-2020".into(),
            start_date: "01.01.20".into(),
            start_time: "00.00.00".into(),
            record_duration: 1.0,
            signals: vec![
                EdfSignalSpec {
                    label: "C3".into(),
                    physical_dimension: "uV".into(),
                    physical_min: -1000.0,
                    physical_max: 1000.0,
                    digital_min: -32768,
                    digital_max: 32767,
                    samples_per_record: n,
                },
                EdfSignalSpec {
                    label: "C4".into(),
                    physical_dimension: "uV".into(),
                    physical_min: -1000.0,
                    physical_max: 1000.0,
                    digital_min: -32768,
                    digital_max: 32767,
                    samples_per_record: n,
                },
            ],
            digital: vec![sine, ramp],
            annotations: vec![
                EdfAnnotation { onset_seconds: 1.5, duration_seconds: None, label: "T1".into() },
                EdfAnnotation {
                    onset_seconds: 2.25,
                    duration_seconds: Some(0.5),
                    label: "T2".into(),
                },
            ],
        }
    }

    #[test]
    fn round_trip_is_digitally_bit_exact() {
        let dir = std::env::temp_dir().join(format!("agtc-edf-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ref.edf");
        let spec = two_signal_spec();
        write_edf(&path, &spec).unwrap();
        let parsed = read_edf_file(&path).unwrap();
        assert_eq!(parsed.digital.len(), 2);
        assert_eq!(parsed.digital[0], spec.digital[0]);
        assert_eq!(parsed.digital[1], spec.digital[1]);
        assert_eq!(parsed.header.record_count, 4);
        assert_eq!(parsed.annotations.len(), 2);
        assert_eq!(parsed.annotations[0].label, "T1");
        assert_eq!(parsed.annotations[1].duration_seconds, Some(0.5));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn physical_scaling_formula() {
        let s = EdfSignalHeader {
            label: "C3".into(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -1000.0,
            physical_max: 1000.0,
            digital_min: -32768,
            digital_max: 32767,
            prefilter: String::new(),
            samples_per_record: 1,
            is_annotation: false,
        };
        let f = EdfFile {
            header: EdfHeader {
                version: "0".into(),
                patient: String::new(),
                recording: String::new(),
                start_date: String::new(),
                start_time: String::new(),
                header_bytes: 512,
                reserved: String::new(),
                record_count: 0,
                record_duration: 1.0,
                signals: vec![s.clone()],
            },
            digital: vec![vec![]],
            annotations: vec![],
        };
        let v = f.physical(&s, 0);
        assert!((v - 0.015259).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn tal_grammar() {
        let tal = b"+1.5\x14T1\x14\x00";
        let got = parse_tals(tal, 0).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].onset_seconds, 1.5);
        assert_eq!(got[0].label, "T1");
        assert_eq!(got[0].duration_seconds, None);

        let multi = b"+2\x150.5\x14T2\x14T3\x14\x00+0\x14\x14\x00";
        let got = parse_tals(multi, 0).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].label, "T2");
        assert_eq!(got[1].label, "T3");
        assert_eq!(got[0].duration_seconds, Some(0.5));

        assert!(parse_tals(b"oops\x14T1\x14\x00", 0).is_err());
    }

    #[test]
    fn conversion_to_recording_maps_events_to_samples() {
        let dir = std::env::temp_dir().join(format!("agtc-edf2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ref.edf");
        write_edf(&path, &two_signal_spec()).unwrap();
        let rec = read_edf_file(&path).unwrap().to_raw_recording().unwrap();
        assert_eq!(rec.sampling_rate, 50.0);
        assert_eq!(rec.channel_labels, vec!["C3", "C4"]);
        assert_eq!(rec.unit, Unit::Microvolts);
        assert_eq!(rec.events[0].onset_sample, 75); // 1.5 s at 50 Hz
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn parser_is_total_on_garbage() {
        // random byte soup must come back as typed errors, never a panic
        let mut state = 0xEDFu64;
        for round in 0..300 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(round);
            let len = (state % 3000) as usize;
            let bytes: Vec<u8> = (0..len)
                .map(|i| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(i as u64);
                    (state >> 33) as u8
                })
                .collect();
            let _ = parse_edf_bytes(&bytes);
        }
        // and a header claiming absurd record sizes: the size check must
        // reject it before any allocation happens
        let mut huge = vec![b' '; 512];
        huge[0] = b'0';
        huge[184..192].copy_from_slice(b"512     "); // header bytes (1 signal)
        huge[236..244].copy_from_slice(b"99999999"); // records
        huge[244..252].copy_from_slice(b"1       "); // duration
        huge[252..256].copy_from_slice(b"1   "); // ns
        huge[256..258].copy_from_slice(b"C3"); // label
        huge[256 + 104..256 + 112].copy_from_slice(b"-1000   "); // phys min
        huge[256 + 112..256 + 120].copy_from_slice(b"1000    "); // phys max
        huge[256 + 120..256 + 128].copy_from_slice(b"-32768  "); // dig min
        huge[256 + 128..256 + 136].copy_from_slice(b"32767   "); // dig max
        huge[256 + 216..256 + 224].copy_from_slice(b"99999999"); // samples/record
        assert!(matches!(parse_edf_bytes(&huge), Err(IoError::EdfParse { .. })));
    }

    #[test]
    fn malformed_headers_are_typed_errors_with_offsets() {
        // short file
        match parse_edf_bytes(&[0u8; 100]) {
            Err(IoError::EdfParse { offset, .. }) => assert_eq!(offset, 100),
            other => panic!("{other:?}"),
        }
        // valid file then corrupted header-bytes field
        let dir = std::env::temp_dir().join(format!("agtc-edf3-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ref.edf");
        write_edf(&path, &two_signal_spec()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[184..192].copy_from_slice(b"9999    ");
        assert!(matches!(parse_edf_bytes(&bytes), Err(IoError::EdfParse { offset: 184, .. })));

        // non-numeric record count
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[236..244].copy_from_slice(b"abc     ");
        assert!(matches!(parse_edf_bytes(&bytes), Err(IoError::EdfParse { offset: 236, .. })));

        // truncated data records
        let bytes = std::fs::read(&path).unwrap();
        let cut = &bytes[..bytes.len() - 7];
        assert!(matches!(parse_edf_bytes(cut), Err(IoError::EdfParse { .. })));
        std::fs::remove_dir_all(&dir).ok();
    }
}
