//! Dataset manifests: JSON descriptions of which files hold which trials,
//! with subject/session/run provenance, class names, and (for raw
//! recordings) the event-code-to-class mapping. Exclusion lists and
//! run-dependent label maps live here, never in code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use agtc_eval::TrialMeta;
use agtc_signal::EpochedTrial;
use serde::{Deserialize, Serialize};

use crate::container::{container_to_trial, read_container};
use crate::IoError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    #[serde(default)]
    pub excluded: bool,
}

/// One source recording (EDF) or prepared trial (EEGT container).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub file: String,
    pub subject: String,
    pub session: String,
    #[serde(default)]
    pub run: String,
    /// Event code -> class index, for recordings that carry annotations.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_map: BTreeMap<String, usize>,
    /// Class of an already-epoched trial container.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    /// Half-open [start, end) window in the source timeline, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_span: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subjects: Vec<SubjectEntry>,
    pub trials: Vec<RecordingEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<DatasetManifest, IoError> {
        let text = std::fs::read_to_string(&path).map_err(|e| IoError::File {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| IoError::ManifestParse {
                path: path.as_ref().display().to_string(),
                detail: e.to_string(),
            })?;
        manifest.validate(path.as_ref())?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| IoError::File {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }

    fn validate(&self, manifest_path: &Path) -> Result<(), IoError> {
        let excluded: Vec<&str> = self
            .subjects
            .iter()
            .filter(|s| s.excluded)
            .map(|s| s.id.as_str())
            .collect();
        for (i, t) in self.trials.iter().enumerate() {
            if excluded.contains(&t.subject.as_str()) {
                return Err(IoError::ManifestParse {
                    path: manifest_path.display().to_string(),
                    detail: format!("trial {i} references excluded subject '{}'", t.subject),
                });
            }
            if let Some(label) = t.label {
                if label >= self.classes.len() {
                    return Err(IoError::ManifestParse {
                        path: manifest_path.display().to_string(),
                        detail: format!(
                            "trial {i} label {label} outside the {} declared classes",
                            self.classes.len()
                        ),
                    });
                }
            }
            for (&class, code) in t.label_map.values().zip(t.label_map.keys()) {
                if class >= self.classes.len() {
                    return Err(IoError::ManifestParse {
                        path: manifest_path.display().to_string(),
                        detail: format!("event '{code}' maps to out-of-range class {class}"),
                    });
                }
            }
            let full = resolve(manifest_path, &t.file);
            if !full.exists() {
                return Err(IoError::ManifestParse {
                    path: manifest_path.display().to_string(),
                    detail: format!("referenced file '{}' does not exist", full.display()),
                });
            }
        }
        Ok(())
    }

    /// Load every trial container listed (entries must be EEGT files).
    pub fn load_trials(&self, manifest_path: &Path) -> Result<Vec<EpochedTrial>, IoError> {
        let mut out = Vec::with_capacity(self.trials.len());
        for entry in &self.trials {
            let path = resolve(manifest_path, &entry.file);
            let container = read_container(&path)?;
            if let (Some(m), c) = (entry.label, container.label) {
                if m != c {
                    return Err(IoError::ManifestParse {
                        path: path.display().to_string(),
                        detail: format!("manifest label {m} disagrees with container label {c}"),
                    });
                }
            }
            out.push(container_to_trial(
                container,
                &entry.subject,
                &entry.session,
                &entry.run,
                entry.label,
                entry.window_span,
            ));
        }
        Ok(out)
    }

    /// Per-trial metadata for split generation and auditing; ids index the
    /// manifest order.
    pub fn trial_meta(&self, trials: &[EpochedTrial]) -> Vec<TrialMeta> {
        trials
            .iter()
            .enumerate()
            .map(|(i, t)| TrialMeta {
                trial_id: i,
                subject: t.subject_id.clone(),
                session: t.session_id.clone(),
                run: t.run_id.clone(),
                label: t.label,
                window_span: t.window_span,
            })
            .collect()
    }
}

/// Manifest-relative file resolution.
pub fn resolve(manifest_path: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}
