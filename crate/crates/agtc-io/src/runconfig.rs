//! Flat sectioned key-value run configuration.
//!
//! The format is deliberately strict: `[section]` headers, `key = value`
//! lines, `#` comments. Unknown sections or keys are errors, so typos never
//! silently change a run. The raw text is kept for provenance hashing and
//! is echoed into outputs.

use std::collections::BTreeMap;
use std::path::Path;

use agtc_eval::Framework;
use agtc_model::ModelConfig;
use agtc_train::{Hyper, LossKind, SchedulerState};

use crate::IoError;

/// FNV-1a 64 content fingerprint, rendered as 16 hex digits.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01B3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    /// Raw text, echoed into outputs for attribution.
    pub raw: String,
    pub manifest: Option<String>,
    pub montage: Option<String>,
    pub plan: Option<String>,
    pub framework: Option<Framework>,
    pub k: Option<usize>,
    pub subject: Option<String>,
    pub fold: Option<usize>,
    pub timeframe: Option<(f64, f64)>,
    pub target_fs: Option<f64>,
    pub seed: u64,
    pub output_dir: String,
    pub model_preset: Option<String>,
    pub model_overrides: BTreeMap<String, f64>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: Option<f64>,
    pub loss: LossKind,
    pub early_stop_patience: usize,
    pub lr_decay: bool,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        content_hash(self.raw.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, IoError> {
        let text = std::fs::read_to_string(&path).map_err(|e| IoError::File {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, IoError> {
        let mut cfg = RunConfig {
            raw: text.to_string(),
            seed: 0,
            output_dir: "out".into(),
            max_epochs: 1000,
            batch_size: 32,
            loss: LossKind::Cce,
            early_stop_patience: 300,
            lr_decay: true,
            ..RunConfig::default()
        };
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_lowercase();
                if !["data", "split", "model", "training", "output"].contains(&section.as_str()) {
                    return Err(IoError::Config {
                        line: lineno + 1,
                        detail: format!("unknown section [{section}]"),
                    });
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(IoError::Config {
                    line: lineno + 1,
                    detail: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim().to_lowercase();
            let value = value.trim().to_string();
            cfg.apply(&section, &key, &value, lineno + 1)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), IoError> {
        let bad_key = || IoError::Config {
            line,
            detail: format!("unknown key '{key}' in section [{section}]"),
        };
        let bad_value = |what: &str| IoError::Config {
            line,
            detail: format!("cannot parse {what} from '{value}' for key '{key}'"),
        };
        match (section, key) {
            ("data", "manifest") => self.manifest = Some(value.into()),
            ("data", "montage") => self.montage = Some(value.into()),
            ("data", "target_fs") => {
                self.target_fs = Some(value.parse().map_err(|_| bad_value("a rate"))?)
            }
            ("data", "t_start") => {
                let t: f64 = value.parse().map_err(|_| bad_value("seconds"))?;
                self.timeframe = Some((t, self.timeframe.map(|x| x.1).unwrap_or(t + 1.0)));
            }
            ("data", "t_end") => {
                let t: f64 = value.parse().map_err(|_| bad_value("seconds"))?;
                self.timeframe = Some((self.timeframe.map(|x| x.0).unwrap_or(0.0), t));
            }
            ("split", "plan") => self.plan = Some(value.into()),
            ("split", "framework") => {
                self.framework = Some(
                    Framework::parse(value).ok_or_else(|| bad_value("a framework name"))?,
                )
            }
            ("split", "k") => self.k = Some(value.parse().map_err(|_| bad_value("an integer"))?),
            ("split", "subject") => self.subject = Some(value.into()),
            ("split", "fold") => {
                if value != "all" {
                    self.fold = Some(value.parse().map_err(|_| bad_value("a fold index"))?);
                }
            }
            ("model", "preset") => self.model_preset = Some(value.to_lowercase()),
            ("model", _) if MODEL_KEYS.contains(&key) => {
                let v: f64 = value.parse().map_err(|_| bad_value("a number"))?;
                self.model_overrides.insert(key.to_string(), v);
            }
            ("training", "max_epochs") => {
                self.max_epochs = value.parse().map_err(|_| bad_value("an integer"))?
            }
            ("training", "batch_size") => {
                self.batch_size = value.parse().map_err(|_| bad_value("an integer"))?
            }
            ("training", "learning_rate") => {
                self.learning_rate = Some(value.parse().map_err(|_| bad_value("a rate"))?)
            }
            ("training", "loss") => {
                self.loss = match value.to_lowercase().as_str() {
                    "cce" => LossKind::Cce,
                    "bce" => LossKind::Bce,
                    _ => return Err(bad_value("cce or bce")),
                }
            }
            ("training", "early_stop_patience") => {
                self.early_stop_patience = value.parse().map_err(|_| bad_value("an integer"))?
            }
            ("training", "lr_decay") => {
                self.lr_decay = match value.to_lowercase().as_str() {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(bad_value("a boolean")),
                }
            }
            ("training", "seed") => {
                self.seed = value.parse().map_err(|_| bad_value("an integer"))?
            }
            ("output", "dir") => self.output_dir = value.into(),
            _ => return Err(bad_key()),
        }
        Ok(())
    }

    /// Assemble the model configuration: preset (or dataset-derived shape),
    /// then numeric overrides.
    pub fn model_config(
        &self,
        channels: usize,
        samples: usize,
        classes: usize,
    ) -> Result<ModelConfig, IoError> {
        let mut cfg = match self.model_preset.as_deref() {
            None => ModelConfig {
                num_channels: channels,
                num_samples: samples,
                num_classes: classes,
                ..ModelConfig::default()
            },
            Some("bciciv2a") => ModelConfig::bciciv2a(),
            Some("eegmmidb4") => ModelConfig::eegmmidb(4),
            Some("eegmmidb2") => ModelConfig::eegmmidb(2),
            Some("micro") => ModelConfig {
                num_channels: channels,
                num_samples: samples,
                num_classes: classes,
                ..ModelConfig::micro()
            },
            Some(other) => {
                return Err(IoError::Config {
                    line: 0,
                    detail: format!("unknown model preset '{other}'"),
                })
            }
        };
        if self.model_preset.is_some() && self.model_preset.as_deref() != Some("micro") {
            cfg.num_channels = channels;
            cfg.num_samples = samples;
            cfg.num_classes = classes;
        }
        for (key, &v) in &self.model_overrides {
            apply_model_override(&mut cfg, key, v);
        }
        Ok(cfg)
    }

    pub fn hyper(&self, tag: &str) -> Hyper {
        Hyper {
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate.unwrap_or(1e-3),
            loss: self.loss,
            early_stop_patience: self.early_stop_patience,
            lr_decay: self.lr_decay,
            scheduler: SchedulerState::default(),
            tag: tag.to_string(),
        }
    }
}

const MODEL_KEYS: &[&str] = &[
    "ctc_filters",
    "ctc_kernel",
    "ctc_pool",
    "ctc_pool_stride",
    "gcat_heads",
    "gcat_out_features",
    "gcat_weight_kernel",
    "gcat_attn_kernel",
    "gcat_depth",
    "gcat_attn_dropout",
    "gcat_dropout",
    "gcap_depth",
    "gtc_filters",
    "gtc_kernel",
    "gtc_depth",
    "gtc_pool",
    "gtc_dropout",
    "mha_heads",
    "mha_key_dim",
    "mha_value_dim",
    "mha_dropout",
    "tce_mha_dropout",
    "tce_kernel",
    "tce_depth",
    "tce_dropout",
];

fn apply_model_override(cfg: &mut ModelConfig, key: &str, v: f64) {
    let u = v as usize;
    match key {
        "ctc_filters" => cfg.ctc_filters = u,
        "ctc_kernel" => cfg.ctc_kernel = u,
        "ctc_pool" => cfg.ctc_pool = u,
        "ctc_pool_stride" => cfg.ctc_pool_stride = u,
        "gcat_heads" => cfg.gcat_heads = u,
        "gcat_out_features" => cfg.gcat_out_features = u,
        "gcat_weight_kernel" => cfg.gcat_weight_kernel = u,
        "gcat_attn_kernel" => cfg.gcat_attn_kernel = u,
        "gcat_depth" => cfg.gcat_depth = u,
        "gcat_attn_dropout" => cfg.gcat_attn_dropout = v,
        "gcat_dropout" => cfg.gcat_dropout = v,
        "gcap_depth" => cfg.gcap_depth = u,
        "gtc_filters" => cfg.gtc_filters = u,
        "gtc_kernel" => cfg.gtc_kernel = u,
        "gtc_depth" => cfg.gtc_depth = u,
        "gtc_pool" => cfg.gtc_pool = u,
        "gtc_dropout" => cfg.gtc_dropout = v,
        "mha_heads" => cfg.mha_heads = u,
        "mha_key_dim" => cfg.mha_key_dim = u,
        "mha_value_dim" => cfg.mha_value_dim = u,
        "mha_dropout" => cfg.mha_dropout = v,
        "tce_mha_dropout" => cfg.tce_mha_dropout = v,
        "tce_kernel" => cfg.tce_kernel = u,
        "tce_depth" => cfg.tce_depth = u,
        "tce_dropout" => cfg.tce_dropout = v,
        _ => unreachable!("key list is closed"),
    }
}
