//! Binary weights checkpoint.
//!
//! Layout: magic "AGTC", format version u16, a config block of structural
//! sizes as little-endian u32, then one record per tensor (name length u16,
//! name bytes, rank u8, dims u32 each, payload little-endian f64). Batch
//! norm running statistics and the positional-encoding scale are ordinary
//! records, so a checkpoint reproduces forward outputs bit for bit.
//! Dropout rates are training-time settings and are not stored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use agtc_graph::AdjacencyGraph;
use agtc_tensor::{RngStream, Tensor};

use crate::config::ModelConfig;
use crate::state::ModelState;
use crate::ModelError;

const MAGIC: &[u8; 4] = b"AGTC";
const VERSION: u16 = 1;

fn config_block(cfg: &ModelConfig) -> Vec<u32> {
    vec![
        cfg.num_channels as u32,
        cfg.num_samples as u32,
        cfg.num_classes as u32,
        cfg.ctc_filters as u32,
        cfg.ctc_kernel as u32,
        cfg.ctc_pool as u32,
        cfg.ctc_pool_stride as u32,
        cfg.gcat_heads as u32,
        cfg.gcat_out_features as u32,
        cfg.gcat_weight_kernel as u32,
        cfg.gcat_attn_kernel as u32,
        cfg.gcat_depth as u32,
        cfg.gcap_depth as u32,
        cfg.gtc_filters as u32,
        cfg.gtc_kernel as u32,
        cfg.gtc_depth as u32,
        cfg.gtc_pool as u32,
        cfg.mha_heads as u32,
        cfg.mha_key_dim as u32,
        cfg.mha_value_dim as u32,
        cfg.tce_kernel as u32,
        cfg.tce_depth as u32,
    ]
}

fn config_from_block(block: &[u32]) -> ModelConfig {
    let g = |i: usize| block[i] as usize;
    ModelConfig {
        num_channels: g(0),
        num_samples: g(1),
        num_classes: g(2),
        ctc_filters: g(3),
        ctc_kernel: g(4),
        ctc_pool: g(5),
        ctc_pool_stride: g(6),
        gcat_heads: g(7),
        gcat_out_features: g(8),
        gcat_weight_kernel: g(9),
        gcat_attn_kernel: g(10),
        gcat_depth: g(11),
        gcap_depth: g(12),
        gtc_filters: g(13),
        gtc_kernel: g(14),
        gtc_depth: g(15),
        gtc_pool: g(16),
        mha_heads: g(17),
        mha_key_dim: g(18),
        mha_value_dim: g(19),
        tce_kernel: g(20),
        tce_depth: g(21),
        ..ModelConfig::default()
    }
}

fn write_record<W: Write>(w: &mut W, name: &str, t: &Tensor) -> std::io::Result<()> {
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[t.rank() as u8])?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Serialize every parameter and running statistic.
pub fn save_weights(model: &ModelState, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let block = config_block(&model.config);
    w.write_all(&(block.len() as u16).to_le_bytes())?;
    for v in block {
        w.write_all(&v.to_le_bytes())?;
    }
    for p in model.params() {
        write_record(&mut w, &p.name, &p.value)?;
    }
    for (site, bn) in model.bn_states() {
        write_record(&mut w, &format!("{site}.running_mean"), &bn.running_mean)?;
        write_record(&mut w, &format!("{site}.running_var"), &bn.running_var)?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R: Read> {
    inner: R,
    offset: usize,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<(), ModelError> {
        self.inner.read_exact(buf).map_err(|_| ModelError::Corrupt {
            detail: format!("unexpected end of file at byte {}", self.offset),
        })?;
        self.offset += buf.len();
        Ok(())
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        let mut b = [0u8; 2];
        self.exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    /// None cleanly at a record boundary, error mid-record.
    fn maybe_u16(&mut self) -> Result<Option<u16>, ModelError> {
        let mut b = [0u8; 2];
        let mut got = 0;
        while got < 2 {
            let n = self.inner.read(&mut b[got..]).map_err(|e| ModelError::Corrupt {
                detail: format!("read error at byte {}: {e}", self.offset),
            })?;
            if n == 0 {
                if got == 0 {
                    return Ok(None);
                }
                return Err(ModelError::Corrupt {
                    detail: format!("unexpected end of file at byte {}", self.offset),
                });
            }
            got += n;
            self.offset += n;
        }
        Ok(Some(u16::from_le_bytes(b)))
    }
}

/// Peek only the stored configuration (for CLI tools that rebuild a model
/// from a checkpoint plus a montage).
pub fn read_weights_config(path: impl AsRef<Path>) -> Result<ModelConfig, ModelError> {
    let mut r = Reader { inner: BufReader::new(File::open(path)?), offset: 0 };
    let mut magic = [0u8; 4];
    r.exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(ModelError::BadVersion(version));
    }
    let n = r.u16()? as usize;
    let mut block = Vec::with_capacity(n);
    for _ in 0..n {
        block.push(r.u32()?);
    }
    if n != config_block(&ModelConfig::default()).len() {
        return Err(ModelError::Corrupt { detail: format!("config block has {n} fields") });
    }
    Ok(config_from_block(&block))
}

/// Rebuild a model from a checkpoint. Every stored tensor is validated
/// against the target configuration's expected shape (the first mismatch is
/// reported by name), the name sets must match exactly, and nothing is
/// mutated until the whole file has parsed.
pub fn load_weights(
    path: impl AsRef<Path>,
    config: ModelConfig,
    adjacency: AdjacencyGraph,
) -> Result<ModelState, ModelError> {
    let stored_config = read_weights_config(&path)?;
    let mut r = Reader { inner: BufReader::new(File::open(&path)?), offset: 0 };
    // skip the header we just validated
    let mut skip = vec![0u8; 4 + 2 + 2 + 4 * config_block(&stored_config).len()];
    r.exact(&mut skip)?;

    let mut records: BTreeMap<String, Tensor> = BTreeMap::new();
    while let Some(name_len) = r.maybe_u16()? {
        let mut name_bytes = vec![0u8; name_len as usize];
        r.exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| ModelError::Corrupt { detail: "non-UTF8 tensor name".into() })?;
        let mut rank = [0u8; 1];
        r.exact(&mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        if numel > 100_000_000 {
            return Err(ModelError::Corrupt {
                detail: format!("implausible tensor size {numel} for '{name}'"),
            });
        }
        let mut data = Vec::with_capacity(numel);
        let mut b = [0u8; 8];
        for _ in 0..numel {
            r.exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        if records.insert(name.clone(), Tensor::new(&shape, data)).is_some() {
            return Err(ModelError::Corrupt { detail: format!("duplicate tensor '{name}'") });
        }
    }

    // scaffold with the target config, then swap in the stored tensors
    let mut model = ModelState::new(config, adjacency, &mut RngStream::new(0))?;

    let mut expected: Vec<(String, Vec<usize>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    for (site, bn) in model.bn_states() {
        expected.push((format!("{site}.running_mean"), bn.running_mean.shape().to_vec()));
        expected.push((format!("{site}.running_var"), bn.running_var.shape().to_vec()));
    }

    let mut missing = Vec::new();
    for (name, shape) in &expected {
        match records.get(name) {
            None => missing.push(name.clone()),
            Some(t) if t.shape() != &shape[..] => {
                return Err(ModelError::TensorShape {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            Some(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(ModelError::MissingTensors { names: missing });
    }
    let expected_names: std::collections::BTreeSet<&String> =
        expected.iter().map(|(n, _)| n).collect();
    if let Some(unknown) = records.keys().find(|k| !expected_names.contains(k)) {
        return Err(ModelError::UnknownTensor { name: unknown.clone() });
    }

    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    for name in names {
        let t = records.remove(&name).expect("validated present");
        model.param_mut(&name).unwrap().value = t;
    }
    let sites: Vec<String> = model.bn_states().iter().map(|(s, _)| s.clone()).collect();
    for site in sites {
        let mean = records.remove(&format!("{site}.running_mean")).expect("validated");
        let var = records.remove(&format!("{site}.running_var")).expect("validated");
        let idx = model.bn_idx(&site);
        let st = model.bn_state_mut_idx(idx);
        st.running_mean = mean;
        st.running_var = var;
    }
    Ok(model)
}
