//! `.wvr` checkpoint container.
//!
//! Layout: 8-byte magic `WVRCKPT1`, u64 little-endian header length, UTF-8
//! JSON header, then the tensor payloads back to back in directory order as
//! little-endian IEEE-754 values of the header's `dtype`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{init_params, ModelConfig, ParameterSet, Tensor};

pub const FORMAT_VERSION: u32 = 1;
pub const MAGIC: &[u8; 8] = b"WVRCKPT1";
pub const EXTENSION: &str = "wvr";

/// One corpus a checkpoint has been trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub corpus: String,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParameterSet,
    /// Total declared size of every corpus in `history`.
    pub cumulative_examples: usize,
    pub model_config: ModelConfig,
    pub history: Vec<HistoryEntry>,
    pub format_version: u32,
}

impl Checkpoint {
    /// Untrained starting point.
    pub fn base(config: &ModelConfig) -> Result<Self> {
        Ok(Self::from_params(config.clone(), init_params(config)?))
    }

    pub fn from_params(model_config: ModelConfig, params: ParameterSet) -> Self {
        Self { params, cumulative_examples: 0, model_config, history: Vec::new(), format_version: FORMAT_VERSION }
    }

    /// Successor checkpoint after training on one more corpus.
    pub fn advanced(&self, params: ParameterSet, corpus: &str, examples: usize) -> Self {
        let mut history = self.history.clone();
        history.push(HistoryEntry { corpus: corpus.to_string(), examples });
        Self {
            params,
            cumulative_examples: self.cumulative_examples + examples,
            model_config: self.model_config.clone(),
            history,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: usize = self.history.iter().map(|h| h.examples).sum();
        if sum != self.cumulative_examples {
            return Err(Error::Validation(format!(
                "cumulative_examples {} does not match history total {sum}",
                self.cumulative_examples
            )));
        }
        if !self.params.is_finite() {
            return Err(Error::Validation("checkpoint contains non-finite parameters".into()));
        }
        self.params.check_config(&self.model_config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Dtype {
    F64Le,
    F32Le,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64Le => 8,
            Dtype::F32Le => 4,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    layer: usize,
    offset: usize,
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model_config: ModelConfig,
    cumulative_examples: usize,
    history: Vec<HistoryEntry>,
    dtype: Dtype,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, mut sink: impl Write) -> Result<()> {
    ckpt.validate()?;
    let mut offset = 0;
    let tensors = ckpt
        .params
        .tensors()
        .iter()
        .map(|t| {
            let length = t.data.len() * 8;
            let e = TensorEntry { name: t.name.clone(), shape: t.shape.clone(), layer: t.layer, offset, length };
            offset += length;
            e
        })
        .collect();
    let header = Header {
        format_version: ckpt.format_version,
        model_config: ckpt.model_config.clone(),
        cumulative_examples: ckpt.cumulative_examples,
        history: ckpt.history.clone(),
        dtype: Dtype::F64Le,
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + offset);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in ckpt.params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(mut source: impl Read) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let fmt = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 16 {
        return Err(fmt("file shorter than the fixed preamble"));
    }
    if &bytes[..8] != MAGIC {
        return Err(fmt("bad magic bytes"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| fmt("truncated header"))?;
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes[16..header_end]).map_err(|e| Error::Format(format!("header: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| fmt("header lacks format_version"))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion { found: version as u32, supported: FORMAT_VERSION });
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| Error::Format(format!("header: {e}")))?;

    let payload = &bytes[header_end..];
    let width = header.dtype.width();
    let mut expected_offset = 0;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let count: usize = e.shape.iter().product();
        if e.offset != expected_offset || e.length != count * width {
            return Err(Error::Format(format!("tensor {} has an inconsistent directory entry", e.name)));
        }
        let end = e.offset + e.length;
        if end > payload.len() {
            return Err(Error::Format(format!("payload truncated inside tensor {}", e.name)));
        }
        let chunk = &payload[e.offset..end];
        let data: Vec<f64> = match header.dtype {
            Dtype::F64Le => chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            Dtype::F32Le => chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        };
        tensors.push(Tensor { name: e.name, shape: e.shape, layer: e.layer, data });
        expected_offset = end;
    }
    if expected_offset != payload.len() {
        return Err(fmt("trailing bytes after the last tensor"));
    }
    let ckpt = Checkpoint {
        params: ParameterSet::from_tensors(tensors)?,
        cumulative_examples: header.cumulative_examples,
        model_config: header.model_config,
        history: header.history,
        format_version: header.format_version,
    };
    ckpt.validate()?;
    Ok(ckpt)
}

/// Writes next to `path` and renames into place, so readers never observe a
/// partially written file.
pub fn write_checkpoint_file(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    save_checkpoint(ckpt, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn read_checkpoint_file(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(fs::File::open(path)?)
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
