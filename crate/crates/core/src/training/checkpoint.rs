//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `ICDATTN\0` |
//! | 4 | format version (`u32`) |
//! | 8 | header length `L` (`u64`) |
//! | L | JSON header: config, epoch, threshold, Adam step count, codes, vocabularies, tensor names and lengths |
//! | 8·N | every parameter tensor in header order, then Adam first moments, then second moments, as `f64` |
//! | 8 | FNV-1a 64 hash of all preceding bytes |
//!
//! The header is serialized from fixed-order structs, so equal checkpoints
//! produce identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::corpus::{CharVocab, CodeDefinition, WordVocab};
use crate::encoders::Vocabs;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::AttentionModel;
use crate::numerics::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ICDATTN\0";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: TrainConfig,
    pub model: AttentionModel<f64>,
    pub adam: AdamState<f64>,
    pub epoch: usize,
    /// Decision threshold tuned on validation when the checkpoint was taken.
    pub threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    epoch: u64,
    threshold: f64,
    adam_steps: u64,
    codes: Vec<CodeDefinition>,
    chars: Vec<char>,
    words: Vec<String>,
    tensors: Vec<(String, u64)>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl ModelCheckpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.model.config != self.config.model_config() {
            return Err(Error::Checkpoint("model does not match its training config".into()));
        }
        let tensors = self.model.params.tensors();
        let header = Header {
            config: self.config.clone(),
            epoch: self.epoch as u64,
            threshold: self.threshold,
            adam_steps: self.adam.steps(),
            codes: self.model.codes().to_vec(),
            chars: self.model.vocabs.chars.symbols().to_vec(),
            words: self.model.vocabs.words.symbols().to_vec(),
            tensors: tensors.iter().map(|(n, t)| (n.clone(), t.len() as u64)).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(json.len() + 64 + 24 * self.model.params.num_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let moments = self.adam.first_moments().iter().chain(self.adam.second_moments());
        for t in tensors.iter().map(|(_, t)| *t).chain(moments.map(Vec::as_slice)) {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sum = fnv1a(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 28 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads {CHECKPOINT_VERSION})"
            )));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv1a(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
            return Err(bad("checksum mismatch (file is corrupt or truncated)"));
        }
        let hlen = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
        let json = body
            .get(20..20usize.saturating_add(hlen))
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        header.config.validate()?;

        let mut payload = body[20 + hlen..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        if !(body.len() - 20 - hlen).is_multiple_of(8) {
            return Err(bad("payload is not a whole number of values"));
        }
        let total: u64 = header.tensors.iter().map(|(_, n)| n).sum();
        if (body.len() - 20 - hlen) as u64 != 3 * total * 8 {
            return Err(bad("payload size does not match the header"));
        }
        let mut take = |n: u64| -> Vec<f64> { payload.by_ref().take(n as usize).collect() };
        let values: Vec<Vec<f64>> = header.tensors.iter().map(|(_, n)| take(*n)).collect();
        let m: Vec<Vec<f64>> = header.tensors.iter().map(|(_, n)| take(*n)).collect();
        let v: Vec<Vec<f64>> = header.tensors.iter().map(|(_, n)| take(*n)).collect();

        let vocabs = Vocabs {
            chars: CharVocab::from_symbols(header.chars),
            words: WordVocab::from_symbols(header.words),
        };
        let mut model = AttentionModel::<f64>::zeros(header.config.model_config(), vocabs, header.codes)?;
        {
            let mut slots = model.params.tensors_mut();
            if slots.len() != header.tensors.len() {
                return Err(bad("tensor list does not match the config"));
            }
            for ((name, dst), ((hname, _), src)) in slots.iter_mut().zip(header.tensors.iter().zip(&values)) {
                if name != hname || dst.len() != src.len() {
                    return Err(Error::Checkpoint(format!("tensor {hname} does not fit {name}")));
                }
                dst.copy_from_slice(src);
            }
        }
        let adam = AdamState::from_parts(header.config.adam_config(), header.adam_steps, m, v)?;
        Ok(Self {
            config: header.config,
            model,
            adam,
            epoch: header.epoch as usize,
            threshold: header.threshold,
        })
    }
}

/// Writes atomically: a failed save leaves any previous file intact.
pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelCheckpoint::from_bytes(&bytes)
}
