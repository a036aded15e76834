//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `TXMCKPT1`, a little-endian `u32` header
//! length, a JSON header (encoder config, vocabulary, and a name/shape table
//! for every tensor), then every tensor's values as little-endian `f64` in
//! header order. Loading reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderConfig, Parameters};
use crate::data::Vocabulary;
use crate::util::write_atomic;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TXMCKPT1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    encoder: EncoderConfig,
    vocabulary: Vec<String>,
    tensors: Vec<TensorHeader>,
}

/// A trained encoder together with the vocabulary that produced its ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: Encoder,
    pub vocabulary: Vocabulary,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.encoder.params.tensors();
        let header = Header {
            format_version: FORMAT_VERSION,
            encoder: self.encoder.config().clone(),
            vocabulary: self.vocabulary.words().to_vec(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorHeader {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 8 * self.encoder.params.num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in tensors {
            for x in t.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body_start = 12 + header_len;
        let header_bytes = bytes.get(12..body_start).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let mut params = Parameters::zeros(&header.encoder);
        let body = &bytes[body_start..];
        let mut offset = 0;
        {
            let tensors = params.tensors_mut();
            if tensors.len() != header.tensors.len() {
                return Err(bad("tensor count does not match config"));
            }
            for ((name, mut t), th) in tensors.into_iter().zip(&header.tensors) {
                if *name != th.name || t.shape() != th.shape.as_slice() {
                    return Err(Error::Checkpoint(format!(
                        "tensor {} {:?} does not match expected {name} {:?}",
                        th.name,
                        th.shape,
                        t.shape()
                    )));
                }
                for x in t.iter_mut() {
                    let chunk = body.get(offset..offset + 8).ok_or_else(|| bad("truncated tensor data"))?;
                    *x = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                    offset += 8;
                }
            }
        }
        if offset != body.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        let vocabulary = Vocabulary::from_words(header.vocabulary)?;
        if vocabulary.len() > header.encoder.vocab_size {
            return Err(bad("vocabulary larger than the encoder's vocab_size"));
        }
        Ok(Checkpoint {
            encoder: Encoder::from_parts(header.encoder, params)?,
            vocabulary,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
