//! Single-file archive of named `f64` tensors plus a JSON metadata block.
//! Used for checkpoints: `{subnet}/{layer}/{tensor}` keys, little-endian
//! payload, bit-exact round trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FDTA0001";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    key: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

pub struct ArchiveWriter {
    entries: Vec<TensorEntry>,
    payload: Vec<f64>,
    meta: serde_json::Value,
}

impl ArchiveWriter {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            entries: Vec::new(),
            payload: Vec::new(),
            meta,
        }
    }

    pub fn add(&mut self, key: &str, shape: &[usize], data: &[f64]) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor {key}");
        self.entries.push(TensorEntry {
            key: key.to_string(),
            shape: shape.to_vec(),
            offset: self.payload.len(),
            len: data.len(),
        });
        self.payload.extend_from_slice(data);
    }

    pub fn write(self, path: impl AsRef<Path>) -> Result<()> {
        let header = Header {
            format_version: FORMAT_VERSION,
            meta: self.meta,
            tensors: self.entries,
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(MAGIC)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for v in &self.payload {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct Archive {
    pub meta: serde_json::Value,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Archive {
    pub fn read(path: impl AsRef<Path>) -> Result<Archive> {
        let mut r = BufReader::new(File::open(path.as_ref())?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a tensor archive".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let hlen = u64::from_le_bytes(len) as usize;
        let mut header_bytes = vec![0u8; hlen];
        r.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported archive version {}",
                header.format_version
            )));
        }
        let mut payload_bytes = Vec::new();
        r.read_to_end(&mut payload_bytes)?;
        let payload: Vec<f64> = payload_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let end = e.offset + e.len;
            if end > payload.len() {
                return Err(Error::Checkpoint(format!("tensor {} out of bounds", e.key)));
            }
            tensors.push((e.key, e.shape, payload[e.offset..end].to_vec()));
        }
        Ok(Archive {
            meta: header.meta,
            tensors,
        })
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &[usize], &[f64])> {
        self.tensors
            .iter()
            .map(|(k, s, d)| (k.as_str(), s.as_slice(), d.as_slice()))
    }

    pub fn get(&self, key: &str) -> Option<(&[usize], &[f64])> {
        self.tensors
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
    }
}
