//! Named, ordered parameter storage plus the checkpoint format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::tensor_archive::{Archive, ArchiveWriter};
use crate::networks::config::NetworkConfig;
use crate::nn::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum SubnetId {
    Coarse,
    Parsing,
    Fine,
    Discriminator,
}

impl SubnetId {
    pub const ALL: [SubnetId; 4] = [
        SubnetId::Coarse,
        SubnetId::Parsing,
        SubnetId::Fine,
        SubnetId::Discriminator,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            SubnetId::Coarse => "coarse",
            SubnetId::Parsing => "parsing",
            SubnetId::Fine => "fine",
            SubnetId::Discriminator => "discriminator",
        }
    }
}

/// Ordered list of named tensors; the order is the registration order on
/// the tape and the optimizer-state order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    /// Register every tensor on the tape, as leaves when trainable and
    /// constants when frozen.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, t)| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// FNV-1a over the exact bit patterns; used by the freeze contract.
    pub fn bit_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for (name, t) in &self.entries {
            eat(name.as_bytes());
            for v in t.data() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }
}

/// Cursor over registered tape vars, consumed in declaration order.
pub struct VarCursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl<'a> VarCursor<'a> {
    pub fn new(vars: &'a [Var]) -> VarCursor<'a> {
        VarCursor { vars, pos: 0 }
    }

    pub fn next(&mut self) -> Var {
        let v = self.vars[self.pos];
        self.pos += 1;
        v
    }

    pub fn finish(self) {
        assert_eq!(self.pos, self.vars.len(), "unused parameters in forward pass");
    }
}

/// All trainable state of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub coarse: ParamSet,
    pub parsing: ParamSet,
    pub fine: ParamSet,
    pub discriminator: ParamSet,
}

impl ModelParams {
    pub fn get(&self, id: SubnetId) -> &ParamSet {
        match id {
            SubnetId::Coarse => &self.coarse,
            SubnetId::Parsing => &self.parsing,
            SubnetId::Fine => &self.fine,
            SubnetId::Discriminator => &self.discriminator,
        }
    }

    pub fn get_mut(&mut self, id: SubnetId) -> &mut ParamSet {
        match id {
            SubnetId::Coarse => &mut self.coarse,
            SubnetId::Parsing => &mut self.parsing,
            SubnetId::Fine => &mut self.fine,
            SubnetId::Discriminator => &mut self.discriminator,
        }
    }

    pub fn total_numel(&self) -> usize {
        SubnetId::ALL.iter().map(|id| self.get(*id).numel()).sum()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    format: String,
    network: NetworkConfig,
    stage: Option<u8>,
    extra: serde_json::Value,
}

const CHECKPOINT_FORMAT: &str = "facedeblur-checkpoint-v1";

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    network: &NetworkConfig,
    stage: Option<u8>,
    extra: serde_json::Value,
) -> Result<()> {
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.to_string(),
        network: network.clone(),
        stage,
        extra,
    };
    let mut writer = ArchiveWriter::new(serde_json::to_value(&meta)?);
    for id in SubnetId::ALL {
        for (name, t) in params.get(id).iter() {
            writer.add(&format!("{}/{}", id.key(), name), t.shape(), t.data());
        }
    }
    writer.write(path)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, NetworkConfig, Option<u8>)> {
    let archive = Archive::read(path)?;
    let meta: CheckpointMeta = serde_json::from_value(archive.meta.clone())?;
    if meta.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {:?}",
            meta.format
        )));
    }
    let mut params = ModelParams {
        coarse: ParamSet::new(),
        parsing: ParamSet::new(),
        fine: ParamSet::new(),
        discriminator: ParamSet::new(),
    };
    for (key, shape, data) in archive.tensors() {
        let (subnet, name) = key
            .split_once('/')
            .ok_or_else(|| Error::Checkpoint(format!("bad tensor key {key:?}")))?;
        let tensor = Tensor::from_vec(shape, data.to_vec())?;
        let set = match subnet {
            "coarse" => &mut params.coarse,
            "parsing" => &mut params.parsing,
            "fine" => &mut params.fine,
            "discriminator" => &mut params.discriminator,
            other => {
                return Err(Error::Checkpoint(format!("unknown subnet {other:?}")));
            }
        };
        set.push(name, tensor);
    }
    Ok((params, meta.network, meta.stage))
}
