//! Binary model files.
//!
//! Layout (little-endian):
//! `"GPNF" | u16 version | u32 dim | u32 n_layers | u32 hidden |
//!  n_layers × (u8 kind, u8 mask) | dim × f64 shift | dim × f64 scale |
//!  n_layers × (u32 count, count × f64 params) |
//!  [32] config hash | u16 len + utf-8 tool version`.
//! The model checksum is the SHA-256 of everything before the trailer.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::coupling::CouplingLayer;
use super::{FlowModel, TransformKind, DIM};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const FLOW_MAGIC: &[u8; 4] = b"GPNF";
pub const FLOW_VERSION: u16 = 1;

/// Provenance stored alongside a model.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ArtifactMeta {
    pub config_hash: [u8; 32],
    pub tool_version: String,
}

impl FlowModel {
    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(FLOW_MAGIC);
        w.u16(FLOW_VERSION);
        w.u32(DIM as u32);
        w.u32(self.layers.len() as u32);
        w.u32(self.hidden() as u32);
        for l in &self.layers {
            w.u8(l.kind as u8);
            w.u8(l.mask);
        }
        w.f64s(&self.shift);
        w.f64s(&self.scale);
        for l in &self.layers {
            w.u32(l.params.len() as u32);
            w.f64s(&l.params);
        }
        w.buf
    }

    /// SHA-256 of the serialized parameters; identifies the model a mask
    /// cache was built for.
    pub fn checksum(&self) -> [u8; 32] {
        Sha256::digest(self.body_bytes()).into()
    }

    pub fn to_bytes(&self, meta: &ArtifactMeta) -> Vec<u8> {
        let mut w = Writer { buf: self.body_bytes() };
        w.bytes(&meta.config_hash);
        w.str16(&meta.tool_version);
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<(Self, ArtifactMeta)> {
        const WHAT: &str = "model";
        let mut r = Reader::new(WHAT, data);
        r.magic(FLOW_MAGIC)?;
        let version = r.u16()?;
        if version != FLOW_VERSION {
            return Err(Error::Version {
                what: WHAT,
                found: version,
                expected: FLOW_VERSION,
            });
        }
        let dim = r.u32()? as usize;
        if dim != DIM {
            return Err(Error::format(WHAT, format!("dimension {dim}, expected {DIM}")));
        }
        let n_layers = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        if n_layers == 0 || n_layers > 64 || hidden == 0 || hidden > 4096 {
            return Err(Error::format(WHAT, format!("implausible shape {n_layers} layers × {hidden} hidden")));
        }
        let mut heads = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let kind = r.u8()?;
            let kind = TransformKind::from_byte(kind)
                .ok_or_else(|| Error::format(WHAT, format!("unknown transform kind {kind}")))?;
            heads.push((kind, r.u8()?));
        }
        let shift: [f64; DIM] = r.f64s(DIM)?.try_into().expect("length");
        let scale: [f64; DIM] = r.f64s(DIM)?.try_into().expect("length");
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) || shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::format(WHAT, "invalid whitening statistics"));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (kind, mask) in heads {
            let count = r.u32()? as usize;
            let params = r.f64s(count.min(r.remaining() / 8 + 1))?;
            let layer = CouplingLayer::from_params(kind, mask, hidden, params)
                .ok_or_else(|| Error::format(WHAT, format!("bad layer (mask {mask:#06b}, {count} params)")))?;
            layers.push(layer);
        }
        let body_len = r.position();
        let config_hash = r.array::<32>()?;
        let tool_version = r.str16()?;
        r.finish()?;
        let model = FlowModel::from_parts(layers, shift, scale);
        debug_assert_eq!(model.body_bytes().len(), body_len);
        Ok((
            model,
            ArtifactMeta {
                config_hash,
                tool_version,
            },
        ))
    }

    pub fn save(&self, path: &Path, meta: &ArtifactMeta) -> Result<()> {
        std::fs::write(path, self.to_bytes(meta)).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, ArtifactMeta)> {
        let data = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&data)
    }
}
