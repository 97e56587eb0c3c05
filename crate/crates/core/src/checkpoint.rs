//! `MPLCKPT1` parameter files.
//!
//! Layout: the magic `MPLCKPT1`, a `u64` little-endian header length, a JSON
//! header `{"arch": .., "step": ..}`, a `u64` parameter count, then that many
//! little-endian `f64` values in the flat layout of [`crate::model`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::model::{Architecture, ParamVector};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MPLCKPT1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Architecture,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub step: u64,
}

pub fn encode_checkpoint(params: &ParamVector, step: u64) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        arch: *params.arch(),
        step,
    };
    let mut w = Writer::new(CHECKPOINT_MAGIC, &header)?;
    w.u64(params.len() as u64);
    for &v in params.values() {
        w.f64(v);
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(data: &[u8]) -> Result<Checkpoint> {
    let (mut r, header): (_, CheckpointHeader) = Reader::open("checkpoint", CHECKPOINT_MAGIC, data)?;
    header.arch.validate().map_err(|e| r.malformed(e.to_string()))?;
    let count_at = r.offset();
    let count = r.u64()?;
    let expected = header.arch.param_count() as u64;
    if count != expected {
        return Err(Error::Malformed {
            kind: "checkpoint",
            offset: count_at,
            detail: format!("parameter count {count} does not match architecture ({expected})"),
        });
    }
    let mut values = Vec::with_capacity(expected as usize);
    for _ in 0..count {
        values.push(r.f64()?);
    }
    r.finish()?;
    let params = ParamVector::new(header.arch, values).map_err(|e| r.malformed(e.to_string()))?;
    Ok(Checkpoint {
        params,
        step: header.step,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParamVector, step: u64) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params, step)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&data)
}
