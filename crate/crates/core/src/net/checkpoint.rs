//! Binary checkpoints (`HGCK`), little-endian.
//!
//! Layout: magic, version u32, config (c_in, width, blocks, k, time_dim as
//! u32), tensor count u32, then per tensor: name length u16, UTF-8 name,
//! rank u8, dims u64 × rank, f64 data in row-major order. Optional tagged
//! sections follow: `META` (u32-prefixed key=value text) and `OPTM`
//! (step u64, tensor count u32, tensors as above).

use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::{ModelParams, NetConfig};
use crate::io_util::{read_file, write_atomic, BinReader, BinWriter};
use crate::Result;

pub const MAGIC: &[u8; 4] = b"HGCK";
pub const VERSION: u32 = 1;
const META_TAG: &[u8; 4] = b"META";
const OPTIMIZER_TAG: &[u8; 4] = b"OPTM";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub data: ArrayD<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSection {
    pub step: u64,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Free-form `key=value` lines (schedule, training step, ...).
    pub metadata: String,
    pub optimizer: Option<OptimizerSection>,
}

fn write_tensor(w: &mut BinWriter, name: &str, data: ndarray::ArrayViewD<f64>) {
    w.u16(name.len() as u16);
    w.bytes(name.as_bytes());
    w.u8(data.ndim() as u8);
    for &d in data.shape() {
        w.u64(d as u64);
    }
    for &v in data.iter() {
        w.f64(v);
    }
}

fn read_tensor(r: &mut BinReader) -> Result<NamedTensor> {
    let len = r.u16()? as usize;
    let name = std::str::from_utf8(r.take(len)?)
        .map_err(|_| r.error("tensor name is not UTF-8"))?
        .to_string();
    let rank = r.u8()? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(r.u64()? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| r.error(format!("tensor {name}: dimensions overflow")))?;
    let data = r.f64s(count)?;
    let data = ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| r.error(e.to_string()))?;
    Ok(NamedTensor { name, data })
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let c = ckpt.params.config;
    let mut w = BinWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    for v in [c.c_in, c.width, c.blocks, c.k, c.time_dim] {
        w.u32(v as u32);
    }
    let tensors = ckpt.params.tensors();
    w.u32(tensors.len() as u32);
    for (name, t) in &tensors {
        write_tensor(&mut w, name, t.view());
    }
    if !ckpt.metadata.is_empty() {
        w.bytes(META_TAG);
        w.string(&ckpt.metadata);
    }
    if let Some(opt) = &ckpt.optimizer {
        w.bytes(OPTIMIZER_TAG);
        w.u64(opt.step);
        w.u32(opt.tensors.len() as u32);
        for t in &opt.tensors {
            write_tensor(&mut w, &t.name, t.data.view());
        }
    }
    w.buf
}

pub fn decode_checkpoint(data: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = BinReader::new(data, path);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.error(format!("unsupported checkpoint version {version}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let config = NetConfig {
        c_in: dims[0],
        width: dims[1],
        blocks: dims[2],
        k: dims[3],
        time_dim: dims[4],
    };
    config.validate().map_err(|e| r.error(e.to_string()))?;
    let mut params = ModelParams::zeros(config);
    let count = r.u32()? as usize;
    let mut loaded = Vec::with_capacity(count);
    for _ in 0..count {
        loaded.push(read_tensor(&mut r)?);
    }
    {
        let mut slots = params.tensors_mut();
        if slots.len() != loaded.len() {
            return Err(r.error(format!("expected {} tensors, found {}", slots.len(), loaded.len())));
        }
        for ((name, slot), t) in slots.iter_mut().zip(&loaded) {
            if *name != t.name || slot.shape() != t.data.shape() {
                return Err(r.error(format!(
                    "tensor {} {:?} where {} {:?} was expected",
                    t.name,
                    t.data.shape(),
                    name,
                    slot.shape()
                )));
            }
            slot.assign(&t.data);
        }
    }
    let mut metadata = String::new();
    let mut optimizer = None;
    while r.remaining() > 0 {
        let tag = r.take(4)?;
        if tag == META_TAG {
            metadata = r.string()?;
        } else if tag == OPTIMIZER_TAG {
            let step = r.u64()?;
            let n = r.u32()? as usize;
            let mut tensors = Vec::with_capacity(n);
            for _ in 0..n {
                tensors.push(read_tensor(&mut r)?);
            }
            optimizer = Some(OptimizerSection { step, tensors });
        } else {
            return Err(r.error(format!("unknown section tag {:?}", String::from_utf8_lossy(tag))));
        }
    }
    Ok(Checkpoint {
        params,
        metadata,
        optimizer,
    })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ckpt))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;

    #[test]
    fn round_trip_with_optimizer() {
        let params = init_params(NetConfig::new(3, 6, 2, 9), 0.02, 3).unwrap();
        let ckpt = Checkpoint {
            optimizer: Some(OptimizerSection {
                step: 17,
                tensors: vec![NamedTensor {
                    name: "m.input.w".into(),
                    data: params.w_in.clone().into_dyn(),
                }],
            }),
            metadata: "steps=1000\n".into(),
            params,
        };
        let bytes = encode_checkpoint(&ckpt);
        let back = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let params = init_params(NetConfig::new(3, 4, 1, 5), 0.02, 3).unwrap();
        let bytes = encode_checkpoint(&Checkpoint {
            params,
            metadata: String::new(),
            optimizer: None,
        });
        let err = decode_checkpoint(&bytes[..bytes.len() - 3], Path::new("x.hgck")).unwrap_err();
        assert!(matches!(err, crate::Error::Format { .. }), "{err}");
    }
}
