//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `F3RCKPT1`, u32 version, the model config
//! (u32 patch size, embed dim, fusion layers, attention heads, mlp ratio
//! times 1000, head hidden dim, pool size, max train views, then a u8
//! precision flag), u32 tensor count, and per tensor a u16 name length,
//! UTF-8 name, u8 dtype (0 = f32, 1 = f64), u8 ndim, ndim u64 dims and the
//! raw element data.
//!
//! Optimizer state rides along as extra tensors under an `adamw.` prefix;
//! loaders that only want weights ignore them.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::math::Real;
use super::params::{Dtype, ParameterStore};
use super::{ModelConfig, ModelError, Precision};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"F3RCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One tensor as stored on disk. Values are held as f64 in memory; for f32
/// tensors the widening is exact, so writing back is bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl RawTensor {
    pub fn from_slice<T: Real>(name: &str, shape: &[usize], data: &[T]) -> RawTensor {
        RawTensor {
            name: name.to_string(),
            dtype: T::DTYPE,
            shape: shape.to_vec(),
            data: data.iter().map(|v| v.db()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tensors: Vec<RawTensor>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&RawTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Weight tensors only (no optimizer state).
    pub fn weight_tensors(&self) -> Vec<&RawTensor> {
        self.tensors
            .iter()
            .filter(|t| !t.name.starts_with("adamw."))
            .collect()
    }
}

/// Serializes config plus the store's weights, with any extra tensors
/// appended (optimizer state, schedules).
pub fn save_checkpoint<T: Real>(
    path: &Path,
    cfg: &ModelConfig,
    store: &ParameterStore<T>,
    extra: &[RawTensor],
) -> Result<(), ModelError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;

    w.write_u32::<LittleEndian>(cfg.patch_size as u32)?;
    w.write_u32::<LittleEndian>(cfg.embed_dim as u32)?;
    w.write_u32::<LittleEndian>(cfg.fusion_layers as u32)?;
    w.write_u32::<LittleEndian>(cfg.attention_heads as u32)?;
    w.write_u32::<LittleEndian>((cfg.mlp_ratio * 1000.0).round() as u32)?;
    w.write_u32::<LittleEndian>(cfg.head_hidden_dim as u32)?;
    w.write_u32::<LittleEndian>(cfg.pool_size)?;
    w.write_u32::<LittleEndian>(cfg.max_train_views as u32)?;
    w.write_u8(match cfg.precision {
        Precision::Single => 0,
        Precision::Double => 1,
    })?;

    let count = store.len() + extra.len();
    w.write_u32::<LittleEndian>(count as u32)?;

    let write_tensor = |w: &mut BufWriter<std::fs::File>,
                            name: &str,
                            dtype: Dtype,
                            shape: &[usize],
                            data: &[f64]|
     -> Result<(), ModelError> {
        let name_bytes = name.as_bytes();
        w.write_u16::<LittleEndian>(name_bytes.len() as u16)?;
        w.write_all(name_bytes)?;
        w.write_u8(dtype as u8)?;
        w.write_u8(shape.len() as u8)?;
        for &dim in shape {
            w.write_u64::<LittleEndian>(dim as u64)?;
        }
        match dtype {
            Dtype::F32 => {
                for &v in data {
                    w.write_f32::<LittleEndian>(v as f32)?;
                }
            }
            Dtype::F64 => {
                for &v in data {
                    w.write_f64::<LittleEndian>(v)?;
                }
            }
        }
        Ok(())
    };

    for e in store.entries() {
        let data: Vec<f64> = e.weight.iter().map(|v| v.db()).collect();
        write_tensor(&mut w, &e.name, T::DTYPE, &e.shape, &data)?;
    }
    for t in extra {
        write_tensor(&mut w, &t.name, t.dtype, &t.shape, &t.data)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| ModelError::Format("file too short for magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::Format(format!(
            "bad magic {:?}, expected F3RCKPT1",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }

    let patch_size = read_u32(&mut r)? as usize;
    let embed_dim = read_u32(&mut r)? as usize;
    let fusion_layers = read_u32(&mut r)? as usize;
    let attention_heads = read_u32(&mut r)? as usize;
    let mlp_ratio = read_u32(&mut r)? as f64 / 1000.0;
    let head_hidden_dim = read_u32(&mut r)? as usize;
    let pool_size = read_u32(&mut r)?;
    let max_train_views = read_u32(&mut r)? as usize;
    let precision = match read_u8(&mut r)? {
        0 => Precision::Single,
        1 => Precision::Double,
        other => {
            return Err(ModelError::Format(format!(
                "unknown precision flag {other}"
            )))
        }
    };
    let config = ModelConfig {
        patch_size,
        embed_dim,
        fusion_layers,
        attention_heads,
        mlp_ratio,
        head_hidden_dim,
        pool_size,
        max_train_views,
        precision,
    };

    let count = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r
            .read_u16::<LittleEndian>()
            .map_err(|_| ModelError::Format("truncated tensor header".into()))?
            as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| ModelError::Format("truncated tensor name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?;
        let dtype = Dtype::from_u8(read_u8(&mut r)?)
            .ok_or_else(|| ModelError::Format(format!("unknown dtype for {name}")))?;
        let ndim = read_u8(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let dim = r
                .read_u64::<LittleEndian>()
                .map_err(|_| ModelError::Format("truncated dims".into()))?
                as usize;
            shape.push(dim);
        }
        let numel: usize = shape.iter().product();
        if numel > (1 << 30) {
            return Err(ModelError::Format(format!(
                "implausible tensor size {numel} for {name}"
            )));
        }
        let mut data = Vec::with_capacity(numel);
        match dtype {
            Dtype::F32 => {
                for _ in 0..numel {
                    let v = r
                        .read_f32::<LittleEndian>()
                        .map_err(|_| ModelError::Format("truncated tensor data".into()))?;
                    data.push(v as f64);
                }
            }
            Dtype::F64 => {
                for _ in 0..numel {
                    let v = r
                        .read_f64::<LittleEndian>()
                        .map_err(|_| ModelError::Format("truncated tensor data".into()))?;
                    data.push(v);
                }
            }
        }
        tensors.push(RawTensor {
            name,
            dtype,
            shape,
            data,
        });
    }
    Ok(Checkpoint { config, tensors })
}

fn read_u32(r: &mut impl Read) -> Result<u32, ModelError> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| ModelError::Format("truncated file (u32)".into()))
}

fn read_u8(r: &mut impl Read) -> Result<u8, ModelError> {
    r.read_u8()
        .map_err(|_| ModelError::Format("truncated file (u8)".into()))
}
