//! Binary parameter checkpoints.
//!
//! ```text
//! magic "SVRTCKPT" | version u32 | count u32
//! per tensor: name_len u32 | name utf8 | rank u32 | extents u64 × rank | values f32 × n
//! ```
//! All integers and floats little-endian. Batch-norm running statistics are
//! stored as `<stat>.running_mean` / `<stat>.running_var` next to the
//! trainable parameters. The model config is kept as JSON beside the file.

use std::fs;
use std::path::Path;

use svrt_core::models::{build_model, Model, ModelConfig};
use svrt_core::tensor::{Real, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SVRTCKPT";
pub const VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "model_config.json";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn encode(tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<NamedTensor>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| "tensor name is not UTF-8".to_string())?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| "extent overflow".to_string())?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or("tensor size overflow")?;
        let values = r
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(NamedTensor {
            name: name.to_string(),
            shape,
            values,
        });
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(out)
}

fn named<T: Real>(name: String, shape: &[usize], data: &[T]) -> NamedTensor {
    NamedTensor {
        name,
        shape: shape.to_vec(),
        values: data.iter().map(|v| v.as_f64() as f32).collect(),
    }
}

/// Every parameter and running statistic of `model`, in model order.
pub fn model_tensors<T: Real>(model: &Model<T>) -> Vec<NamedTensor> {
    let mut out: Vec<NamedTensor> = model
        .params()
        .iter()
        .map(|(_, p)| named(p.name.clone(), p.value.shape(), p.value.data()))
        .collect();
    for (name, s) in model.running_stats() {
        out.push(named(format!("{name}.running_mean"), &[s.mean.len()], &s.mean));
        out.push(named(format!("{name}.running_var"), &[s.var.len()], &s.var));
    }
    out
}

/// Overwrites `model` from `tensors`; every model tensor must be present
/// with a matching shape.
pub fn apply_tensors<T: Real>(model: &mut Model<T>, tensors: &[NamedTensor]) -> std::result::Result<(), String> {
    let find = |name: &str, shape: &[usize]| -> std::result::Result<Vec<T>, String> {
        let t = tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| format!("missing tensor {name}"))?;
        if t.shape != shape {
            return Err(format!("tensor {name}: shape {:?}, model expects {shape:?}", t.shape));
        }
        Ok(t.values.iter().map(|&v| T::from_f64(f64::from(v))).collect())
    };
    for p in model.params_mut().iter_mut() {
        let v = find(&p.name, p.value.shape())?;
        p.value = Tensor::from_vec(p.value.shape(), v).map_err(|e| e.to_string())?;
    }
    for (name, s) in model.running_stats_mut() {
        s.mean = find(&format!("{name}.running_mean"), &[s.mean.len()])?;
        s.var = find(&format!("{name}.running_var"), &[s.var.len()])?;
    }
    Ok(())
}

/// Writes `<dir>/<file>` plus the model config JSON beside it.
pub fn save<T: Real>(model: &Model<T>, path: &Path) -> Result<()> {
    fs::write(path, encode(&model_tensors(model))).map_err(|e| Error::io(path, e))?;
    let cfg_path = path.with_file_name(CONFIG_FILE);
    let json = serde_json::to_string_pretty(model.config()).expect("config serializes");
    fs::write(&cfg_path, json).map_err(|e| Error::io(&cfg_path, e))
}

pub fn load<T: Real>(path: &Path) -> Result<Model<T>> {
    let cfg_path = path.with_file_name(CONFIG_FILE);
    let cfg_text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg: ModelConfig = serde_json::from_str(&cfg_text).map_err(|e| Error::format(&cfg_path, e.to_string()))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode(&bytes).map_err(|m| Error::format(path, m))?;
    let mut model = build_model::<T>(&cfg, 0)?;
    apply_tensors(&mut model, &tensors).map_err(|m| Error::format(path, m))?;
    Ok(model)
}
