//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "CNAPCKPT" | u32 format_version | u32 len + module_name (utf-8)
//! | u32 len + spec (utf-8, module-defined JSON) | u32 array_count
//! | per array: u32 len + name | u32 ndim | u64 dims... | f32 data...
//! ```
//!
//! Arrays are written sorted by name, so save → load → save is
//! byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use super::store::ParamStore;
use super::DiffError;

const MAGIC: &[u8; 8] = b"CNAPCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub module_name: String,
    /// Module-defined description of the stored architecture (JSON).
    pub spec: String,
    pub arrays: Vec<CheckpointArray>,
}

impl Checkpoint {
    /// Snapshots parameters whose name starts with `prefix` (empty prefix
    /// takes everything). Values quantize to f32 for serialization.
    pub fn from_store(store: &ParamStore, module_name: &str, spec: &str, prefix: &str) -> Self {
        let mut arrays: Vec<CheckpointArray> = store
            .entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .map(|e| CheckpointArray {
                name: e.name.clone(),
                shape: e.shape.clone(),
                data: e.value.iter().map(|v| *v as f32).collect(),
            })
            .collect();
        arrays.sort_by(|a, b| a.name.cmp(&b.name));
        Self {
            format_version: FORMAT_VERSION,
            module_name: module_name.to_string(),
            spec: spec.to_string(),
            arrays,
        }
    }

    pub fn array(&self, name: &str) -> Option<&CheckpointArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Registers every stored array into `store`, optionally renamed with
    /// `rename` and frozen.
    pub fn load_into(
        &self,
        store: &mut ParamStore,
        rename: impl Fn(&str) -> String,
        frozen: bool,
    ) -> Result<(), DiffError> {
        for a in &self.arrays {
            let name = rename(&a.name);
            let values: Vec<f64> = a.data.iter().map(|v| *v as f64).collect();
            store.register(&name, &a.shape, values)?;
            if frozen {
                store.freeze_prefix(&name);
            }
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), DiffError> {
        w.write_all(MAGIC)?;
        w.write_all(&self.format_version.to_le_bytes())?;
        write_str(w, &self.module_name)?;
        write_str(w, &self.spec)?;
        w.write_all(&(self.arrays.len() as u32).to_le_bytes())?;
        let mut arrays = self.arrays.clone();
        arrays.sort_by(|a, b| a.name.cmp(&b.name));
        for a in &arrays {
            write_str(w, &a.name)?;
            w.write_all(&(a.shape.len() as u32).to_le_bytes())?;
            for d in &a.shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in &a.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, DiffError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DiffError::Checkpoint("bad magic bytes".into()));
        }
        let format_version = read_u32(r)?;
        if format_version != FORMAT_VERSION {
            return Err(DiffError::Checkpoint(format!(
                "unsupported format version {format_version}"
            )));
        }
        let module_name = read_str(r)?;
        let spec = read_str(r)?;
        let count = read_u32(r)? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let name = read_str(r)?;
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf)?;
                shape.push(u64::from_le_bytes(buf) as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let mut buf = [0u8; 4];
                r.read_exact(&mut buf)?;
                data.push(f32::from_le_bytes(buf));
            }
            arrays.push(CheckpointArray { name, shape, data });
        }
        Ok(Self {
            format_version,
            module_name,
            spec,
            arrays,
        })
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<(), DiffError> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, DiffError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String, DiffError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(DiffError::Checkpoint(format!("string length {len} too large")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| DiffError::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), DiffError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    ckpt.write_to(&mut file)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DiffError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    Checkpoint::read_from(&mut file)
}
