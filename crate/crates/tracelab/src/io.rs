//! Binary artifact formats: little-endian f32 matrix dumps with key=value
//! sidecars, and the versioned named-tensor checkpoint container used by the
//! model modules.
//!
//! Checkpoint layout: magic, format version, a key=value config block, then
//! named tensors as (name, rows, cols, f32 data) records. Everything is
//! little-endian and byte-exact across runs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Mat;

const MATRIX_MAGIC: &[u8; 8] = b"TLMATRX1";
const CHECKPOINT_MAGIC: &[u8; 8] = b"TLCKPT01";

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Row-major f32 matrix dump: magic, rows, cols (u64 LE), then data.
pub fn write_matrix(path: &Path, m: &Mat<f32>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    for &v in m.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Mat<f32>> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(format_err(path, "bad matrix magic"));
    }
    let rows = read_u64(&mut file)? as usize;
    let cols = read_u64(&mut file)? as usize;
    let mut data = vec![0f32; rows * cols];
    let mut buf = [0u8; 4];
    for v in &mut data {
        file.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    Ok(Mat::from_vec(rows, cols, data))
}

/// Sidecar metadata for a matrix dump (dims, representation kind, corpus hash).
pub fn write_sidecar(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in entries {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, String>> {
    let content = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for line in content.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

// ── checkpoint container ─────────────────────────────────────────────

#[derive(Debug, Default)]
pub struct Checkpoint {
    pub config: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Mat<f32>>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn set_config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn config_u64(&self, key: &str) -> Result<u64> {
        self.config
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::config(format!("checkpoint missing numeric config key {key}")))
    }

    pub fn config_f64(&self, key: &str) -> Result<f64> {
        self.config
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::config(format!("checkpoint missing numeric config key {key}")))
    }

    pub fn insert(&mut self, name: &str, m: Mat<f32>) {
        self.tensors.insert(name.to_string(), m);
    }

    pub fn tensor(&self, name: &str) -> Result<&Mat<f32>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::config(format!("checkpoint missing tensor {name}")))
    }

    /// Vector convenience: a 1×n tensor.
    pub fn insert_vec(&mut self, name: &str, v: &[f32]) {
        self.insert(name, Mat::from_vec(1, v.len(), v.to_vec()));
    }

    pub fn vec(&self, name: &str) -> Result<Vec<f32>> {
        Ok(self.tensor(name)?.data().to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(self.config.len() as u64).to_le_bytes())?;
        for (k, v) in &self.config {
            write_str(&mut out, k)?;
            write_str(&mut out, v)?;
        }
        out.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (name, m) in &self.tensors {
            write_str(&mut out, name)?;
            out.write_all(&(m.rows() as u64).to_le_bytes())?;
            out.write_all(&(m.cols() as u64).to_le_bytes())?;
            for &v in m.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(format_err(path, "bad checkpoint magic or version"));
        }
        let mut ckpt = Checkpoint::new();
        let n_config = read_u64(&mut file)? as usize;
        for _ in 0..n_config {
            let k = read_str(&mut file, path)?;
            let v = read_str(&mut file, path)?;
            ckpt.config.insert(k, v);
        }
        let n_tensors = read_u64(&mut file)? as usize;
        for _ in 0..n_tensors {
            let name = read_str(&mut file, path)?;
            let rows = read_u64(&mut file)? as usize;
            let cols = read_u64(&mut file)? as usize;
            let mut data = vec![0f32; rows * cols];
            let mut buf = [0u8; 4];
            for v in &mut data {
                file.read_exact(&mut buf)?;
                *v = f32::from_le_bytes(buf);
            }
            ckpt.tensors.insert(name, Mat::from_vec(rows, cols, data));
        }
        Ok(ckpt)
    }
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    out.write_all(&(s.len() as u64).to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(file: &mut R, path: &Path) -> Result<String> {
    let len = read_u64(file)? as usize;
    if len > 1 << 20 {
        return Err(format_err(path, "implausible string length"));
    }
    let mut buf = vec![0u8; len];
    file.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| format_err(path, "non-utf8 string"))
}

fn read_u64<R: Read>(file: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    file.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// FNV-1a over the f32 bit patterns. Used for frozen-weight and trace-dump
/// identity checks; not cryptographic.
pub fn hash_f32s(data: &[f32]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &v in data {
        for b in v.to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}
