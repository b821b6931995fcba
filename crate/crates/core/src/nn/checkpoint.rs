//! Named-tensor parameter files.
//!
//! Layout (little-endian): magic `SAGW`, `u32` version, `u32` tensor count,
//! then per tensor a `u32` name length, UTF-8 name, `u64` rows, `u64` cols
//! and `rows * cols` raw `f64` values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::params::ParamStore;
use super::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SAGW";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(store: &ParamStore, w: &mut W) -> Result<(), NnError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for p in store.iter() {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&(p.value.rows() as u64).to_le_bytes())?;
        w.write_all(&(p.value.cols() as u64).to_le_bytes())?;
        for x in p.value.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(store, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads every tensor in file order.
pub fn read_checkpoint(buf: &[u8]) -> Result<Vec<(String, Matrix)>, NnError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], NnError> {
        let end = pos.checked_add(n).filter(|&e| e <= buf.len()).ok_or(NnError::Checkpoint("truncated file"))?;
        let s = &buf[pos..end];
        pos = end;
        Ok(s)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint("unsupported version"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(len)?)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8"))?
            .to_owned();
        let rows = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let n = rows.checked_mul(cols).ok_or(NnError::Checkpoint("bad shape"))?;
        let raw = take(n.checked_mul(8).ok_or(NnError::Checkpoint("bad shape"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    if pos != buf.len() {
        return Err(NnError::Checkpoint("trailing bytes"));
    }
    Ok(out)
}

/// Loads tensors into an already-shaped store, matching by name.
pub fn load_checkpoint_into(store: &mut ParamStore, path: &Path) -> Result<(), NnError> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    restore_from(store, read_checkpoint(&buf)?)
}

pub fn restore_from(store: &mut ParamStore, tensors: Vec<(String, Matrix)>) -> Result<(), NnError> {
    if tensors.len() != store.len() {
        return Err(NnError::Checkpoint("tensor count does not match the model"));
    }
    for (name, m) in tensors {
        let id = store.find(&name).ok_or(NnError::Checkpoint("unknown tensor name"))?;
        let p = store.get_mut(id);
        if p.value.shape() != m.shape() {
            return Err(NnError::Checkpoint("tensor shape does not match the model"));
        }
        p.value = m;
    }
    Ok(())
}
