//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "GCMCKPT1"
//! manifest_len u32      byte length of the manifest
//! manifest     utf-8    `key=value` lines (hyperparameters, seeds)
//! param_count  u32
//! per parameter, in store order:
//!   name_len   u32
//!   name       utf-8
//!   rows       u32
//!   cols       u32
//!   payload    rows*cols f64, row-major
//! ```

use std::io::{Read, Write};

use super::params::{Matrix, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GCMCKPT1";

pub type Manifest = Vec<(String, String)>;

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format("length exceeds u32"))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_checkpoint<W: Write>(mut w: W, store: &ParamStore, manifest: &Manifest) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let mut text = String::new();
    for (k, v) in manifest {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::invalid(format!("manifest entry {k:?} is not a flat key=value")));
        }
        text.push_str(&format!("{k}={v}\n"));
    }
    write_u32(&mut w, text.len())?;
    w.write_all(text.as_bytes())?;
    write_u32(&mut w, store.len())?;
    for (_, name, value) in store.iter() {
        write_u32(&mut w, name.len())?;
        w.write_all(name.as_bytes())?;
        write_u32(&mut w, value.nrows())?;
        write_u32(&mut w, value.ncols())?;
        let mut buf = Vec::with_capacity(value.len() * 8);
        for x in value.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub struct Checkpoint {
    pub manifest: Manifest,
    pub params: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn manifest_value(&self, key: &str) -> Option<&str> {
        self.manifest
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Overwrites the values of `store`, which must have the same layout.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::format(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, value) in &self.params {
            let id = store
                .id(name)
                .ok_or_else(|| Error::format(format!("unexpected parameter {name:?}")))?;
            let slot = store.get_mut(id);
            if slot.dim() != value.dim() {
                return Err(Error::format(format!(
                    "parameter {name:?}: checkpoint shape {:?}, model shape {:?}",
                    value.dim(),
                    slot.dim()
                )));
            }
            slot.assign(value);
        }
        Ok(())
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let len = read_u32(&mut r)?;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| Error::format("manifest is not utf-8"))?;
    let manifest = text
        .lines()
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .ok_or_else(|| Error::format(format!("manifest line {l:?} has no '='")))
        })
        .collect::<Result<Manifest>>()?;
    let count = read_u32(&mut r)?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let n = read_u32(&mut r)?;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::format("name is not utf-8"))?;
        let rows = read_u32(&mut r)?;
        let cols = read_u32(&mut r)?;
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let value = Matrix::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::format(e.to_string()))?;
        params.push((name, value));
    }
    Ok(Checkpoint { manifest, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_bit_exact() {
        let mut store = ParamStore::new();
        store.insert("a", array![[1.5, -2.0], [0.1, 3.0]]).unwrap();
        store.insert("b.bias", array![[f64::MIN_POSITIVE]]).unwrap();
        let manifest = vec![("lr".to_owned(), "0.001".to_owned())];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store, &manifest).unwrap();

        let ck = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(ck.manifest_value("lr"), Some("0.001"));
        let mut other = ParamStore::new();
        other.insert("a", Matrix::zeros((2, 2))).unwrap();
        other.insert("b.bias", Matrix::zeros((1, 1))).unwrap();
        ck.restore_into(&mut other).unwrap();
        for ((_, _, x), (_, _, y)) in store.iter().zip(other.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(read_checkpoint(&b"NOTACKPTxxxx"[..]).is_err());
    }
}
