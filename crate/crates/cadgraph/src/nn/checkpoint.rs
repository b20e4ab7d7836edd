//! Checkpoint files: ordered named float32 tensors plus an embedded config
//! blob, integrity-hashed.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "CGCK" | version u8 | config_len u32 | config JSON bytes
//! | n_records u32
//! | per record: name_len u16, name, ndim u8, dims u32..., data f32...
//! | sha256 of everything above (32 bytes)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::scalar::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CGCK";
const VERSION: u8 = 1;

/// Serialize named parameters (converted to f32) with a config blob.
/// The write is atomic: a temp file is renamed into place.
pub fn save<R: Real>(
    path: &Path,
    config_json: &str,
    named: &[(String, Tensor<R>)],
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    let cfg = config_json.as_bytes();
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg);
    buf.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, tensor) in named {
        let nb = name.as_bytes();
        buf.extend_from_slice(&(nb.len() as u16).to_le_bytes());
        buf.extend_from_slice(nb);
        buf.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in tensor.data() {
            buf.extend_from_slice(&(x.to_f64() as f32).to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);

    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.sync_all()
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read a checkpoint back: `(config_json, named f32 tensors)`.
pub fn load(path: &Path) -> Result<(String, Vec<(String, Tensor<f32>)>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let fmt = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 4 + 1 + 4 + 4 + 32 {
        return Err(fmt("file too short"));
    }
    let (body, hash) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != hash {
        return Err(fmt("content hash mismatch"));
    }
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > body.len() {
            return Err(fmt("truncated record"));
        }
        let s = &body[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err(fmt("bad magic"));
    }
    let version = take(&mut pos, 1)?[0];
    if version != VERSION {
        return Err(fmt(&format!("unsupported version {version}")));
    }
    let cfg_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let config = String::from_utf8(take(&mut pos, cfg_len)?.to_vec())
        .map_err(|_| fmt("config blob not utf-8"))?;
    let n_records = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut named = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        let name_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|_| fmt("record name not utf-8"))?;
        let ndim = take(&mut pos, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
        }
        let len: usize = shape.iter().product();
        let raw = take(&mut pos, len * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        named.push((name, Tensor::from_vec(&shape, data)?));
    }
    if pos != body.len() {
        return Err(fmt("trailing bytes"));
    }
    Ok((config, named))
}

/// SHA-256 of the whole file, hex-encoded. Used as the checkpoint identity.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Hex-encoded SHA-256 of arbitrary bytes (config hashes in artifacts).
pub fn content_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
