//! `CGGRF1` graph files.
//!
//! Layout, little-endian: magic, u8 version, u64 n_nodes, u64 nnz,
//! (n_nodes + 1) u64 row offsets, u8 index width (4 or 8), nnz indices of
//! that width, f64 tau, u32 CRC32 of every preceding byte.

use std::path::Path;

use super::graph::SimilarityGraph;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 6] = b"CGGRF1";
pub const GRAPH_VERSION: u8 = 1;

pub fn encode_graph(g: &SimilarityGraph) -> Vec<u8> {
    let n = g.n_nodes();
    let wide = n > u32::MAX as usize;
    let width = if wide { 8 } else { 4 };
    let mut buf = Vec::with_capacity(32 + 8 * (n + 1) + width * g.nnz());
    buf.extend_from_slice(GRAPH_MAGIC);
    buf.push(GRAPH_VERSION);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(g.nnz() as u64).to_le_bytes());
    for &o in g.offsets() {
        buf.extend_from_slice(&(o as u64).to_le_bytes());
    }
    buf.push(width as u8);
    for &j in g.indices() {
        if wide {
            buf.extend_from_slice(&(j as u64).to_le_bytes());
        } else {
            buf.extend_from_slice(&j.to_le_bytes());
        }
    }
    buf.extend_from_slice(&g.tau().to_le_bytes());
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(corrupt(self.origin, "file is truncated")),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn corrupt(path: &Path, reason: &str) -> Error {
    Error::Corruption {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// `origin` only labels errors.
pub fn decode_graph(bytes: &[u8], origin: &Path) -> Result<SimilarityGraph> {
    let mut c = Cursor { bytes, pos: 0, origin };
    if c.take(GRAPH_MAGIC.len())? != GRAPH_MAGIC {
        return Err(corrupt(origin, "bad magic"));
    }
    let version = c.u8()?;
    if version != GRAPH_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < c.pos + 4 {
        return Err(corrupt(origin, "file is truncated"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let n = c.u64()? as usize;
    let nnz = c.u64()? as usize;
    let needed = n
        .checked_add(1)
        .and_then(|k| k.checked_mul(8))
        .and_then(|k| k.checked_add(nnz.checked_mul(4)?));
    if needed.is_none_or(|k| k > body.len()) {
        return Err(corrupt(origin, "file is truncated"));
    }
    if crc32fast::hash(body) != stored {
        return Err(corrupt(origin, "checksum mismatch"));
    }
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(c.u64()? as usize);
    }
    let width = c.u8()?;
    let mut indices = Vec::with_capacity(nnz);
    match width {
        4 => {
            for _ in 0..nnz {
                indices.push(u32::from_le_bytes(c.take(4)?.try_into().unwrap()));
            }
        }
        8 => {
            for _ in 0..nnz {
                let v = c.u64()?;
                indices.push(u32::try_from(v).map_err(|_| corrupt(origin, "node id exceeds 32 bits"))?);
            }
        }
        _ => return Err(corrupt(origin, "bad index width")),
    }
    let tau = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
    if c.pos != body.len() {
        return Err(corrupt(origin, "trailing bytes"));
    }
    let g = SimilarityGraph { offsets, indices, tau };
    g.check_invariants()
        .map_err(|e| corrupt(origin, &format!("invalid graph: {e}")))?;
    Ok(g)
}

pub fn save_graph(g: &SimilarityGraph, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, encode_graph(g))?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<SimilarityGraph> {
    let bytes = std::fs::read(path)?;
    decode_graph(&bytes, path)
}
