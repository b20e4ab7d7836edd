//! Exact cosine-similarity retrieval.
//!
//! [`EmbeddingIndex`] stores part embeddings row-major with precomputed
//! norms and answers top-k queries by an exact scan (no approximation).
//! Scores are cosine similarities accumulated in f64; ties break by
//! ascending part id. The index is immutable once built; concurrent queries
//! are safe, and a rebuild replaces the whole file atomically.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "CGIX" | version u8 | config_hash [32] | M u64 | D u32
//! | id table: per row u16 len + utf8
//! | f32 matrix, row-major
//! ```

pub mod assembly;
pub mod metrics;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::brep::PartId;
use crate::error::{Error, Result};

pub use assembly::{assembly_query, AssemblyHit, AssemblyRecord};
pub use metrics::{ndcg_at_k, recall_at_k, recall_at_k_inclusive, Relevance};

const MAGIC: &[u8; 4] = b"CGIX";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    ids: Vec<PartId>,
    dim: usize,
    matrix: Vec<f32>,
    norms: Vec<f64>,
    config_hash: [u8; 32],
}

/// One ranked retrieval hit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Hit {
    pub id: PartId,
    /// Cosine similarity in [-1, 1].
    pub score: f64,
}

/// Ranked hits, scores non-increasing, the excluded id never present.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QueryResult {
    pub hits: Vec<Hit>,
}

impl EmbeddingIndex {
    /// Build from part embeddings. Errors on an empty map, inconsistent
    /// dimensions, or a zero-norm vector (named).
    pub fn build(
        embeddings: &BTreeMap<PartId, Vec<f32>>,
        config_hash: [u8; 32],
    ) -> Result<EmbeddingIndex> {
        let Some(first) = embeddings.values().next() else {
            return Err(Error::Contract("cannot build an index from 0 embeddings".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Contract("embedding dimension is 0".into()));
        }
        let mut ids = Vec::with_capacity(embeddings.len());
        let mut matrix = Vec::with_capacity(embeddings.len() * dim);
        let mut norms = Vec::with_capacity(embeddings.len());
        for (id, z) in embeddings {
            if z.len() != dim {
                return Err(Error::Contract(format!(
                    "part {id} has dimension {}, index uses {dim}",
                    z.len()
                )));
            }
            let norm = norm_f64(z);
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Contract(format!(
                    "part {id} has a zero or non-finite embedding norm"
                )));
            }
            ids.push(id.clone());
            matrix.extend_from_slice(z);
            norms.push(norm);
        }
        Ok(EmbeddingIndex {
            ids,
            dim,
            matrix,
            norms,
            config_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[PartId] {
        &self.ids
    }

    pub fn config_hash(&self) -> [u8; 32] {
        self.config_hash
    }

    /// Stored vector for a part id.
    pub fn vector(&self, id: &PartId) -> Option<&[f32]> {
        let row = self.ids.binary_search(id).ok()?;
        Some(&self.matrix[row * self.dim..(row + 1) * self.dim])
    }

    /// Exact top-k by cosine similarity; ties break by ascending part id;
    /// `exclude` is never returned. Single-threaded by design.
    pub fn query(&self, z: &[f32], k: usize, exclude: Option<&PartId>) -> Result<QueryResult> {
        if z.len() != self.dim {
            return Err(Error::Query(format!(
                "query dimension {} does not match index dimension {}",
                z.len(),
                self.dim
            )));
        }
        if k == 0 || k > self.len() {
            return Err(Error::Query(format!(
                "k must satisfy 1 <= k <= {}, got {k}",
                self.len()
            )));
        }
        let qnorm = norm_f64(z);
        if !(qnorm > 0.0) || !qnorm.is_finite() {
            return Err(Error::Query("query vector has zero norm".into()));
        }
        // bounded worst-first heap
        let mut heap: std::collections::BinaryHeap<HeapEntry> =
            std::collections::BinaryHeap::with_capacity(k + 1);
        for row in 0..self.len() {
            if exclude.is_some_and(|e| e == &self.ids[row]) {
                continue;
            }
            let r = &self.matrix[row * self.dim..(row + 1) * self.dim];
            let mut dot = 0.0f64;
            for (a, b) in z.iter().zip(r.iter()) {
                dot += *a as f64 * *b as f64;
            }
            let score = dot / (qnorm * self.norms[row]);
            heap.push(HeapEntry { score, row });
            if heap.len() > k {
                heap.pop();
            }
        }
        let mut rows: Vec<HeapEntry> = heap.into_vec();
        rows.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| self.ids[a.row].cmp(&self.ids[b.row]))
        });
        Ok(QueryResult {
            hits: rows
                .into_iter()
                .map(|e| Hit {
                    id: self.ids[e.row].clone(),
                    score: e.score,
                })
                .collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io_err = |e| Error::io(path.display().to_string(), e);
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp).map_err(io_err)?);
            let mut write = |bytes: &[u8]| -> Result<()> {
                w.write_all(bytes)
                    .map_err(|e| Error::io(tmp.display().to_string(), e))
            };
            write(MAGIC)?;
            write(&[VERSION])?;
            write(&self.config_hash)?;
            write(&(self.len() as u64).to_le_bytes())?;
            write(&(self.dim as u32).to_le_bytes())?;
            for id in &self.ids {
                let b = id.as_str().as_bytes();
                write(&(b.len() as u16).to_le_bytes())?;
                write(b)?;
            }
            for &x in &self.matrix {
                write(&x.to_le_bytes())?;
            }
            w.flush().map_err(io_err)?;
        }
        std::fs::rename(&tmp, path).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<EmbeddingIndex> {
        let fmt = |reason: &str| Error::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let mut r =
            BufReader::new(File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| fmt("too short"))?;
        if &magic != MAGIC {
            return Err(fmt("bad magic"));
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version).map_err(|_| fmt("too short"))?;
        if version[0] != VERSION {
            return Err(fmt(&format!("unsupported version {}", version[0])));
        }
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash).map_err(|_| fmt("too short"))?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| fmt("too short"))?;
        let m = u64::from_le_bytes(b8) as usize;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| fmt("too short"))?;
        let dim = u32::from_le_bytes(b4) as usize;
        if m == 0 || dim == 0 {
            return Err(fmt("empty index"));
        }
        let mut ids = Vec::with_capacity(m);
        for _ in 0..m {
            let mut b2 = [0u8; 2];
            r.read_exact(&mut b2).map_err(|_| fmt("truncated id table"))?;
            let len = u16::from_le_bytes(b2) as usize;
            let mut raw = vec![0u8; len];
            r.read_exact(&mut raw).map_err(|_| fmt("truncated id table"))?;
            ids.push(PartId::new(
                String::from_utf8(raw).map_err(|_| fmt("id not utf-8"))?,
            ));
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fmt("id table must be strictly ascending"));
        }
        let mut raw = vec![0u8; m * dim * 4];
        r.read_exact(&mut raw).map_err(|_| fmt("truncated matrix"))?;
        let matrix: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|_| fmt("read error"))? != 0 {
            return Err(fmt("trailing bytes"));
        }
        let norms: Vec<f64> = (0..m)
            .map(|row| norm_f64(&matrix[row * dim..(row + 1) * dim]))
            .collect();
        if norms.iter().any(|&n| !(n > 0.0) || !n.is_finite()) {
            return Err(fmt("zero-norm row"));
        }
        Ok(EmbeddingIndex {
            ids,
            dim,
            matrix,
            norms,
            config_hash,
        })
    }
}

struct HeapEntry {
    score: f64,
    row: usize,
}

// worst-first ordering: lowest score (and largest row for equal scores) on
// top of the max-heap so it gets evicted first
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.row.cmp(&other.row))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for HeapEntry {}

fn norm_f64(z: &[f32]) -> f64 {
    z.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}
