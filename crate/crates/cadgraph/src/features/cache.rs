//! Binary graph-feature cache.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "CGFC" | version u8 | config_hash [32]
//! | gu u16 | gv u16 | gt u16 | product_dim u32 | n_parts u64
//! | per part:
//!     part_id (u16 len + utf8) | |V| u32 | |E| u32
//!     per node: face_id (u16+utf8), surface_type u8, area f32,
//!               uv_grid f32 x gu*gv*7, product f32 x product_dim
//!     per edge: a u32, b u32 (node indices), curve_id (u16+utf8),
//!               curve_type u8, length f32, t_grid f32 x gt*6
//! ```
//!
//! Node order inside a record is the graph's canonical (sorted) order, so a
//! written file is a pure function of its inputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CurveRawFeatures, FaceRawFeatures, GraphFeatures, GridDims};
use crate::brep::{CurveId, FaceId, GraphEdge, PartGraph, PartId};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CGFC";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheHeader {
    pub config_hash: [u8; 32],
    pub dims: GridDims,
    pub product_dim: usize,
}

pub fn write_cache(
    path: &Path,
    config_hash: [u8; 32],
    features: &[GraphFeatures],
) -> Result<()> {
    let (dims, product_dim) = match features.first() {
        Some(f) => (f.dims, f.product_dim),
        None => (GridDims::default(), 0),
    };
    for f in features {
        if f.dims != dims || f.product_dim != product_dim {
            return Err(Error::Contract(
                "cache records must share grid dims and product dim".into(),
            ));
        }
        f.validate()?;
    }
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut write = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))
    };
    write(MAGIC)?;
    write(&[VERSION])?;
    write(&config_hash)?;
    write(&(dims.gu as u16).to_le_bytes())?;
    write(&(dims.gv as u16).to_le_bytes())?;
    write(&(dims.gt as u16).to_le_bytes())?;
    write(&(product_dim as u32).to_le_bytes())?;
    write(&(features.len() as u64).to_le_bytes())?;
    for f in features {
        write_str(&mut write, f.graph.part_id.as_str())?;
        write(&(f.graph.nodes.len() as u32).to_le_bytes())?;
        write(&(f.graph.edges.len() as u32).to_le_bytes())?;
        for node in &f.graph.nodes {
            let feat = &f.faces[node];
            write_str(&mut write, node.as_str())?;
            write(&[feat.surface_type as u8])?;
            write(&feat.area.to_le_bytes())?;
            write_f32s(&mut write, &feat.uv_grid)?;
            write_f32s(&mut write, &feat.product)?;
        }
        for edge in &f.graph.edges {
            let a = f.graph.nodes.binary_search(&edge.a).expect("validated");
            let b = f.graph.nodes.binary_search(&edge.b).expect("validated");
            let feat = &f.edges[&(edge.a.clone(), edge.b.clone())];
            write(&(a as u32).to_le_bytes())?;
            write(&(b as u32).to_le_bytes())?;
            write_str(&mut write, edge.curve.as_str())?;
            write(&[feat.curve_type as u8])?;
            write(&feat.length.to_le_bytes())?;
            write_f32s(&mut write, &feat.t_grid)?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_cache(path: &Path) -> Result<(CacheHeader, Vec<GraphFeatures>)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path: path.display().to_string(),
    };
    let mut magic = [0u8; 4];
    r.bytes(&mut magic)?;
    if &magic != MAGIC {
        return Err(r.fmt("bad magic"));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(r.fmt(&format!("unsupported version {version}")));
    }
    let mut config_hash = [0u8; 32];
    r.bytes(&mut config_hash)?;
    let dims = GridDims {
        gu: r.u16()? as usize,
        gv: r.u16()? as usize,
        gt: r.u16()? as usize,
    };
    let product_dim = r.u32()? as usize;
    let n_parts = r.u64()? as usize;
    let mut features = Vec::with_capacity(n_parts);
    for _ in 0..n_parts {
        let part_id = PartId::new(r.string()?);
        let n_nodes = r.u32()? as usize;
        let n_edges = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut faces = std::collections::BTreeMap::new();
        for _ in 0..n_nodes {
            let id = FaceId::new(r.string()?);
            let surface_type = r.u8()? as usize;
            let area = r.f32()?;
            let uv_grid = r.f32s(dims.face_grid_len())?;
            let product = r.f32s(product_dim)?;
            nodes.push(id.clone());
            faces.insert(
                id,
                FaceRawFeatures {
                    surface_type,
                    area,
                    uv_grid,
                    product,
                },
            );
        }
        let mut edges_vec = Vec::with_capacity(n_edges);
        let mut edges = std::collections::BTreeMap::new();
        for _ in 0..n_edges {
            let a_idx = r.u32()? as usize;
            let b_idx = r.u32()? as usize;
            if a_idx >= nodes.len() || b_idx >= nodes.len() {
                return Err(r.fmt("edge endpoint out of range"));
            }
            let curve = CurveId::new(r.string()?);
            let curve_type = r.u8()? as usize;
            let length = r.f32()?;
            let t_grid = r.f32s(dims.curve_grid_len())?;
            let (a, b) = (nodes[a_idx].clone(), nodes[b_idx].clone());
            edges_vec.push(GraphEdge {
                a: a.clone(),
                b: b.clone(),
                curve,
            });
            edges.insert(
                (a, b),
                CurveRawFeatures {
                    curve_type,
                    length,
                    t_grid,
                },
            );
        }
        let gf = GraphFeatures {
            graph: PartGraph {
                part_id,
                nodes,
                edges: edges_vec,
            },
            dims,
            product_dim,
            faces,
            edges,
        };
        gf.validate()?;
        features.push(gf);
    }
    Ok((
        CacheHeader {
            config_hash,
            dims,
            product_dim,
        },
        features,
    ))
}

fn write_str(write: &mut impl FnMut(&[u8]) -> Result<()>, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    write(&(bytes.len() as u16).to_le_bytes())?;
    write(bytes)
}

fn write_f32s(write: &mut impl FnMut(&[u8]) -> Result<()>, xs: &[f32]) -> Result<()> {
    for &x in xs {
        write(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Reader {
    inner: BufReader<File>,
    path: String,
}

impl Reader {
    fn fmt(&self, reason: &str) -> Error {
        Error::Format {
            path: self.path.clone(),
            reason: reason.to_string(),
        }
    }

    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|_| self.fmt("unexpected end of file"))
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.bytes(&mut b)?;
        Ok(b[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.bytes(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; n * 4];
        self.bytes(&mut raw)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let mut raw = vec![0u8; len];
        self.bytes(&mut raw)?;
        String::from_utf8(raw).map_err(|_| self.fmt("string not utf-8"))
    }
}
