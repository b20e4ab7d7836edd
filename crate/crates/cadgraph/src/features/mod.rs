//! Raw feature payloads for graphs.
//!
//! Faces get a `[Gu x Gv x 7]` uv grid (point xyz, normal xyz, trimming
//! mask), a surface-type index, a numeric area and a dense product-attribute
//! vector encoded through an [`AttrSchema`]. Curves get a `[Gt x 6]` grid
//! (point xyz, tangent xyz), a curve-type index and their arc length.
//! Extraction is pure: identical `(part, graph, schema, dims)` produce
//! bitwise-identical payloads regardless of thread schedule.
//!
//! Coordinates feed the encoder in normalized model units, so parts are
//! expected to pass through [`crate::brep::normalize_part`] first.
//! Translation and uniform scaling are removed by that normalization;
//! rotation is NOT an invariance of this representation.

pub mod cache;
pub mod extract;
pub mod sample;
pub mod schema;

use std::collections::BTreeMap;

use crate::brep::{FaceId, PartGraph};
use crate::error::{Error, Result};

pub use cache::{read_cache, write_cache, CacheHeader};
pub use extract::extract_graph_features;
pub use sample::{sample_curve_grid, sample_face_grid};
pub use schema::AttrSchema;

/// Channels per face-grid sample: x, y, z, nx, ny, nz, mask.
pub const FACE_CHANNELS: usize = 7;
/// Channels per curve-grid sample: x, y, z, tx, ty, tz.
pub const CURVE_CHANNELS: usize = 6;

/// Grid resolutions (defaults 10/10/10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridDims {
    pub gu: usize,
    pub gv: usize,
    pub gt: usize,
}

impl Default for GridDims {
    fn default() -> Self {
        GridDims {
            gu: 10,
            gv: 10,
            gt: 10,
        }
    }
}

impl GridDims {
    pub fn validate(&self) -> Result<()> {
        if self.gu < 2 || self.gv < 2 || self.gt < 2 {
            return Err(Error::Contract(format!(
                "grid dims must be >= 2, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn face_grid_len(&self) -> usize {
        self.gu * self.gv * FACE_CHANNELS
    }

    pub fn curve_grid_len(&self) -> usize {
        self.gt * CURVE_CHANNELS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceRawFeatures {
    pub surface_type: usize,
    pub area: f32,
    /// Row-major `[gu][gv][7]`. Masked-out samples carry zeros in the
    /// point/normal channels.
    pub uv_grid: Vec<f32>,
    /// Dense product-attribute encoding, see [`AttrSchema`]. May be empty.
    pub product: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRawFeatures {
    pub curve_type: usize,
    pub length: f32,
    /// Row-major `[gt][6]`.
    pub t_grid: Vec<f32>,
}

/// A graph plus per-node and per-edge raw features, keyed exactly by the
/// graph's nodes and edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures {
    pub graph: PartGraph,
    pub dims: GridDims,
    pub product_dim: usize,
    pub faces: BTreeMap<FaceId, FaceRawFeatures>,
    pub edges: BTreeMap<(FaceId, FaceId), CurveRawFeatures>,
}

impl GraphFeatures {
    /// Feature maps must be keyed exactly by V and E.
    pub fn validate(&self) -> Result<()> {
        if self.faces.len() != self.graph.nodes.len()
            || self.graph.nodes.iter().any(|n| !self.faces.contains_key(n))
        {
            return Err(Error::Contract(format!(
                "face features keyed by {} ids, graph has {} nodes",
                self.faces.len(),
                self.graph.nodes.len()
            )));
        }
        if self.edges.len() != self.graph.edges.len()
            || self
                .graph
                .edges
                .iter()
                .any(|e| !self.edges.contains_key(&(e.a.clone(), e.b.clone())))
        {
            return Err(Error::Contract(format!(
                "edge features keyed by {} pairs, graph has {} edges",
                self.edges.len(),
                self.graph.edges.len()
            )));
        }
        for (id, f) in &self.faces {
            if f.uv_grid.len() != self.dims.face_grid_len() {
                return Err(Error::Contract(format!("face {id}: bad grid length")));
            }
            if f.product.len() != self.product_dim {
                return Err(Error::Contract(format!("face {id}: bad product length")));
            }
        }
        for ((a, b), c) in &self.edges {
            if c.t_grid.len() != self.dims.curve_grid_len() {
                return Err(Error::Contract(format!("edge ({a},{b}): bad grid length")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod testgen {
    //! Random GraphFeatures fixtures for unit tests.

    use super::*;
    use crate::brep::{GraphEdge, PartGraph};
    use crate::rng::Stream;

    pub const DIMS: GridDims = GridDims { gu: 2, gv: 2, gt: 2 };

    /// Random features over an explicit topology (node count + edge pairs).
    /// Feature values are strictly nonzero so masking is observable.
    pub fn random_gf(seed: u64, node_count: usize, edge_pairs: &[(usize, usize)]) -> GraphFeatures {
        let mut rng = Stream::derive(seed, &["testgen"]);
        let name = |i: usize| FaceId::new(format!("n{i:03}"));
        let nodes: Vec<FaceId> = (0..node_count).map(name).collect();
        let mut faces = BTreeMap::new();
        for (i, id) in nodes.iter().enumerate() {
            faces.insert(
                id.clone(),
                FaceRawFeatures {
                    surface_type: i % 6,
                    area: rng.uniform_in(0.1, 2.0) as f32,
                    uv_grid: (0..DIMS.face_grid_len())
                        .map(|_| rng.uniform_in(0.1, 1.0) as f32)
                        .collect(),
                    product: vec![rng.uniform_in(0.1, 1.0) as f32; 2],
                },
            );
        }
        let mut edges = Vec::new();
        let mut edge_feats = BTreeMap::new();
        for (k, &(i, j)) in edge_pairs.iter().enumerate() {
            assert!(i != j && i < node_count && j < node_count);
            let (a, b) = if name(i) < name(j) {
                (name(i), name(j))
            } else {
                (name(j), name(i))
            };
            if edge_feats.contains_key(&(a.clone(), b.clone())) {
                continue;
            }
            edge_feats.insert(
                (a.clone(), b.clone()),
                CurveRawFeatures {
                    curve_type: k % 3,
                    length: rng.uniform_in(0.1, 2.0) as f32,
                    t_grid: (0..DIMS.curve_grid_len())
                        .map(|_| rng.uniform_in(0.1, 1.0) as f32)
                        .collect(),
                },
            );
            edges.push(GraphEdge {
                a,
                b,
                curve: format!("c{k:03}").as_str().into(),
            });
        }
        edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        let gf = GraphFeatures {
            graph: PartGraph {
                part_id: format!("part-{seed}").as_str().into(),
                nodes,
                edges,
            },
            dims: DIMS,
            product_dim: 2,
            faces,
            edges: edge_feats,
        };
        gf.validate().unwrap();
        gf
    }

    /// Erdős–Rényi-style random graph.
    pub fn random_graph_gf(seed: u64, node_count: usize, edge_prob: f64) -> GraphFeatures {
        let mut rng = Stream::derive(seed, &["testgen-er"]);
        let mut pairs = Vec::new();
        for i in 0..node_count {
            for j in i + 1..node_count {
                if rng.chance(edge_prob) {
                    pairs.push((i, j));
                }
            }
        }
        random_gf(seed ^ 0x5a5a, node_count, &pairs)
    }
}
