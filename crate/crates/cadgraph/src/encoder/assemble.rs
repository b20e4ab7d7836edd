//! Graph features -> tensors, in canonical order.
//!
//! Nodes take the graph's sorted-id order; edges keep the graph's sorted
//! `(a, b)` order. Grids are transposed to channel-first for the CNNs. Type
//! routing is precomputed as (type, row indices) groups plus the inverse
//! permutation that restores canonical row order after per-type MLPs.

use std::sync::Arc;

use crate::brep::{NUM_CURVE_TYPES, NUM_SURFACE_TYPES};
use crate::error::{Error, Result};
use crate::features::{GraphFeatures, CURVE_CHANNELS, FACE_CHANNELS};
use crate::nn::tape::Incoming;
use crate::nn::{Real, Tensor};

/// Row groups per type: `(type index, rows in ascending order)`, plus the
/// gather indices that undo the grouped concatenation.
#[derive(Debug, Clone)]
pub struct TypeRouting {
    pub groups: Vec<(usize, Vec<usize>)>,
    pub ungroup: Arc<Vec<usize>>,
}

fn routing(types: &[usize], bank_size: usize, what: &str) -> Result<TypeRouting> {
    for (row, &t) in types.iter().enumerate() {
        if t >= bank_size {
            return Err(Error::Routing(format!(
                "{what} row {row} has type index {t}, bank size {bank_size}"
            )));
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for t in 0..bank_size {
        let rows: Vec<usize> = types
            .iter()
            .enumerate()
            .filter_map(|(row, &ty)| (ty == t).then_some(row))
            .collect();
        if !rows.is_empty() {
            groups.push((t, rows));
        }
    }
    let mut ungroup = vec![0usize; types.len()];
    let mut position = 0;
    for (_, rows) in &groups {
        for &row in rows {
            ungroup[row] = position;
            position += 1;
        }
    }
    Ok(TypeRouting {
        groups,
        ungroup: Arc::new(ungroup),
    })
}

/// Tensor inputs for one graph.
pub struct GraphTensors<R: Real> {
    pub node_count: usize,
    pub edge_count: usize,
    /// `[V, 7, gu, gv]`
    pub face_grids: Tensor<R>,
    /// `[V, 1]` (area)
    pub face_geo: Tensor<R>,
    /// `[V, product_dim]`
    pub product: Tensor<R>,
    pub face_routing: TypeRouting,
    /// `[E, 6, gt]`
    pub edge_grids: Tensor<R>,
    /// `[E, 1]` (length)
    pub edge_geo: Tensor<R>,
    pub edge_routing: TypeRouting,
    /// Edge endpoints as node-row indices, `(a, b)` per edge.
    pub endpoints: (Arc<Vec<usize>>, Arc<Vec<usize>>),
    /// Incoming directed-edge lists for the gated aggregation.
    pub incoming: Arc<Incoming>,
}

impl<R: Real> GraphTensors<R> {
    pub fn build(gf: &GraphFeatures) -> Result<Self> {
        gf.validate()?;
        let nodes = &gf.graph.nodes;
        let v = nodes.len();
        let e = gf.graph.edges.len();
        let (gu, gv, gt) = (gf.dims.gu, gf.dims.gv, gf.dims.gt);

        let mut face_grids = Vec::with_capacity(v * 7 * gu * gv);
        let mut face_geo = Vec::with_capacity(v);
        let mut product = Vec::with_capacity(v * gf.product_dim);
        let mut face_types = Vec::with_capacity(v);
        for id in nodes {
            let f = &gf.faces[id];
            for c in 0..FACE_CHANNELS {
                for i in 0..gu {
                    for j in 0..gv {
                        face_grids.push(R::from_f64(
                            f.uv_grid[(i * gv + j) * FACE_CHANNELS + c] as f64,
                        ));
                    }
                }
            }
            face_geo.push(R::from_f64(f.area as f64));
            product.extend(f.product.iter().map(|&x| R::from_f64(x as f64)));
            face_types.push(f.surface_type);
        }

        let mut edge_grids = Vec::with_capacity(e * 6 * gt);
        let mut edge_geo = Vec::with_capacity(e);
        let mut edge_types = Vec::with_capacity(e);
        let mut a_rows = Vec::with_capacity(e);
        let mut b_rows = Vec::with_capacity(e);
        let mut incoming = vec![Vec::new(); v];
        for (edge_row, edge) in gf.graph.edges.iter().enumerate() {
            let feat = &gf.edges[&(edge.a.clone(), edge.b.clone())];
            for c in 0..CURVE_CHANNELS {
                for i in 0..gt {
                    edge_grids.push(R::from_f64(feat.t_grid[i * CURVE_CHANNELS + c] as f64));
                }
            }
            edge_geo.push(R::from_f64(feat.length as f64));
            edge_types.push(feat.curve_type);
            let a = nodes.binary_search(&edge.a).expect("validated keys");
            let b = nodes.binary_search(&edge.b).expect("validated keys");
            a_rows.push(a);
            b_rows.push(b);
            // undirected edge contributes symmetrically to both endpoints
            incoming[a].push((b, edge_row));
            incoming[b].push((a, edge_row));
        }
        for list in incoming.iter_mut() {
            list.sort_unstable();
        }

        Ok(GraphTensors {
            node_count: v,
            edge_count: e,
            face_grids: Tensor::from_vec(&[v, 7, gu, gv], face_grids)?,
            face_geo: Tensor::from_vec(&[v, 1], face_geo)?,
            product: Tensor::from_vec(&[v, gf.product_dim], product)?,
            face_routing: routing(&face_types, NUM_SURFACE_TYPES, "face")?,
            edge_grids: Tensor::from_vec(&[e, 6, gt], edge_grids)?,
            edge_geo: Tensor::from_vec(&[e, 1], edge_geo)?,
            edge_routing: routing(&edge_types, NUM_CURVE_TYPES, "edge")?,
            endpoints: (Arc::new(a_rows), Arc::new(b_rows)),
            incoming: Arc::new(Incoming { lists: incoming }),
        })
    }
}
