//! Face-adjacency graph construction.
//!
//! One node per face. A curve adjacent to exactly two faces becomes one
//! edge. A curve adjacent to a single face (seams, bus lines on cylinders
//! and cones) contributes nothing. A curve adjacent to n > 2 faces yields
//! an edge between every pair. Two curves bounding the same face pair are
//! merged into one edge (the graph is simple); the kept edge carries the
//! lexicographically smallest originating curve id.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BRepPart, CurveId, FaceId, PartId};

/// Undirected edge between two faces, remembering the curve it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: FaceId,
    pub b: FaceId,
    pub curve: CurveId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartGraph {
    pub part_id: PartId,
    /// Face ids in ascending order.
    pub nodes: Vec<FaceId>,
    /// Edges with `a < b`, sorted by `(a, b)`.
    pub edges: Vec<GraphEdge>,
}

impl PartGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, id: &FaceId) -> usize {
        self.edges
            .iter()
            .filter(|e| &e.a == id || &e.b == id)
            .count()
    }

    /// Neighbor face ids of `id`, ascending.
    pub fn neighbors(&self, id: &FaceId) -> Vec<FaceId> {
        let mut out: Vec<FaceId> = self
            .edges
            .iter()
            .filter_map(|e| {
                if &e.a == id {
                    Some(e.b.clone())
                } else if &e.b == id {
                    Some(e.a.clone())
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }
}

/// What the converter skipped or merged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionReport {
    /// Curves adjacent to exactly one face (no edge produced).
    pub single_adjacency_skipped: usize,
    /// Curves adjacent to no face at all.
    pub orphan_curves_skipped: usize,
    /// Curves adjacent to more than two faces (expanded to pairwise edges).
    pub multi_adjacency_expanded: usize,
    /// Face pairs that were already connected by an earlier curve.
    pub duplicate_edges_merged: usize,
}

pub fn to_graph(part: &BRepPart) -> PartGraph {
    to_graph_with_report(part).0
}

pub fn to_graph_with_report(part: &BRepPart) -> (PartGraph, ConversionReport) {
    let mut nodes: Vec<FaceId> = part.faces.iter().map(|f| f.id.clone()).collect();
    nodes.sort();

    let mut report = ConversionReport::default();
    // (a, b) -> smallest curve id connecting the pair
    let mut edge_map: BTreeMap<(FaceId, FaceId), CurveId> = BTreeMap::new();
    for curve in &part.curves {
        match curve.adjacent_faces.len() {
            0 => report.orphan_curves_skipped += 1,
            1 => report.single_adjacency_skipped += 1,
            n => {
                if n > 2 {
                    report.multi_adjacency_expanded += 1;
                }
                let mut faces = curve.adjacent_faces.clone();
                faces.sort();
                for i in 0..faces.len() {
                    for j in i + 1..faces.len() {
                        let key = (faces[i].clone(), faces[j].clone());
                        match edge_map.get_mut(&key) {
                            None => {
                                edge_map.insert(key, curve.id.clone());
                            }
                            Some(existing) => {
                                report.duplicate_edges_merged += 1;
                                if curve.id < *existing {
                                    *existing = curve.id.clone();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let edges = edge_map
        .into_iter()
        .map(|((a, b), curve)| GraphEdge { a, b, curve })
        .collect();
    (
        PartGraph {
            part_id: part.id.clone(),
            nodes,
            edges,
        },
        report,
    )
}
