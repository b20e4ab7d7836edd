//! Stochastic graph views for contrastive training.
//!
//! Two perturbations compose into a view: feature masking zero-fills whole
//! raw-feature groups (a node's uv grid, geo scalars or product vector; an
//! edge's t grid or length) each with probability `alpha`; structural
//! deletion removes nodes under one of three schemes targeting
//! `m = round(beta * |V|)` removals, capped so at least one node survives.
//! Deletion only — views never gain nodes, edges or features.
//!
//! Randomness is drawn from streams keyed by `(seed, part id, epoch, view)`,
//! so views are reproducible and independent of batch order or thread
//! schedule.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::brep::FaceId;
use crate::error::{Error, Result};
use crate::features::GraphFeatures;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentScheme {
    /// Remove m uniformly chosen nodes.
    Node,
    /// Remove seed nodes plus their current 1-hop neighbors until >= m.
    Node1Hop,
    /// Remove uniformly chosen edges with both endpoints until >= m.
    EdgeVertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Feature mask ratio, in [0, 0.2].
    pub alpha: f64,
    /// Structure mask ratio, in [0, 0.2].
    pub beta: f64,
    pub scheme: AugmentScheme,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            alpha: 0.1,
            beta: 0.1,
            scheme: AugmentScheme::Node,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let in_range = |x: f64| (0.0..=0.2).contains(&x);
        if !in_range(self.alpha) || !in_range(self.beta) {
            return Err(Error::Config(format!(
                "augmentation ratios must lie in [0, 0.2], got alpha {} beta {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Bookkeeping for one structural draw (overshoot is allowed for the
/// neighborhood/edge schemes and recorded here).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropStats {
    pub target: usize,
    pub removed: usize,
}

/// Zero whole feature groups with probability `alpha` each. Topology is
/// untouched. Draw order is the canonical node/edge order.
pub fn mask_features(gf: &GraphFeatures, alpha: f64, rng: &mut Stream) -> GraphFeatures {
    let mut out = gf.clone();
    for node in &out.graph.nodes {
        let f = out.faces.get_mut(node).expect("validated keys");
        if rng.chance(alpha) {
            f.uv_grid.iter_mut().for_each(|x| *x = 0.0);
        }
        if rng.chance(alpha) {
            f.area = 0.0;
        }
        if rng.chance(alpha) {
            f.product.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    for edge in &out.graph.edges {
        let e = out
            .edges
            .get_mut(&(edge.a.clone(), edge.b.clone()))
            .expect("validated keys");
        if rng.chance(alpha) {
            e.t_grid.iter_mut().for_each(|x| *x = 0.0);
        }
        if rng.chance(alpha) {
            e.length = 0.0;
        }
    }
    out
}

/// Remove nodes per the scheme; all incident edges follow their nodes. The
/// result always keeps at least one node. `EdgeVertices` degenerates to
/// uniform node removal once no edges remain and the target is unmet.
pub fn drop_structure(
    gf: &GraphFeatures,
    beta: f64,
    scheme: AugmentScheme,
    rng: &mut Stream,
) -> (GraphFeatures, DropStats) {
    let v = gf.graph.nodes.len();
    let target = ((beta * v as f64).round() as usize).min(v.saturating_sub(1));
    if target == 0 {
        return (
            gf.clone(),
            DropStats {
                target: 0,
                removed: 0,
            },
        );
    }
    let mut removed: BTreeSet<usize> = BTreeSet::new();
    let alive = |removed: &BTreeSet<usize>, i: usize| !removed.contains(&i);
    let guard = |removed: &BTreeSet<usize>| v - removed.len() > 1;

    match scheme {
        AugmentScheme::Node => {
            removed.extend(rng.sample_indices(v, target));
        }
        AugmentScheme::Node1Hop => {
            while removed.len() < target && guard(&removed) {
                let remaining: Vec<usize> = (0..v).filter(|&i| alive(&removed, i)).collect();
                let seed_node = remaining[rng.below(remaining.len())];
                let mut batch = vec![seed_node];
                for edge in &gf.graph.edges {
                    let a = node_row(gf, &edge.a);
                    let b = node_row(gf, &edge.b);
                    if a == seed_node && alive(&removed, b) {
                        batch.push(b);
                    } else if b == seed_node && alive(&removed, a) {
                        batch.push(a);
                    }
                }
                batch.sort_unstable();
                batch.dedup();
                // seed first, then neighbors ascending
                batch.retain(|&i| i != seed_node);
                batch.insert(0, seed_node);
                for i in batch {
                    if !guard(&removed) {
                        break;
                    }
                    removed.insert(i);
                }
            }
        }
        AugmentScheme::EdgeVertices => {
            while removed.len() < target && guard(&removed) {
                let live_edges: Vec<(usize, usize)> = gf
                    .graph
                    .edges
                    .iter()
                    .map(|e| (node_row(gf, &e.a), node_row(gf, &e.b)))
                    .filter(|&(a, b)| alive(&removed, a) && alive(&removed, b))
                    .collect();
                if live_edges.is_empty() {
                    // no edges left: fall back to plain node removal
                    let remaining: Vec<usize> = (0..v).filter(|&i| alive(&removed, i)).collect();
                    let pick = remaining[rng.below(remaining.len())];
                    removed.insert(pick);
                    continue;
                }
                let (a, b) = live_edges[rng.below(live_edges.len())];
                for i in [a.min(b), a.max(b)] {
                    if guard(&removed) {
                        removed.insert(i);
                    }
                }
            }
        }
    }

    let stats = DropStats {
        target,
        removed: removed.len(),
    };
    (retain_nodes(gf, &removed), stats)
}

fn node_row(gf: &GraphFeatures, id: &FaceId) -> usize {
    gf.graph.nodes.binary_search(id).expect("sorted nodes")
}

fn retain_nodes(gf: &GraphFeatures, removed_rows: &BTreeSet<usize>) -> GraphFeatures {
    let removed_ids: BTreeSet<&FaceId> = removed_rows
        .iter()
        .map(|&i| &gf.graph.nodes[i])
        .collect();
    let nodes: Vec<FaceId> = gf
        .graph
        .nodes
        .iter()
        .filter(|id| !removed_ids.contains(id))
        .cloned()
        .collect();
    let edges: Vec<_> = gf
        .graph
        .edges
        .iter()
        .filter(|e| !removed_ids.contains(&e.a) && !removed_ids.contains(&e.b))
        .cloned()
        .collect();
    let faces = gf
        .faces
        .iter()
        .filter(|(id, _)| !removed_ids.contains(id))
        .map(|(id, f)| (id.clone(), f.clone()))
        .collect();
    let edge_keys: BTreeSet<(FaceId, FaceId)> = edges
        .iter()
        .map(|e| (e.a.clone(), e.b.clone()))
        .collect();
    let edge_feats = gf
        .edges
        .iter()
        .filter(|(key, _)| edge_keys.contains(key))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    GraphFeatures {
        graph: crate::brep::PartGraph {
            part_id: gf.graph.part_id.clone(),
            nodes,
            edges,
        },
        dims: gf.dims,
        product_dim: gf.product_dim,
        faces,
        edges: edge_feats,
    }
}

/// One line of the augmentation audit log (JSONL), for debugging draws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub part: String,
    pub epoch: u64,
    pub view: usize,
    pub scheme: AugmentScheme,
    #[serde(flatten)]
    pub stats: DropStats,
}

impl AugmentRecord {
    pub fn new(
        part: &crate::brep::PartId,
        epoch: u64,
        view: usize,
        scheme: AugmentScheme,
        stats: DropStats,
    ) -> AugmentRecord {
        AugmentRecord {
            part: part.to_string(),
            epoch,
            view,
            scheme,
            stats,
        }
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("plain fields") + "\n"
    }
}

/// Two independent views: each applies `drop_structure` then
/// `mask_features` from its own stream keyed by
/// `(config seed, part id, epoch, view index)`.
pub fn augment_pair(
    gf: &GraphFeatures,
    cfg: &AugmentConfig,
    epoch: u64,
) -> (GraphFeatures, GraphFeatures, [DropStats; 2]) {
    let make_view = |view: usize| {
        let mut rng = Stream::derive(
            cfg.seed,
            &[
                "augment",
                gf.graph.part_id.as_str(),
                &epoch.to_string(),
                &view.to_string(),
            ],
        );
        let (dropped, stats) = drop_structure(gf, cfg.beta, cfg.scheme, &mut rng);
        (mask_features(&dropped, cfg.alpha, &mut rng), stats)
    };
    let (view1, stats1) = make_view(0);
    let (view2, stats2) = make_view(1);
    (view1, view2, [stats1, stats2])
}
