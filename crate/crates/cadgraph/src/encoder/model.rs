//! Encoder forward pass on a tape.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::assemble::{GraphTensors, TypeRouting};
use super::{EncoderConfig, EncoderParams, GateMode};
use crate::error::{Error, Result};
use crate::features::GraphFeatures;
use crate::nn::{Real, Tape, Tensor, ValueId};

/// Parameters staged onto a tape as leaves, addressable by name.
pub struct StagedParams {
    ids: BTreeMap<String, ValueId>,
    ordered: Vec<ValueId>,
}

impl StagedParams {
    pub fn stage<R: Real>(
        tape: &mut Tape<R>,
        params: &EncoderParams<R>,
        trainable: bool,
    ) -> StagedParams {
        let mut ids = BTreeMap::new();
        let mut ordered = Vec::new();
        for (name, tensor) in params.named() {
            let id = tape.leaf(tensor, trainable);
            ids.insert(name, id);
            ordered.push(id);
        }
        StagedParams { ids, ordered }
    }

    /// Value ids in `EncoderParams::named` order.
    pub fn ordered_ids(&self) -> &[ValueId] {
        &self.ordered
    }

    fn get(&self, name: &str) -> ValueId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("staged parameter {name} missing"))
    }
}

/// One forward pass context: a fresh tape plus staged parameters.
pub struct EncodeSession<'p, R: Real> {
    pub tape: Tape<R>,
    pub staged: StagedParams,
    params: &'p EncoderParams<R>,
}

/// Outputs of one encode: the graph embedding and the per-layer node
/// embeddings (layer 0 = input embedding).
pub struct EncodeTrace {
    pub z: ValueId,
    pub node_layers: Vec<ValueId>,
}

impl<'p, R: Real> EncodeSession<'p, R> {
    pub fn new(params: &'p EncoderParams<R>, trainable: bool) -> Self {
        let mut tape = Tape::new();
        let staged = StagedParams::stage(&mut tape, params, trainable);
        EncodeSession {
            tape,
            staged,
            params,
        }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.params.config
    }

    fn mlp(&mut self, x: ValueId, prefix: &str) -> Result<ValueId> {
        let w1 = self.staged.get(&format!("{prefix}.w1"));
        let b1 = self.staged.get(&format!("{prefix}.b1"));
        let w2 = self.staged.get(&format!("{prefix}.w2"));
        let b2 = self.staged.get(&format!("{prefix}.b2"));
        let h = self.tape.matmul(x, w1)?;
        let h = self.tape.bias_add(h, b1)?;
        let h = self.tape.relu(h);
        let out = self.tape.matmul(h, w2)?;
        self.tape.bias_add(out, b2)
    }

    /// Per-type MLP bank: rows are grouped by type, transformed by their
    /// bank member, and restored to canonical row order.
    fn routed_mlp(
        &mut self,
        x: ValueId,
        routing: &TypeRouting,
        bank_prefix: &str,
        out_dim: usize,
    ) -> Result<ValueId> {
        if routing.groups.is_empty() {
            return Ok(self.tape.constant(Tensor::zeros(&[0, out_dim])));
        }
        if routing.groups.len() == 1 {
            let (ty, rows) = &routing.groups[0];
            let in_order = rows.windows(2).all(|w| w[0] + 1 == w[1]) && rows[0] == 0;
            let prefix = format!("{bank_prefix}.{ty}");
            if in_order {
                return self.mlp(x, &prefix);
            }
        }
        let mut blocks = Vec::with_capacity(routing.groups.len());
        for (ty, rows) in &routing.groups {
            let sub = self.tape.row_gather(x, Arc::new(rows.clone()))?;
            blocks.push(self.mlp(sub, &format!("{bank_prefix}.{ty}"))?);
        }
        let grouped = self.tape.concat(0, &blocks)?;
        self.tape.row_gather(grouped, routing.ungroup.clone())
    }

    fn conv_stack_2d(&mut self, grids: ValueId, rows: usize) -> Result<ValueId> {
        let (_, c2) = self.config().cnn_channels;
        let x = self.tape.conv2d(
            grids,
            self.staged.get("face_cnn.conv1.w"),
            self.staged.get("face_cnn.conv1.b"),
        )?;
        let x = self.tape.relu(x);
        let x = self.tape.conv2d(
            x,
            self.staged.get("face_cnn.conv2.w"),
            self.staged.get("face_cnn.conv2.b"),
        )?;
        let x = self.tape.relu(x);
        let x = self.tape.adaptive_avg_pool2d(x, (1, 1))?;
        let x = self.tape.reshape(x, &[rows, c2])?;
        let x = self.tape.matmul(x, self.staged.get("face_cnn.dense.w"))?;
        self.tape.bias_add(x, self.staged.get("face_cnn.dense.b"))
    }

    fn conv_stack_1d(&mut self, grids: ValueId, rows: usize) -> Result<ValueId> {
        let (_, c2) = self.config().cnn_channels;
        let x = self.tape.conv1d(
            grids,
            self.staged.get("curve_cnn.conv1.w"),
            self.staged.get("curve_cnn.conv1.b"),
        )?;
        let x = self.tape.relu(x);
        let x = self.tape.conv1d(
            x,
            self.staged.get("curve_cnn.conv2.w"),
            self.staged.get("curve_cnn.conv2.b"),
        )?;
        let x = self.tape.relu(x);
        let x = self.tape.adaptive_avg_pool1d(x, 1)?;
        let x = self.tape.reshape(x, &[rows, c2])?;
        let x = self.tape.matmul(x, self.staged.get("curve_cnn.dense.w"))?;
        self.tape.bias_add(x, self.staged.get("curve_cnn.dense.b"))
    }

    /// Fuse raw features into initial node and edge embeddings.
    pub fn embed_inputs(&mut self, t: &GraphTensors<R>) -> Result<(ValueId, ValueId)> {
        let cfg = self.config().clone();
        // nodes
        let grids = self.tape.constant(t.face_grids.clone());
        let uv = self.conv_stack_2d(grids, t.node_count)?;
        let geo_in = self.tape.constant(t.face_geo.clone());
        let geo = self.routed_mlp(geo_in, &t.face_routing, "face_geo", cfg.node_geo_dim)?;
        let prod_in = self.tape.constant(t.product.clone());
        let prod = self.mlp(prod_in, "product")?;
        let h0 = self.tape.concat(1, &[uv, geo, prod])?;
        // edges
        let e0 = if t.edge_count == 0 {
            self.tape.constant(Tensor::zeros(&[0, cfg.node_dim]))
        } else {
            let grids = self.tape.constant(t.edge_grids.clone());
            let uv = self.conv_stack_1d(grids, t.edge_count)?;
            let geo_in = self.tape.constant(t.edge_geo.clone());
            let geo = self.routed_mlp(geo_in, &t.edge_routing, "curve_geo", cfg.edge_geo_dim)?;
            self.tape.concat(1, &[uv, geo])?
        };
        Ok((h0, e0))
    }

    /// One message-passing round.
    pub fn message_passing_layer(
        &mut self,
        h: ValueId,
        e: ValueId,
        t: &GraphTensors<R>,
        layer: usize,
    ) -> Result<(ValueId, ValueId)> {
        let gate_pre = match self.config().gate {
            GateMode::Sigmoid => e,
            GateMode::ProjectedSigmoid => {
                let proj = self.staged.get(&format!("layer.{layer}.gate_proj"));
                self.tape.matmul(e, proj)?
            }
        };
        let gate = self.tape.sigmoid(gate_pre);
        let agg = self
            .tape
            .gated_neighbor_sum(h, gate, t.incoming.clone())?;
        let pre = self.tape.add(h, agg)?;
        let h_next = self.mlp(pre, &format!("layer.{layer}.node"))?;

        let ha = self.tape.row_gather(h, t.endpoints.0.clone())?;
        let hb = self.tape.row_gather(h, t.endpoints.1.clone())?;
        let hsum = self.tape.add(ha, hb)?;
        let inner = self.mlp(hsum, &format!("layer.{layer}.edge_inner"))?;
        let esum = self.tape.add(e, inner)?;
        let e_next = self.mlp(esum, &format!("layer.{layer}.edge_outer"))?;
        Ok((h_next, e_next))
    }

    /// Sum the per-layer affine maps over nodes and layers.
    pub fn readout(&mut self, layer_nodes: &[ValueId]) -> Result<ValueId> {
        let selected: Vec<ValueId> = if self.config().readout_include_input {
            layer_nodes.to_vec()
        } else {
            layer_nodes[1..].to_vec()
        };
        if selected.len() != self.params.readout.len() {
            return Err(Error::Contract(format!(
                "readout got {} layers for {} parameter sets",
                selected.len(),
                self.params.readout.len()
            )));
        }
        let mut z: Option<ValueId> = None;
        for (idx, &h) in selected.iter().enumerate() {
            let w = self.staged.get(&format!("readout.{idx}.w"));
            let b = self.staged.get(&format!("readout.{idx}.b"));
            let y = self.tape.matmul(h, w)?;
            let y = self.tape.bias_add(y, b)?;
            let s = self.tape.row_sum_exact(y)?;
            z = Some(match z {
                None => s,
                Some(acc) => self.tape.add(acc, s)?,
            });
        }
        Ok(z.expect("layers >= 1"))
    }

    /// Full forward pass.
    pub fn encode(&mut self, t: &GraphTensors<R>) -> Result<EncodeTrace> {
        if t.node_count == 0 {
            return Err(Error::Contract("encode of an empty graph".into()));
        }
        let (mut h, mut e) = self.embed_inputs(t)?;
        let mut node_layers = vec![h];
        for layer in 0..self.config().layers {
            let (h2, e2) = self.message_passing_layer(h, e, t, layer)?;
            h = h2;
            e = e2;
            node_layers.push(h);
        }
        let z = self.readout(&node_layers)?;
        Ok(EncodeTrace { z, node_layers })
    }
}

/// Run a full encode where the parameters already live on the tape as
/// leaves (in [`EncoderParams::named`] order). Finite-difference harnesses
/// use this to differentiate the whole encoder w.r.t. its parameters.
pub fn encode_with_param_leaves<R: Real>(
    config: &EncoderConfig,
    tape: &mut Tape<R>,
    param_ids: &[ValueId],
    tensors: &GraphTensors<R>,
) -> Result<ValueId> {
    let mut params = EncoderParams::<R>::init(config, 0)?;
    let values: Vec<Tensor<R>> = param_ids.iter().map(|&id| tape.value(id).clone()).collect();
    if values.len() != params.named().len() {
        return Err(Error::Contract(format!(
            "{} parameter leaves for {} tensors",
            values.len(),
            params.named().len()
        )));
    }
    params.set_from_list(&values);
    let mut ids = BTreeMap::new();
    for ((name, _), &id) in params.named().iter().zip(param_ids.iter()) {
        ids.insert(name.clone(), id);
    }
    let mut session = EncodeSession {
        tape: std::mem::take(tape),
        staged: StagedParams {
            ids,
            ordered: param_ids.to_vec(),
        },
        params: &params,
    };
    let trace = session.encode(tensors)?;
    *tape = std::mem::take(&mut session.tape);
    Ok(trace.z)
}

/// Inference: embedding vector for one graph (no gradients recorded).
pub fn encode_value<R: Real>(params: &EncoderParams<R>, gf: &GraphFeatures) -> Result<Tensor<R>> {
    let tensors = GraphTensors::build(gf)?;
    let mut session = EncodeSession::new(params, false);
    let trace = session.encode(&tensors)?;
    Ok(session.tape.value(trace.z).clone())
}

/// Inference with the per-layer node embeddings materialized (layer 0 is
/// the input embedding).
pub fn encode_with_trace<R: Real>(
    params: &EncoderParams<R>,
    gf: &GraphFeatures,
) -> Result<(Tensor<R>, Vec<Tensor<R>>)> {
    let tensors = GraphTensors::build(gf)?;
    let mut session = EncodeSession::new(params, false);
    let trace = session.encode(&tensors)?;
    let layers = trace
        .node_layers
        .iter()
        .map(|&id| session.tape.value(id).clone())
        .collect();
    Ok((session.tape.value(trace.z).clone(), layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::{FaceId, GraphEdge, PartGraph};
    use crate::features::{
        CurveRawFeatures, FaceRawFeatures, GraphFeatures, GridDims, CURVE_CHANNELS, FACE_CHANNELS,
    };
    use crate::nn::gradcheck;
    use crate::rng::Stream;

    const DIMS: GridDims = GridDims { gu: 4, gv: 4, gt: 4 };
    const PRODUCT_DIM: usize = 3;

    fn node_id(i: usize) -> FaceId {
        FaceId::new(format!("n{i:02}"))
    }

    /// Random GraphFeatures over an explicit topology.
    fn test_gf(
        seed: u64,
        node_types: &[usize],
        edges: &[(usize, usize)],
        relabel: Option<&dyn Fn(usize) -> String>,
    ) -> GraphFeatures {
        let mut rng = Stream::derive(seed, &["test-gf"]);
        let name = |i: usize| -> FaceId {
            match relabel {
                Some(f) => FaceId::new(f(i)),
                None => node_id(i),
            }
        };
        let mut nodes: Vec<FaceId> = (0..node_types.len()).map(name).collect();
        let mut faces = std::collections::BTreeMap::new();
        for (i, &ty) in node_types.iter().enumerate() {
            let uv_grid: Vec<f32> = (0..DIMS.gu * DIMS.gv * FACE_CHANNELS)
                .map(|_| rng.uniform_in(-1.0, 1.0) as f32)
                .collect();
            let product: Vec<f32> = (0..PRODUCT_DIM)
                .map(|_| rng.uniform_in(-1.0, 1.0) as f32)
                .collect();
            faces.insert(
                name(i),
                FaceRawFeatures {
                    surface_type: ty,
                    area: rng.uniform_in(0.1, 2.0) as f32,
                    uv_grid,
                    product,
                },
            );
        }
        let mut edge_list = Vec::new();
        let mut edge_feats = std::collections::BTreeMap::new();
        for (k, &(i, j)) in edges.iter().enumerate() {
            let (a, b) = {
                let (ni, nj) = (name(i), name(j));
                if ni < nj { (ni, nj) } else { (nj, ni) }
            };
            let t_grid: Vec<f32> = (0..DIMS.gt * CURVE_CHANNELS)
                .map(|_| rng.uniform_in(-1.0, 1.0) as f32)
                .collect();
            edge_feats.insert(
                (a.clone(), b.clone()),
                CurveRawFeatures {
                    curve_type: k % 3,
                    length: rng.uniform_in(0.1, 2.0) as f32,
                    t_grid,
                },
            );
            edge_list.push(GraphEdge {
                a,
                b,
                curve: format!("e{k:02}").as_str().into(),
            });
        }
        nodes.sort();
        edge_list.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        GraphFeatures {
            graph: PartGraph {
                part_id: "test".into(),
                nodes,
                edges: edge_list,
            },
            dims: DIMS,
            product_dim: PRODUCT_DIM,
            faces,
            edges: edge_feats,
        }
    }

    fn tiny_params(seed: u64) -> EncoderParams<f64> {
        let mut config = EncoderConfig::tiny(PRODUCT_DIM);
        config.grid = DIMS;
        EncoderParams::init(&config, seed).unwrap()
    }

    #[test]
    fn encode_is_pure() {
        let params = tiny_params(3);
        let gf = test_gf(1, &[0, 1, 0], &[(0, 1), (1, 2)], None);
        let a = encode_value(&params, &gf).unwrap();
        let b = encode_value(&params, &gf).unwrap();
        assert_eq!(a, b);
        assert!(a.all_finite());
        assert_eq!(a.shape(), &[params.config.graph_dim]);
    }

    #[test]
    fn different_surface_types_use_different_banks() {
        let params = tiny_params(5);
        // identical features except the surface type of node 1
        let gf_a = test_gf(2, &[0, 0], &[(0, 1)], None);
        let gf_b = {
            let mut gf = gf_a.clone();
            gf.faces.get_mut(&node_id(1)).unwrap().surface_type = 1;
            gf
        };
        gf_a.validate().unwrap();
        let za = encode_value(&params, &gf_a).unwrap();
        let zb = encode_value(&params, &gf_b).unwrap();
        assert_ne!(za, zb);
    }

    #[test]
    fn all_zero_features_flow_through_the_bias_pathway() {
        let params = tiny_params(7);
        let mut gf = test_gf(3, &[0, 2], &[(0, 1)], None);
        for f in gf.faces.values_mut() {
            f.uv_grid.iter_mut().for_each(|x| *x = 0.0);
            f.product.iter_mut().for_each(|x| *x = 0.0);
            f.area = 0.0;
        }
        for e in gf.edges.values_mut() {
            e.t_grid.iter_mut().for_each(|x| *x = 0.0);
            e.length = 0.0;
        }
        let z = encode_value(&params, &gf).unwrap();
        assert!(z.all_finite());
    }

    #[test]
    fn isolated_node_update_is_f_of_h() {
        let params = tiny_params(11);
        // one isolated node plus a connected pair; the isolated node's h1
        // must equal f(h0) exactly (empty neighbor sum)
        let gf = test_gf(4, &[0, 1, 1], &[(1, 2)], None);
        let tensors = GraphTensors::build(&gf).unwrap();
        let mut session = EncodeSession::new(&params, false);
        let trace = session.encode(&tensors).unwrap();
        let h0 = session.tape.value(trace.node_layers[0]).clone();
        let h1 = session.tape.value(trace.node_layers[1]).clone();
        // row 0 is the isolated node (sorted ids)
        let d = params.config.node_dim;
        let iso_in = Tensor::from_vec(&[1, d], h0.data()[..d].to_vec()).unwrap();
        let mut check = EncodeSession::new(&params, false);
        let x = check.tape.constant(iso_in);
        let y = check.mlp(x, "layer.0.node").unwrap();
        assert_eq!(check.tape.value(y).data(), &h1.data()[..d]);
    }

    #[test]
    fn symmetric_pair_stays_symmetric() {
        let params = tiny_params(13);
        let mut gf = test_gf(5, &[2, 2], &[(0, 1)], None);
        // make both nodes identical
        let f0 = gf.faces[&node_id(0)].clone();
        gf.faces.insert(node_id(1), f0);
        let (_, layers) = encode_with_trace(&params, &gf).unwrap();
        let d = params.config.node_dim;
        for h in &layers {
            assert_eq!(&h.data()[..d], &h.data()[d..2 * d], "rows diverged");
        }
    }

    #[test]
    fn node_relabeling_keeps_z_bitwise_identical() {
        let params = tiny_params(17);
        let types = [0, 1, 2, 0, 1];
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)];
        let z0 = encode_value(&params, &test_gf(6, &types, &edges, None)).unwrap();
        // reverse the id order: node i -> "m{9-i}"
        let relabel = |i: usize| format!("m{:02}", 9 - i);
        let z1 = encode_value(&params, &test_gf(6, &types, &edges, Some(&relabel))).unwrap();
        assert_eq!(z0, z1);
    }

    #[test]
    fn disjoint_duplication_exactly_doubles_z() {
        let params = tiny_params(19);
        let types = [0, 1, 2];
        let edges = [(0, 1), (1, 2)];
        let single = test_gf(7, &types, &edges, None);
        let z1 = encode_value(&params, &single).unwrap();

        // two disjoint copies with fresh ids, identical features
        let mut doubled = test_gf(7, &types, &edges, None);
        let copajes: Vec<(FaceId, FaceId)> = (0..types.len())
            .map(|i| (node_id(i), FaceId::new(format!("x{i:02}"))))
            .collect();
        for (orig, copy) in &copajes {
            let f = doubled.faces[orig].clone();
            doubled.faces.insert(copy.clone(), f);
            doubled.graph.nodes.push(copy.clone());
        }
        doubled.graph.nodes.sort();
        for (k, &(i, j)) in edges.iter().enumerate() {
            let (a, b) = (FaceId::new(format!("x{i:02}")), FaceId::new(format!("x{j:02}")));
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            let feat = doubled.edges[&(node_id(i), node_id(j))].clone();
            doubled.edges.insert((a.clone(), b.clone()), feat);
            doubled.graph.edges.push(GraphEdge {
                a,
                b,
                curve: format!("y{k:02}").as_str().into(),
            });
        }
        doubled
            .graph
            .edges
            .sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        doubled.validate().unwrap();
        let z2 = encode_value(&params, &doubled).unwrap();
        let expected: Vec<f64> = z1.data().iter().map(|&x| 2.0 * x).collect();
        assert_eq!(z2.data(), &expected[..]);
    }

    #[test]
    fn locality_footprint_matches_graph_distance() {
        let params = tiny_params(23);
        // path 0-1-2-3-4-5; perturb node 0's features
        let types = [0, 0, 1, 1, 2, 2];
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
        let base = test_gf(8, &types, &edges, None);
        let mut bumped = base.clone();
        bumped.faces.get_mut(&node_id(0)).unwrap().uv_grid[5] += 0.25;
        let (_, layers_a) = encode_with_trace(&params, &base).unwrap();
        let (_, layers_b) = encode_with_trace(&params, &bumped).unwrap();
        let d = params.config.node_dim;
        for (k, (ha, hb)) in layers_a.iter().zip(layers_b.iter()).enumerate() {
            let changed: Vec<usize> = (0..6)
                .filter(|&v| ha.data()[v * d..(v + 1) * d] != hb.data()[v * d..(v + 1) * d])
                .collect();
            let expected: Vec<usize> = (0..=k.min(5)).collect();
            assert_eq!(changed, expected, "layer {k}");
        }
    }

    #[test]
    fn single_node_identity_readout_returns_h1() {
        // node_dim == graph_dim, K = 1, w = I, b = 0 -> z = h^(1)
        let config = EncoderConfig {
            node_dim: 16,
            graph_dim: 16,
            layers: 1,
            node_uv_dim: 8,
            node_geo_dim: 4,
            node_product_dim: 4,
            edge_uv_dim: 12,
            edge_geo_dim: 4,
            cnn_channels: (4, 6),
            mlp_hidden: 6,
            layer_hidden: 16,
            gate: GateMode::Sigmoid,
            readout_include_input: false,
            grid: DIMS,
            product_dim: PRODUCT_DIM,
        };
        let mut params = EncoderParams::<f64>::init(&config, 31).unwrap();
        let mut eye = vec![0.0f64; 16 * 16];
        for i in 0..16 {
            eye[i * 16 + i] = 1.0;
        }
        params.readout[0].w = Tensor::from_vec(&[16, 16], eye).unwrap();
        params.readout[0].b = Tensor::zeros(&[16]);
        let gf = test_gf(9, &[1], &[], None);
        let (z, layers) = encode_with_trace(&params, &gf).unwrap();
        assert_eq!(z.data(), layers[1].data());
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let mut config = EncoderConfig::tiny(PRODUCT_DIM);
        config.grid = DIMS;
        config.gate = GateMode::ProjectedSigmoid; // exercise the projection too
        let params = EncoderParams::<f64>::init(&config, 37).unwrap();
        let gf = test_gf(10, &[0, 1, 2], &[(0, 1), (1, 2)], None);
        let tensors = GraphTensors::build(&gf).unwrap();
        let named = params.named();
        let inputs: Vec<Tensor<f64>> = named.iter().map(|(_, t)| t.clone()).collect();
        let mut probe_rng = Stream::derive(99, &["probe"]);
        let probe: Vec<Vec<usize>> = inputs
            .iter()
            .map(|t| {
                (0..3.min(t.len()))
                    .map(|_| probe_rng.below(t.len()))
                    .collect()
            })
            .collect();
        let config2 = config.clone();
        let report = gradcheck::check(
            move |tape, ids| {
                let mut freshened = EncoderParams::init(&config2, 37).unwrap();
                let tensors_list: Vec<Tensor<f64>> =
                    ids.iter().map(|&id| tape.value(id).clone()).collect();
                freshened.set_from_list(&tensors_list);
                // stage using the provided leaf ids
                let mut staged_ids = BTreeMap::new();
                for ((name, _), &id) in freshened.named().iter().zip(ids.iter()) {
                    staged_ids.insert(name.clone(), id);
                }
                let mut session = EncodeSession {
                    tape: std::mem::take(tape),
                    staged: StagedParams {
                        ids: staged_ids,
                        ordered: ids.to_vec(),
                    },
                    params: &freshened,
                };
                let trace = session.encode(&tensors)?;
                let z = trace.z;
                // fixed weights -> scalar
                let weights: Vec<f64> = (0..config2.graph_dim)
                    .map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4)
                    .collect();
                let w = session
                    .tape
                    .constant(Tensor::from_vec(&[config2.graph_dim], weights).unwrap());
                let prod = session.tape.mul(z, w)?;
                let loss = session.tape.sum_all(prod);
                *tape = std::mem::take(&mut session.tape);
                Ok(loss)
            },
            &inputs,
            Some(&probe),
        )
        .unwrap();
        assert!(
            report.max_rel_err <= 1e-4,
            "encoder rel err {}",
            report.max_rel_err
        );
    }
}
