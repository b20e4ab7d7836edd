//! Graph encoder: raw-feature embedding, gated message passing, multi-layer
//! readout.
//!
//! Per node: a shared 2-D CNN over the uv grid, a per-surface-type MLP over
//! the geometric scalars, and a shared MLP over product attributes, fused by
//! concatenation into a `node_dim` embedding. Per edge: a shared 1-D CNN
//! plus a per-curve-type MLP fused into an `edge dim == node_dim` embedding.
//! Each of the `layers` rounds then updates
//!
//! ```text
//! h'_v = f( h_v + Σ_{u ∈ N(v)} gate(e_uv) ⊙ h_u )
//! e'_uv = g1( e_uv + g2(h_u + h_v) )
//! ```
//!
//! with `gate` an elementwise sigmoid of the edge embedding (optionally
//! preceded by a learned square projection). The readout sums a per-layer
//! affine map over all nodes and layers:
//! `z = Σ_v Σ_k (h^(k)_v W_k + b_k)`.
//!
//! Cross-node reductions (neighbor aggregation, readout) use the exact
//! accumulator, so `z` is bitwise invariant under node relabeling and
//! disjoint duplication exactly doubles it.

pub mod assemble;
pub mod model;

use serde::{Deserialize, Serialize};

use crate::brep::{NUM_CURVE_TYPES, NUM_SURFACE_TYPES};
use crate::error::{Error, Result};
use crate::features::GridDims;
use crate::nn::{Real, Tensor};
use crate::rng::Stream;

pub use assemble::GraphTensors;
pub use model::{
    encode_value, encode_with_param_leaves, encode_with_trace, EncodeSession, EncodeTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Elementwise sigmoid of the edge embedding.
    Sigmoid,
    /// Learned square projection of the edge embedding, then sigmoid.
    ProjectedSigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Node embedding width D_n (also the edge width).
    pub node_dim: usize,
    /// Graph embedding width D_g.
    pub graph_dim: usize,
    /// Message-passing rounds K.
    pub layers: usize,
    /// Node fusion plan: uv + geo + product widths must sum to node_dim.
    pub node_uv_dim: usize,
    pub node_geo_dim: usize,
    pub node_product_dim: usize,
    /// Edge fusion plan: uv + geo widths must sum to node_dim.
    pub edge_uv_dim: usize,
    pub edge_geo_dim: usize,
    /// Channel plan of the two convolution layers (shared by 2-D and 1-D).
    pub cnn_channels: (usize, usize),
    /// Hidden width of the geo/product MLPs.
    pub mlp_hidden: usize,
    /// Hidden width of the per-layer MLPs f, g1, g2.
    pub layer_hidden: usize,
    pub gate: GateMode,
    /// Include the layer-0 input embedding in the readout.
    pub readout_include_input: bool,
    pub grid: GridDims,
    /// Dense product vector width (schema-dependent; may be 0).
    pub product_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            node_dim: 128,
            graph_dim: 256,
            layers: 5,
            node_uv_dim: 64,
            node_geo_dim: 32,
            node_product_dim: 32,
            edge_uv_dim: 96,
            edge_geo_dim: 32,
            cnn_channels: (16, 32),
            mlp_hidden: 32,
            layer_hidden: 128,
            gate: GateMode::Sigmoid,
            readout_include_input: false,
            grid: GridDims::default(),
            product_dim: 0,
        }
    }
}

impl EncoderConfig {
    /// A small configuration for tests and smoke runs.
    pub fn tiny(product_dim: usize) -> Self {
        EncoderConfig {
            node_dim: 16,
            graph_dim: 12,
            layers: 2,
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
            grid: GridDims { gu: 4, gv: 4, gt: 4 },
            product_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.node_dim,
            self.graph_dim,
            self.layers,
            self.node_uv_dim,
            self.node_geo_dim,
            self.node_product_dim,
            self.edge_uv_dim,
            self.edge_geo_dim,
            self.cnn_channels.0,
            self.cnn_channels.1,
            self.mlp_hidden,
            self.layer_hidden,
        ];
        if positive.iter().any(|&x| x == 0) {
            return Err(Error::Config(
                "encoder dimensions must be positive".into(),
            ));
        }
        if self.node_uv_dim + self.node_geo_dim + self.node_product_dim != self.node_dim {
            return Err(Error::Config(format!(
                "node sub-widths {} + {} + {} must sum to node_dim {}",
                self.node_uv_dim, self.node_geo_dim, self.node_product_dim, self.node_dim
            )));
        }
        if self.edge_uv_dim + self.edge_geo_dim != self.node_dim {
            return Err(Error::Config(format!(
                "edge sub-widths {} + {} must sum to node_dim {} (the gated product needs equal node and edge dims)",
                self.edge_uv_dim, self.edge_geo_dim, self.node_dim
            )));
        }
        self.grid.validate()
    }

    fn readout_terms(&self) -> usize {
        self.layers + usize::from(self.readout_include_input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<R: Real> {
    pub w1: Tensor<R>,
    pub b1: Tensor<R>,
    pub w2: Tensor<R>,
    pub b2: Tensor<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack2d<R: Real> {
    pub conv1_w: Tensor<R>,
    pub conv1_b: Tensor<R>,
    pub conv2_w: Tensor<R>,
    pub conv2_b: Tensor<R>,
    pub dense_w: Tensor<R>,
    pub dense_b: Tensor<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack1d<R: Real> {
    pub conv1_w: Tensor<R>,
    pub conv1_b: Tensor<R>,
    pub conv2_w: Tensor<R>,
    pub conv2_b: Tensor<R>,
    pub dense_w: Tensor<R>,
    pub dense_b: Tensor<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<R: Real> {
    /// f: node update MLP.
    pub node: MlpParams<R>,
    /// g2: endpoint-sum transform.
    pub edge_inner: MlpParams<R>,
    /// g1: edge output transform.
    pub edge_outer: MlpParams<R>,
    /// Optional gate projection (GateMode::ProjectedSigmoid).
    pub gate_proj: Option<Tensor<R>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams<R: Real> {
    pub w: Tensor<R>,
    pub b: Tensor<R>,
}

/// All learned weights. The CNNs and the product MLP are shared across all
/// faces/curves; the geo MLPs are banks indexed by surface/curve type.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<R: Real> {
    pub config: EncoderConfig,
    pub face_cnn: ConvStack2d<R>,
    pub curve_cnn: ConvStack1d<R>,
    pub face_geo: Vec<MlpParams<R>>,
    pub curve_geo: Vec<MlpParams<R>>,
    pub product: MlpParams<R>,
    pub layers: Vec<LayerParams<R>>,
    pub readout: Vec<ReadoutParams<R>>,
}

fn init_tensor<R: Real>(rng: &mut Stream, shape: &[usize], fan_in: usize) -> Tensor<R> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data: Vec<R> = (0..len).map(|_| R::from_f64(rng.normal() * std)).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

fn init_mlp<R: Real>(rng: &mut Stream, input: usize, hidden: usize, output: usize) -> MlpParams<R> {
    MlpParams {
        w1: init_tensor(rng, &[input, hidden], input),
        b1: Tensor::zeros(&[hidden]),
        w2: init_tensor(rng, &[hidden, output], hidden),
        b2: Tensor::zeros(&[output]),
    }
}

impl<R: Real> EncoderParams<R> {
    /// Deterministic initialization from a seed.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Stream::derive(seed, &["encoder-init"]);
        let (c1, c2) = config.cnn_channels;
        let face_cnn = ConvStack2d {
            conv1_w: init_tensor(&mut rng, &[c1, 7, 3, 3], 7 * 9),
            conv1_b: Tensor::zeros(&[c1]),
            conv2_w: init_tensor(&mut rng, &[c2, c1, 3, 3], c1 * 9),
            conv2_b: Tensor::zeros(&[c2]),
            dense_w: init_tensor(&mut rng, &[c2, config.node_uv_dim], c2),
            dense_b: Tensor::zeros(&[config.node_uv_dim]),
        };
        let curve_cnn = ConvStack1d {
            conv1_w: init_tensor(&mut rng, &[c1, 6, 3], 6 * 3),
            conv1_b: Tensor::zeros(&[c1]),
            conv2_w: init_tensor(&mut rng, &[c2, c1, 3], c1 * 3),
            conv2_b: Tensor::zeros(&[c2]),
            dense_w: init_tensor(&mut rng, &[c2, config.edge_uv_dim], c2),
            dense_b: Tensor::zeros(&[config.edge_uv_dim]),
        };
        let face_geo = (0..NUM_SURFACE_TYPES)
            .map(|_| init_mlp(&mut rng, 1, config.mlp_hidden, config.node_geo_dim))
            .collect();
        let curve_geo = (0..NUM_CURVE_TYPES)
            .map(|_| init_mlp(&mut rng, 1, config.mlp_hidden, config.edge_geo_dim))
            .collect();
        let product = init_mlp(
            &mut rng,
            config.product_dim,
            config.mlp_hidden,
            config.node_product_dim,
        );
        let d = config.node_dim;
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                node: init_mlp(&mut rng, d, config.layer_hidden, d),
                edge_inner: init_mlp(&mut rng, d, config.layer_hidden, d),
                edge_outer: init_mlp(&mut rng, d, config.layer_hidden, d),
                gate_proj: match config.gate {
                    GateMode::Sigmoid => None,
                    GateMode::ProjectedSigmoid => Some(init_tensor(&mut rng, &[d, d], d)),
                },
            })
            .collect();
        // readout biases start slightly off zero so a fully-masked view (all
        // raw features zeroed) still embeds with a nonzero norm
        let readout = (0..config.readout_terms())
            .map(|_| ReadoutParams {
                w: init_tensor(&mut rng, &[d, config.graph_dim], d),
                b: init_tensor(&mut rng, &[config.graph_dim], config.graph_dim * 8),
            })
            .collect();
        Ok(EncoderParams {
            config: config.clone(),
            face_cnn,
            curve_cnn,
            face_geo,
            curve_geo,
            product,
            layers,
            readout,
        })
    }

    /// Named tensors in a stable order (checkpointing, Adam, grad checks).
    pub fn named(&self) -> Vec<(String, Tensor<R>)> {
        let mut out = Vec::new();
        let mlp = |out: &mut Vec<(String, Tensor<R>)>, prefix: &str, m: &MlpParams<R>| {
            out.push((format!("{prefix}.w1"), m.w1.clone()));
            out.push((format!("{prefix}.b1"), m.b1.clone()));
            out.push((format!("{prefix}.w2"), m.w2.clone()));
            out.push((format!("{prefix}.b2"), m.b2.clone()));
        };
        out.push(("face_cnn.conv1.w".into(), self.face_cnn.conv1_w.clone()));
        out.push(("face_cnn.conv1.b".into(), self.face_cnn.conv1_b.clone()));
        out.push(("face_cnn.conv2.w".into(), self.face_cnn.conv2_w.clone()));
        out.push(("face_cnn.conv2.b".into(), self.face_cnn.conv2_b.clone()));
        out.push(("face_cnn.dense.w".into(), self.face_cnn.dense_w.clone()));
        out.push(("face_cnn.dense.b".into(), self.face_cnn.dense_b.clone()));
        out.push(("curve_cnn.conv1.w".into(), self.curve_cnn.conv1_w.clone()));
        out.push(("curve_cnn.conv1.b".into(), self.curve_cnn.conv1_b.clone()));
        out.push(("curve_cnn.conv2.w".into(), self.curve_cnn.conv2_w.clone()));
        out.push(("curve_cnn.conv2.b".into(), self.curve_cnn.conv2_b.clone()));
        out.push(("curve_cnn.dense.w".into(), self.curve_cnn.dense_w.clone()));
        out.push(("curve_cnn.dense.b".into(), self.curve_cnn.dense_b.clone()));
        for (i, m) in self.face_geo.iter().enumerate() {
            mlp(&mut out, &format!("face_geo.{i}"), m);
        }
        for (i, m) in self.curve_geo.iter().enumerate() {
            mlp(&mut out, &format!("curve_geo.{i}"), m);
        }
        mlp(&mut out, "product", &self.product);
        for (i, layer) in self.layers.iter().enumerate() {
            mlp(&mut out, &format!("layer.{i}.node"), &layer.node);
            mlp(&mut out, &format!("layer.{i}.edge_inner"), &layer.edge_inner);
            mlp(&mut out, &format!("layer.{i}.edge_outer"), &layer.edge_outer);
            if let Some(p) = &layer.gate_proj {
                out.push((format!("layer.{i}.gate_proj"), p.clone()));
            }
        }
        for (i, r) in self.readout.iter().enumerate() {
            out.push((format!("readout.{i}.w"), r.w.clone()));
            out.push((format!("readout.{i}.b"), r.b.clone()));
        }
        out
    }

    /// Rebuild parameters from named tensors (checkpoint loading). Order and
    /// names must match [`EncoderParams::named`].
    pub fn from_named(config: &EncoderConfig, named: &[(String, Tensor<R>)]) -> Result<Self> {
        config.validate()?;
        let template = EncoderParams::<R>::init(config, 0)?;
        let expected = template.named();
        if expected.len() != named.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors, config expects {}",
                named.len(),
                expected.len()
            )));
        }
        let mut map = std::collections::BTreeMap::new();
        for ((exp_name, exp_tensor), (name, tensor)) in expected.iter().zip(named.iter()) {
            if exp_name != name {
                return Err(Error::Config(format!(
                    "checkpoint tensor {name} where {exp_name} was expected"
                )));
            }
            if exp_tensor.shape() != tensor.shape() {
                return Err(Error::Config(format!(
                    "checkpoint tensor {name} has shape {:?}, config expects {:?}",
                    tensor.shape(),
                    exp_tensor.shape()
                )));
            }
            map.insert(name.clone(), tensor.clone());
        }
        let mut params = template;
        params.apply_named(&map);
        Ok(params)
    }

    fn apply_named(&mut self, map: &std::collections::BTreeMap<String, Tensor<R>>) {
        let get = |name: String| map.get(&name).expect("validated above").clone();
        let set_mlp = |prefix: &str, m: &mut MlpParams<R>| {
            m.w1 = map[&format!("{prefix}.w1")].clone();
            m.b1 = map[&format!("{prefix}.b1")].clone();
            m.w2 = map[&format!("{prefix}.w2")].clone();
            m.b2 = map[&format!("{prefix}.b2")].clone();
        };
        self.face_cnn.conv1_w = get("face_cnn.conv1.w".into());
        self.face_cnn.conv1_b = get("face_cnn.conv1.b".into());
        self.face_cnn.conv2_w = get("face_cnn.conv2.w".into());
        self.face_cnn.conv2_b = get("face_cnn.conv2.b".into());
        self.face_cnn.dense_w = get("face_cnn.dense.w".into());
        self.face_cnn.dense_b = get("face_cnn.dense.b".into());
        self.curve_cnn.conv1_w = get("curve_cnn.conv1.w".into());
        self.curve_cnn.conv1_b = get("curve_cnn.conv1.b".into());
        self.curve_cnn.conv2_w = get("curve_cnn.conv2.w".into());
        self.curve_cnn.conv2_b = get("curve_cnn.conv2.b".into());
        self.curve_cnn.dense_w = get("curve_cnn.dense.w".into());
        self.curve_cnn.dense_b = get("curve_cnn.dense.b".into());
        for (i, m) in self.face_geo.iter_mut().enumerate() {
            set_mlp(&format!("face_geo.{i}"), m);
        }
        for (i, m) in self.curve_geo.iter_mut().enumerate() {
            set_mlp(&format!("curve_geo.{i}"), m);
        }
        set_mlp("product", &mut self.product);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            set_mlp(&format!("layer.{i}.node"), &mut layer.node);
            set_mlp(&format!("layer.{i}.edge_inner"), &mut layer.edge_inner);
            set_mlp(&format!("layer.{i}.edge_outer"), &mut layer.edge_outer);
            if layer.gate_proj.is_some() {
                layer.gate_proj = Some(get(format!("layer.{i}.gate_proj")));
            }
        }
        for (i, r) in self.readout.iter_mut().enumerate() {
            r.w = get(format!("readout.{i}.w"));
            r.b = get(format!("readout.{i}.b"));
        }
    }

    /// Replace parameters from a plain tensor list in `named()` order.
    pub fn set_from_list(&mut self, tensors: &[Tensor<R>]) {
        let names: Vec<String> = self.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), tensors.len());
        let map: std::collections::BTreeMap<String, Tensor<R>> = names
            .into_iter()
            .zip(tensors.iter().cloned())
            .collect();
        self.apply_named(&map);
    }

    pub fn cast<T: Real>(&self) -> EncoderParams<T> {
        let named: Vec<(String, Tensor<T>)> = self
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.cast::<T>()))
            .collect();
        EncoderParams::from_named(&self.config, &named).expect("same config")
    }
}
