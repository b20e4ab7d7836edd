//! cadgraph converts boundary-representation CAD parts into attributed graphs,
//! learns shape embeddings with a self-supervised contrastive graph encoder,
//! and serves exact cosine-similarity retrieval with ranking metrics.
//!
//! The pipeline, end to end:
//!
//! 1. [`brep`] — the BRep data model, parametric surface/curve evaluation,
//!    a synthetic part generator, and face-adjacency graph conversion.
//! 2. [`features`] — UV-grid sampling on faces and curves plus geometric and
//!    product attributes, cached in a compact binary format.
//! 3. [`nn`] — a small dense-tensor engine with reverse-mode differentiation
//!    and an Adam optimizer.
//! 4. [`encoder`] — CNN/MLP input embedding, gated message passing, and a
//!    multi-layer readout producing one embedding vector per part.
//! 5. [`augment`] — stochastic feature masking and structural deletion used
//!    to build two training views per graph.
//! 6. [`train`] — the contrastive training loop (NT-Xent), checkpointing,
//!    early stopping, and dataset embedding.
//! 7. [`retrieval`] — an exact embedding index, kNN queries, Recall@K /
//!    NDCG@K, and assembly retrieval by part votes.
//!
//! Everything is deterministic given a seed: parallel execution (the
//! `parallel` feature, on by default) never changes any produced bytes.

pub mod augment;
pub mod brep;
pub mod encoder;
pub mod error;
pub mod features;
pub mod nn;
pub mod par;
pub mod retrieval;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
