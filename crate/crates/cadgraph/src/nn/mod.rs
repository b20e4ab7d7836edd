//! Dense-tensor engine with reverse-mode differentiation.
//!
//! [`Tensor`] is a contiguous row-major array generic over [`Real`]
//! (`f32` for training by default, `f64` for gradient checks). All
//! operations run through a [`Tape`], which records enough to replay the
//! backward pass; an op participates in differentiation whenever any of its
//! inputs requires gradients. No operation ever mutates its inputs.
//!
//! Reductions run in a fixed documented order (ascending index), except the
//! two graph reductions ([`Tape::gated_neighbor_sum`], [`Tape::row_sum_exact`])
//! which use an order-independent correctly-rounded accumulator, see [`acc`].

pub mod acc;
pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use scalar::Real;
pub use tape::{Gradients, Op, Tape, ValueId};
pub use tensor::Tensor;
