//! NT-Xent contrastive loss.
//!
//! For row n of the two view matrices `Z'`, `Z''` (one row per graph in the
//! batch):
//!
//! ```text
//! l_n = -log( exp(sim(z'_n, z''_n)/τ) / Σ_{n' != n} exp(sim(z'_n, z''_{n'})/τ) )
//! ```
//!
//! with `sim` the cosine similarity. The denominator excludes the positive
//! term, so l_n can be negative; `include_positive` switches to the
//! inclusive variant. With `symmetric` (the default) the loss is averaged
//! with the roles of the two views swapped. The batch loss is the mean over
//! rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Real, Tape, Tensor, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtXentOptions {
    pub temperature: f64,
    /// Average with the views swapped (stabilizes training).
    pub symmetric: bool,
    /// Count the positive term in the denominator (off = printed formula).
    pub include_positive: bool,
}

impl Default for NtXentOptions {
    fn default() -> Self {
        NtXentOptions {
            temperature: 1.0,
            symmetric: true,
            include_positive: false,
        }
    }
}

/// Record the loss on a tape. `z1`, `z2`: `[N, D]` with N >= 2.
pub fn nt_xent_on_tape<R: Real>(
    tape: &mut Tape<R>,
    z1: ValueId,
    z2: ValueId,
    opts: &NtXentOptions,
) -> Result<ValueId> {
    let (s1, s2) = (
        tape.value(z1).shape().to_vec(),
        tape.value(z2).shape().to_vec(),
    );
    if s1.len() != 2 || s1 != s2 {
        return Err(Error::Shape {
            op: "nt_xent",
            lhs: s1,
            rhs: s2,
        });
    }
    let n = s1[0];
    if n < 2 {
        return Err(Error::Contract(format!(
            "nt_xent needs a batch of >= 2 graphs for negatives, got {n}"
        )));
    }
    if !(opts.temperature > 0.0) {
        return Err(Error::Contract(format!(
            "temperature must be positive, got {}",
            opts.temperature
        )));
    }
    let direction = |tape: &mut Tape<R>, a: ValueId, b: ValueId| -> Result<ValueId> {
        let sims = tape.cosine_pairs(a, b)?;
        let scaled = tape.scalar_mul(sims, 1.0 / opts.temperature);
        let exps = tape.exp(scaled);
        let denom_mask = if opts.include_positive {
            Tensor::full(&[n, n], R::ONE)
        } else {
            off_diagonal(n)
        };
        let mask = tape.constant(denom_mask);
        let masked = tape.mul(exps, mask)?;
        let denom = tape.sum_axis(masked, 1)?;
        let log_denom = tape.log(denom)?;
        let diag = tape.constant(diagonal(n));
        let pos = tape.mul(scaled, diag)?;
        let pos_row = tape.sum_axis(pos, 1)?;
        let losses = tape.sub(log_denom, pos_row)?;
        Ok(tape.mean_all(losses))
    };
    let forward = direction(tape, z1, z2)?;
    if !opts.symmetric {
        return Ok(forward);
    }
    let backward = direction(tape, z2, z1)?;
    let sum = tape.add(forward, backward)?;
    Ok(tape.scalar_mul(sum, 0.5))
}

/// Evaluate the loss on plain tensors (no gradients).
pub fn nt_xent_loss<R: Real>(z1: &Tensor<R>, z2: &Tensor<R>, opts: &NtXentOptions) -> Result<R> {
    let mut tape = Tape::new();
    let a = tape.constant(z1.clone());
    let b = tape.constant(z2.clone());
    let loss = nt_xent_on_tape(&mut tape, a, b, opts)?;
    Ok(tape.value(loss).item())
}

fn diagonal<R: Real>(n: usize) -> Tensor<R> {
    let mut data = vec![R::ZERO; n * n];
    for i in 0..n {
        data[i * n + i] = R::ONE;
    }
    Tensor::from_vec(&[n, n], data).expect("square")
}

fn off_diagonal<R: Real>(n: usize) -> Tensor<R> {
    let mut data = vec![R::ONE; n * n];
    for i in 0..n {
        data[i * n + i] = R::ZERO;
    }
    Tensor::from_vec(&[n, n], data).expect("square")
}
