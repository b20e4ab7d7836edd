//! Finite-difference gradient verification.
//!
//! Compares reverse-mode gradients against central differences
//! (h = 1e-5, f64). Used by the op-level tests and the encoder acceptance
//! suite; lives in the library so integration tests can share it.

use super::scalar::Real;
use super::tape::{Tape, ValueId};
use super::tensor::Tensor;
use crate::error::Result;

pub const STEP: f64 = 1e-5;

/// Outcome of one check: worst relative error over the probed coordinates.
#[derive(Debug)]
pub struct Report {
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

/// Relative error with a small absolute floor so near-zero pairs compare
/// sanely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Check `f`'s gradients w.r.t. each listed input tensor.
///
/// `f` must rebuild the same computation from scratch on the given tape and
/// return a scalar output. `probe`: indices of coordinates to test per input
/// (`None` = all coordinates).
pub fn check<F>(f: F, inputs: &[Tensor<f64>], probe: Option<&[Vec<usize>]>) -> Result<Report>
where
    F: Fn(&mut Tape<f64>, &[ValueId]) -> Result<ValueId>,
{
    let run = |tensors: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<ValueId> = tensors.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let out = f(&mut tape, &ids)?;
        Ok(tape.value(out).item())
    };

    // Analytic gradients once.
    let mut tape = Tape::new();
    let ids: Vec<ValueId> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &ids)?;
    let grads = tape.backward(out)?;

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    for (which, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(ids[which])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.shape()));
        let coords: Vec<usize> = match probe {
            Some(p) => p[which].clone(),
            None => (0..input.len()).collect(),
        };
        for &c in &coords {
            let base = input.data()[c];
            let bump = |delta: f64| -> Result<f64> {
                let mut data = input.data().to_vec();
                data[c] = base + delta;
                let mut perturbed: Vec<Tensor<f64>> = inputs.to_vec();
                perturbed[which] = Tensor::from_vec(input.shape(), data)?;
                run(&perturbed)
            };
            let plus = bump(STEP)?;
            let minus = bump(-STEP)?;
            let numeric = (plus - minus) / (2.0 * STEP);
            max_rel = max_rel.max(rel_err(analytic.data()[c].to_f64(), numeric));
            checked += 1;
        }
    }
    Ok(Report {
        max_rel_err: max_rel,
        coords_checked: checked,
    })
}

/// Random-tensor helper for op-level checks: values in ±[0.2, 1.2] keep
/// relu/log inputs away from their kinks and singularities.
pub fn random_tensor(rng: &mut crate::rng::Stream, shape: &[usize]) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len)
        .map(|_| {
            let sign = if rng.chance(0.5) { 1.0 } else { -1.0 };
            sign * rng.uniform_in(0.2, 1.2)
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape/len agree")
}

/// Positive variant for log and norm inputs.
pub fn random_positive_tensor(rng: &mut crate::rng::Stream, shape: &[usize]) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.uniform_in(0.3, 1.8)).collect();
    Tensor::from_vec(shape, data).expect("shape/len agree")
}

/// Reduce any op output to a scalar through fixed pseudo-random weights, so
/// every output coordinate receives a distinct gradient.
fn scalarize(tape: &mut Tape<f64>, y: ValueId, salt: u64) -> Result<ValueId> {
    let shape = tape.value(y).shape().to_vec();
    if shape.iter().product::<usize>() == 1 && shape.len() <= 1 {
        return Ok(tape.sum_all(y));
    }
    let mut rng = crate::rng::Stream::derive(salt, &["scalarize"]);
    let weights = random_tensor(&mut rng, &shape);
    let c = tape.constant(weights);
    let w = tape.mul(y, c)?;
    Ok(tape.sum_all(w))
}

/// One named finite-difference case: op under test plus its inputs.
pub struct OpCase {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub coords: usize,
}

/// Finite-difference sweep over every differentiable op, `instances` random
/// instances each. Returns one summary per op. Gradient targets cover every
/// input coordinate of every instance.
pub fn standard_op_suite(instances: usize) -> Result<Vec<OpCase>> {
    use std::sync::Arc;

    let mut results: Vec<OpCase> = Vec::new();
    let mut run = |name: &'static str,
                   builder: &dyn Fn(&mut Tape<f64>, &[ValueId]) -> Result<ValueId>,
                   make_inputs: &dyn Fn(&mut crate::rng::Stream) -> Vec<Tensor<f64>>|
     -> Result<()> {
        let mut worst = 0.0f64;
        let mut coords = 0usize;
        for k in 0..instances {
            let mut rng = crate::rng::Stream::derive(1000 + k as u64, &[name]);
            let inputs = make_inputs(&mut rng);
            let report = check(builder, &inputs, None)?;
            worst = worst.max(report.max_rel_err);
            coords += report.coords_checked;
        }
        results.push(OpCase {
            name,
            max_rel_err: worst,
            coords,
        });
        Ok(())
    };

    run(
        "add",
        &|t, ids| {
            let y = t.add(ids[0], ids[1])?;
            scalarize(t, y, 11)
        },
        &|r| vec![random_tensor(r, &[3, 4]), random_tensor(r, &[3, 4])],
    )?;
    run(
        "sub",
        &|t, ids| {
            let y = t.sub(ids[0], ids[1])?;
            scalarize(t, y, 12)
        },
        &|r| vec![random_tensor(r, &[2, 5]), random_tensor(r, &[2, 5])],
    )?;
    run(
        "mul",
        &|t, ids| {
            let y = t.mul(ids[0], ids[1])?;
            scalarize(t, y, 13)
        },
        &|r| vec![random_tensor(r, &[4, 3]), random_tensor(r, &[4, 3])],
    )?;
    run(
        "scalar_mul",
        &|t, ids| {
            let y = t.scalar_mul(ids[0], -1.75);
            scalarize(t, y, 14)
        },
        &|r| vec![random_tensor(r, &[3, 3])],
    )?;
    run(
        "scalar_add",
        &|t, ids| {
            let y = t.scalar_add(ids[0], 0.625);
            scalarize(t, y, 15)
        },
        &|r| vec![random_tensor(r, &[6])],
    )?;
    run(
        "bias_add",
        &|t, ids| {
            let y = t.bias_add(ids[0], ids[1])?;
            scalarize(t, y, 16)
        },
        &|r| vec![random_tensor(r, &[4, 5]), random_tensor(r, &[5])],
    )?;
    run(
        "matmul",
        &|t, ids| {
            let y = t.matmul(ids[0], ids[1])?;
            scalarize(t, y, 17)
        },
        &|r| vec![random_tensor(r, &[3, 4]), random_tensor(r, &[4, 2])],
    )?;
    run(
        "relu",
        &|t, ids| {
            let y = t.relu(ids[0]);
            scalarize(t, y, 18)
        },
        // inputs bounded away from the kink (|x| >= 0.2 >> h)
        &|r| vec![random_tensor(r, &[5, 5])],
    )?;
    run(
        "sigmoid",
        &|t, ids| {
            let y = t.sigmoid(ids[0]);
            scalarize(t, y, 19)
        },
        &|r| vec![random_tensor(r, &[4, 4])],
    )?;
    run(
        "log",
        &|t, ids| {
            let y = t.log(ids[0])?;
            scalarize(t, y, 20)
        },
        &|r| vec![random_positive_tensor(r, &[3, 4])],
    )?;
    run(
        "exp",
        &|t, ids| {
            let y = t.exp(ids[0]);
            scalarize(t, y, 21)
        },
        &|r| vec![random_tensor(r, &[3, 4])],
    )?;
    run(
        "concat_axis0",
        &|t, ids| {
            let y = t.concat(0, ids)?;
            scalarize(t, y, 22)
        },
        &|r| vec![random_tensor(r, &[2, 3]), random_tensor(r, &[4, 3])],
    )?;
    run(
        "concat_axis1",
        &|t, ids| {
            let y = t.concat(1, ids)?;
            scalarize(t, y, 23)
        },
        &|r| vec![random_tensor(r, &[3, 2]), random_tensor(r, &[3, 5])],
    )?;
    run(
        "sum_axis",
        &|t, ids| {
            let y = t.sum_axis(ids[0], 1)?;
            scalarize(t, y, 24)
        },
        &|r| vec![random_tensor(r, &[3, 4, 2])],
    )?;
    run(
        "sum_all",
        &|t, ids| Ok(t.sum_all(ids[0])),
        &|r| vec![random_tensor(r, &[4, 4])],
    )?;
    run(
        "l2_norm",
        &|t, ids| Ok(t.l2_norm(ids[0])),
        &|r| vec![random_positive_tensor(r, &[7])],
    )?;
    run(
        "cosine_pairs_vec",
        &|t, ids| t.cosine_pairs(ids[0], ids[1]),
        &|r| vec![random_tensor(r, &[6]), random_tensor(r, &[6])],
    )?;
    run(
        "cosine_pairs_matrix",
        &|t, ids| {
            let y = t.cosine_pairs(ids[0], ids[1])?;
            scalarize(t, y, 25)
        },
        &|r| vec![random_tensor(r, &[3, 5]), random_tensor(r, &[4, 5])],
    )?;
    run(
        "conv2d",
        &|t, ids| {
            let y = t.conv2d(ids[0], ids[1], ids[2])?;
            scalarize(t, y, 26)
        },
        &|r| {
            vec![
                random_tensor(r, &[2, 2, 5, 4]),
                random_tensor(r, &[3, 2, 3, 3]),
                random_tensor(r, &[3]),
            ]
        },
    )?;
    run(
        "conv1d",
        &|t, ids| {
            let y = t.conv1d(ids[0], ids[1], ids[2])?;
            scalarize(t, y, 27)
        },
        &|r| {
            vec![
                random_tensor(r, &[2, 3, 6]),
                random_tensor(r, &[4, 3, 3]),
                random_tensor(r, &[4]),
            ]
        },
    )?;
    run(
        "adaptive_avg_pool2d",
        &|t, ids| {
            let y = t.adaptive_avg_pool2d(ids[0], (2, 2))?;
            scalarize(t, y, 28)
        },
        &|r| vec![random_tensor(r, &[2, 2, 5, 5])],
    )?;
    run(
        "adaptive_avg_pool1d",
        &|t, ids| {
            let y = t.adaptive_avg_pool1d(ids[0], 3)?;
            scalarize(t, y, 29)
        },
        &|r| vec![random_tensor(r, &[2, 2, 7])],
    )?;
    run(
        "reshape",
        &|t, ids| {
            let y = t.reshape(ids[0], &[6, 2])?;
            let s = t.sigmoid(y);
            scalarize(t, s, 30)
        },
        &|r| vec![random_tensor(r, &[3, 4])],
    )?;
    run(
        "row_gather",
        &|t, ids| {
            let y = t.row_gather(ids[0], Arc::new(vec![2, 0, 2, 1]))?;
            scalarize(t, y, 31)
        },
        &|r| vec![random_tensor(r, &[3, 4])],
    )?;
    run(
        "gated_neighbor_sum",
        &|t, ids| {
            let incoming = Arc::new(super::tape::Incoming {
                lists: vec![vec![(1, 0), (2, 1)], vec![(0, 0)], vec![], vec![(0, 2), (1, 2)]],
            });
            let y = t.gated_neighbor_sum(ids[0], ids[1], incoming)?;
            scalarize(t, y, 32)
        },
        &|r| vec![random_tensor(r, &[4, 3]), random_tensor(r, &[3, 3])],
    )?;
    run(
        "row_sum_exact",
        &|t, ids| {
            let y = t.row_sum_exact(ids[0])?;
            scalarize(t, y, 33)
        },
        &|r| vec![random_tensor(r, &[5, 4])],
    )?;

    Ok(results)
}
