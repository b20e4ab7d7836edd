//! Finite-difference verification of every differentiable op.

use cadgraph::nn::gradcheck::{check, random_tensor, standard_op_suite};
use cadgraph::nn::{Tape, Tensor};
use cadgraph::rng::Stream;

const TOL: f64 = 1e-4;

#[test]
fn every_op_matches_central_differences() {
    let cases = standard_op_suite(10).expect("suite runs");
    assert!(cases.len() >= 20, "expected full op coverage");
    for case in &cases {
        assert!(
            case.max_rel_err <= TOL,
            "{}: rel err {} over {} coords",
            case.name,
            case.max_rel_err,
            case.coords
        );
        assert!(case.coords > 0, "{} checked nothing", case.name);
    }
}

#[test]
fn three_layer_mlp_gradients_match_finite_differences() {
    // random 3-layer MLP: every parameter and the input checked
    let mut rng = Stream::derive(4242, &["mlp-check"]);
    for _ in 0..3 {
        let x = random_tensor(&mut rng, &[2, 6]);
        let w1 = random_tensor(&mut rng, &[6, 5]);
        let b1 = random_tensor(&mut rng, &[5]);
        let w2 = random_tensor(&mut rng, &[5, 4]);
        let b2 = random_tensor(&mut rng, &[4]);
        let w3 = random_tensor(&mut rng, &[4, 3]);
        let b3 = random_tensor(&mut rng, &[3]);
        let inputs = vec![x, w1, b1, w2, b2, w3, b3];
        let report = check(
            |tape, ids| {
                let h1 = tape.matmul(ids[0], ids[1])?;
                let h1 = tape.bias_add(h1, ids[2])?;
                let h1 = tape.relu(h1);
                let h2 = tape.matmul(h1, ids[3])?;
                let h2 = tape.bias_add(h2, ids[4])?;
                let h2 = tape.relu(h2);
                let h3 = tape.matmul(h2, ids[5])?;
                let h3 = tape.bias_add(h3, ids[6])?;
                let s = tape.sigmoid(h3);
                Ok(tape.sum_all(s))
            },
            &inputs,
            None,
        )
        .unwrap();
        assert!(
            report.max_rel_err <= TOL,
            "mlp rel err {}",
            report.max_rel_err
        );
    }
}

#[test]
fn sigmoid_gate_times_neighbor_composition() {
    // the exact composition used by the message-passing layer
    let mut rng = Stream::derive(99, &["gate-compose"]);
    let h = random_tensor(&mut rng, &[3, 4]);
    let e = random_tensor(&mut rng, &[2, 4]);
    let report = check(
        |tape, ids| {
            let gate = tape.sigmoid(ids[1]);
            let incoming = std::sync::Arc::new(cadgraph::nn::tape::Incoming {
                lists: vec![vec![(1, 0)], vec![(0, 0), (2, 1)], vec![(1, 1)]],
            });
            let agg = tape.gated_neighbor_sum(ids[0], gate, incoming)?;
            let out = tape.add(ids[0], agg)?;
            let sq = tape.mul(out, out)?;
            Ok(tape.sum_all(sq))
        },
        &[h, e],
        None,
    )
    .unwrap();
    assert!(report.max_rel_err <= TOL, "rel err {}", report.max_rel_err);
}

#[test]
fn probe_subset_matches_full_check() {
    let mut rng = Stream::derive(7, &["probe"]);
    let x = random_tensor(&mut rng, &[3, 3]);
    let full = check(
        |tape, ids| {
            let s = tape.sigmoid(ids[0]);
            Ok(tape.sum_all(s))
        },
        &[x.clone()],
        None,
    )
    .unwrap();
    let probed = check(
        |tape, ids| {
            let s = tape.sigmoid(ids[0]);
            Ok(tape.sum_all(s))
        },
        &[x],
        Some(&[vec![0, 4, 8]]),
    )
    .unwrap();
    assert_eq!(probed.coords_checked, 3);
    assert!(full.coords_checked == 9);
    assert!(probed.max_rel_err <= full.max_rel_err + 1e-12);
}

#[test]
fn constant_inputs_receive_no_gradient() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap(), true);
    let c = tape.constant(Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap());
    let y = tape.mul(x, c).unwrap();
    let loss = tape.sum_all(y);
    let grads = tape.backward(loss).unwrap();
    assert!(grads.get(c).is_none());
    assert_eq!(grads.get(x).unwrap().data(), &[3.0, 4.0]);
}
