//! Adam optimizer with bias correction.

use super::scalar::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Optimizer state: one first/second moment tensor per parameter, in the
/// same order as the parameter list it was created for.
#[derive(Clone)]
pub struct AdamState<R: Real> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Tensor<R>>,
    second: Vec<Tensor<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new(param_shapes: &[Vec<usize>], learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One update over all parameters. `params[i]`, `grads[i]` and the stored
    /// moments must share shapes.
    pub fn step(&mut self, params: &mut [Tensor<R>], grads: &[Tensor<R>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "adam: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        self.step += 1;
        let b1 = R::from_f64(self.beta1);
        let b2 = R::from_f64(self.beta2);
        let one_m_b1 = R::from_f64(1.0 - self.beta1);
        let one_m_b2 = R::from_f64(1.0 - self.beta2);
        let corr1 = R::from_f64(1.0 / (1.0 - self.beta1.powi(self.step as i32)));
        let corr2 = R::from_f64(1.0 / (1.0 - self.beta2.powi(self.step as i32)));
        let lr = R::from_f64(self.learning_rate);
        let eps = R::from_f64(self.epsilon);

        for (i, (param, grad)) in params.iter_mut().zip(grads.iter()).enumerate() {
            if param.shape() != grad.shape() || param.shape() != self.first[i].shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: param.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            let mut m = Vec::with_capacity(param.len());
            let mut v = Vec::with_capacity(param.len());
            let mut next = Vec::with_capacity(param.len());
            let (md, vd) = (self.first[i].data(), self.second[i].data());
            for (j, (&p, &g)) in param.data().iter().zip(grad.data().iter()).enumerate() {
                let mj = b1 * md[j] + one_m_b1 * g;
                let vj = b2 * vd[j] + one_m_b2 * g * g;
                let m_hat = mj * corr1;
                let v_hat = vj * corr2;
                next.push(p - lr * m_hat / (v_hat.sqrt() + eps));
                m.push(mj);
                v.push(vj);
            }
            self.first[i] = Tensor::from_vec(param.shape(), m)?;
            self.second[i] = Tensor::from_vec(param.shape(), v)?;
            *param = Tensor::from_vec(param.shape(), next)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_evaluation() {
        // After one step: m̂ = g, v̂ = g², so Δ = -lr·g/(|g| + ε).
        let g = vec![0.5f64, -2.0, 3.0];
        let mut params = vec![Tensor::from_vec(&[3], vec![1.0f64, 1.0, 1.0]).unwrap()];
        let grads = vec![Tensor::from_vec(&[3], g.clone()).unwrap()];
        let mut adam = AdamState::new(&[vec![3]], 0.01);
        adam.step(&mut params, &grads).unwrap();
        for (j, &gj) in g.iter().enumerate() {
            let expected = 1.0 - 0.01 * gj / (gj.abs() + 1e-8);
            let got = params[0].data()[j];
            assert!(
                (got - expected).abs() < 1e-12,
                "param {j}: {got} vs {expected}"
            );
        }
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::from_vec(&[2], vec![0.7f64, -0.3]).unwrap()];
        let before = params[0].clone();
        let grads = vec![Tensor::zeros(&[2])];
        let mut adam = AdamState::new(&[vec![2]], 0.05);
        adam.step(&mut params, &grads).unwrap();
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params[0], before);
        assert_eq!(adam.step, 2);
    }

    #[test]
    fn identical_runs_produce_identical_trajectories() {
        let run = || {
            let mut params = vec![Tensor::from_vec(&[2], vec![0.4f32, -1.2]).unwrap()];
            let mut adam = AdamState::new(&[vec![2]], 0.01);
            for k in 0..10 {
                let g = Tensor::from_vec(&[2], vec![0.1 * k as f32, -0.05]).unwrap();
                adam.step(&mut params, &[g]).unwrap();
            }
            params[0].data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![Tensor::<f64>::zeros(&[2])];
        let grads = vec![Tensor::<f64>::zeros(&[3])];
        let mut adam = AdamState::new(&[vec![2]], 0.01);
        assert!(adam.step(&mut params, &grads).is_err());
    }
}
