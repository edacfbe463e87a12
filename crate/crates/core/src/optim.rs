//! Adam-style adaptive gradient updates over lists of parameter tensors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub struct Adam<S> {
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    step: usize,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(learning_rate: S, params: &[Tensor<S>]) -> Self {
        Adam {
            learning_rate,
            beta1: S::c(0.9),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
            step: 0,
            m: params.iter().map(|p| vec![S::zero(); p.len()]).collect(),
            v: params.iter().map(|p| vec![S::zero(); p.len()]).collect(),
        }
    }

    /// One descent step; to ascend, negate the gradients first.
    pub fn step(&mut self, params: &mut [Tensor<S>], grads: &[Tensor<S>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::InvalidArgument {
                arg: "params",
                detail: format!(
                    "expected {} parameter/gradient tensors, got {}/{}",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        self.step += 1;
        let t = S::from_usize(self.step).expect("step fits scalar");
        let bias1 = S::one() - self.beta1.powf(t);
        let bias2 = S::one() - self.beta2.powf(t);
        for (i, param) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let mut data = param.data().to_vec();
            for (j, x) in data.iter_mut().enumerate() {
                let m = self.beta1 * self.m[i][j] + (S::one() - self.beta1) * g[j];
                let v = self.beta2 * self.v[i][j] + (S::one() - self.beta2) * g[j] * g[j];
                self.m[i][j] = m;
                self.v[i][j] = v;
                let mhat = m / bias1;
                let vhat = v / bias2;
                *x = *x - self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
            *param = Tensor::from_vec(param.shape().to_vec(), data)?;
        }
        Ok(())
    }
}
