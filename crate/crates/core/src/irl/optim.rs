//! First-order parameter updates.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    step: i32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let moments = matches!(kind, OptimizerKind::Adam { .. });
        Optimizer {
            kind,
            lr: T::of(lr),
            step: 0,
            m: if moments { vec![T::zero(); n_params] } else { Vec::new() },
            v: if moments { vec![T::zero(); n_params] } else { Vec::new() },
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn apply(&mut self, params: &mut [T], grad: &[T]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
                let one = T::one();
                let c1 = one - b1.powi(self.step);
                let c2 = one - b2.powi(self.step);
                let step = self.lr * c2.sqrt() / c1;
                let eps_hat = eps * c2.sqrt();
                for k in 0..params.len() {
                    let g = grad[k];
                    self.m[k] = b1 * self.m[k] + (one - b1) * g;
                    self.v[k] = b2 * self.v[k] + (one - b2) * g * g;
                    params[k] -= step * self.m[k] / (self.v[k].sqrt() + eps_hat);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::default(), 1e-3, 2);
        let mut p = vec![1.0, -1.0];
        opt.apply(&mut p, &[4.0, -0.5]);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::default(), 0.05, 1);
        let mut p = vec![3.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0)];
            opt.apply(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::<f64>::new(OptimizerKind::Sgd, 0.1, 1);
        let mut p = vec![1.0];
        opt.apply(&mut p, &[2.0]);
        assert!((p[0] - 0.8).abs() < 1e-15);
    }
}
