//! Reward models over standardized feature vectors.
//!
//! Parameters live in one flat buffer so optimizers and gradient checks can
//! treat both variants uniformly:
//!
//! - linear: `[w (d), b]`
//! - mlp: `[W1 (h x d, row-major), b1 (h), w2 (h), b2]`

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

impl Architecture {
    pub fn param_count(&self, dim: usize) -> usize {
        match *self {
            Architecture::Linear => dim + 1,
            Architecture::Mlp { hidden } => hidden * dim + 2 * hidden + 1,
        }
    }

    pub fn hidden(&self) -> usize {
        match *self {
            Architecture::Linear => 0,
            Architecture::Mlp { hidden } => hidden,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Mlp { .. } => "mlp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RewardModel<T: Scalar> {
    pub architecture: Architecture,
    pub dim: usize,
    pub params: Vec<T>,
    pub standardizer: Standardizer<T>,
}

/// Hidden pre-activations kept from the forward pass for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T> {
    pub hidden: Vec<T>,
    pub grad_hidden: Vec<T>,
}

impl<T: Scalar> RewardModel<T> {
    pub fn zeros(architecture: Architecture, dim: usize) -> Self {
        RewardModel {
            architecture,
            dim,
            params: vec![T::zero(); architecture.param_count(dim)],
            standardizer: Standardizer::identity(dim),
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(architecture: Architecture, dim: usize, seed_value: u64) -> Self {
        let mut model = Self::zeros(architecture, dim);
        let mut rng = seed::rng(seed::derive_seed(seed_value, "init", 0, 0));
        let mut fill = |slice: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in slice {
                *p = T::of(rng.gen_range(-limit..=limit));
            }
        };
        match architecture {
            Architecture::Linear => fill(&mut model.params[..dim], dim, 1),
            Architecture::Mlp { hidden } => {
                let (w1, rest) = model.params.split_at_mut(hidden * dim);
                fill(w1, dim, hidden);
                fill(&mut rest[hidden..2 * hidden], hidden, 1);
            }
        }
        model
    }

    pub fn with_standardizer(mut self, standardizer: Standardizer<T>) -> Result<Self> {
        if standardizer.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: standardizer.dim(),
            });
        }
        self.standardizer = standardizer;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.params.len() != self.architecture.param_count(self.dim) {
            return Err(Error::Dimension {
                expected: self.architecture.param_count(self.dim),
                actual: self.params.len(),
            });
        }
        if self.standardizer.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: self.standardizer.dim(),
            });
        }
        if let Some(k) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {k}")));
        }
        Ok(())
    }

    /// Reward of one standardized feature vector.
    pub fn reward(&self, phi: &[T]) -> Result<T> {
        if phi.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: phi.len(),
            });
        }
        let m = FeatureMatrix {
            dim: self.dim,
            data: phi.to_vec(),
        };
        Ok(self.forward(&m, &mut ForwardCache::default())[0])
    }

    /// Rewards of every row of a standardized matrix.
    pub fn rewards(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>> {
        if x.dim != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: x.dim,
            });
        }
        Ok(self.forward(x, &mut ForwardCache::default()))
    }

    /// Standardizes a copy of `raw` and scores it.
    pub fn score_raw(&self, raw: &FeatureMatrix<T>) -> Result<Vec<T>> {
        let mut x = raw.clone();
        self.standardizer.apply_matrix(&mut x);
        self.rewards(&x)
    }

    pub(crate) fn forward(&self, x: &FeatureMatrix<T>, cache: &mut ForwardCache<T>) -> Vec<T> {
        let d = self.dim;
        let p = &self.params;
        let rows = x.rows();
        match self.architecture {
            Architecture::Linear => {
                let (w, b) = (&p[..d], p[d]);
                x.iter().map(|row| dot(w, row) + b).collect()
            }
            Architecture::Mlp { hidden: h } => {
                let (w1, rest) = p.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = (&rest[..h], rest[h]);
                // Z (rows x h) = X (rows x d) * W1^T
                cache.hidden.clear();
                cache.hidden.resize(rows * h, T::zero());
                T::gemm(rows, d, h, &x.data, (d, 1), w1, (1, d), T::zero(), &mut cache.hidden, (h, 1));
                let mut out = Vec::with_capacity(rows);
                for z in cache.hidden.chunks_exact_mut(h) {
                    let mut r = b2;
                    for j in 0..h {
                        z[j] += b1[j];
                        if z[j] > T::zero() {
                            r += w2[j] * z[j];
                        }
                    }
                    out.push(r);
                }
                out
            }
        }
    }

    /// Adds `sum_c reward_grads[c] * dR(x_c)/dtheta` into `grad`.
    pub(crate) fn backward(
        &self,
        x: &FeatureMatrix<T>,
        cache: &mut ForwardCache<T>,
        reward_grads: &[T],
        grad: &mut [T],
    ) {
        let d = self.dim;
        match self.architecture {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(d);
                for (row, &g) in x.iter().zip(reward_grads) {
                    if g == T::zero() {
                        continue;
                    }
                    axpy(g, row, gw);
                    gb[0] += g;
                }
            }
            Architecture::Mlp { hidden: h } => {
                let rows = x.rows();
                let w2 = &self.params[h * d + h..h * d + 2 * h];
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(h);
                cache.grad_hidden.clear();
                cache.grad_hidden.resize(rows * h, T::zero());
                for c in 0..rows {
                    let g = reward_grads[c];
                    gb2[0] += g;
                    let z = &cache.hidden[c * h..(c + 1) * h];
                    let dz = &mut cache.grad_hidden[c * h..(c + 1) * h];
                    for j in 0..h {
                        if z[j] > T::zero() {
                            gw2[j] += g * z[j];
                            dz[j] = g * w2[j];
                            gb1[j] += dz[j];
                        }
                    }
                }
                // dW1 (h x d) += dZ^T (h x rows) * X (rows x d)
                T::gemm(h, rows, d, &cache.grad_hidden, (1, h), &x.data, (d, 1), T::one(), gw1, (d, 1));
            }
        }
    }

    /// Indices of parameters subject to L2 (weights, not biases).
    pub fn is_weight(&self, k: usize) -> bool {
        let d = self.dim;
        match self.architecture {
            Architecture::Linear => k < d,
            Architecture::Mlp { hidden: h } => k < h * d || (h * d + h..h * d + 2 * h).contains(&k),
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_rewards_zero() {
        let m = RewardModel::<f64>::zeros(Architecture::Mlp { hidden: 4 }, 3);
        assert_eq!(m.reward(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn dead_relu_returns_output_bias() {
        let mut m = RewardModel::<f64>::zeros(Architecture::Mlp { hidden: 2 }, 3);
        // b1 = (-1, -1), b2 = 0.7
        m.params[6] = -1.0;
        m.params[7] = -1.0;
        m.params[8] = 5.0;
        m.params[9] = 5.0;
        m.params[10] = 0.7;
        assert_eq!(m.reward(&[0.1, 0.2, 0.3]).unwrap(), 0.7);
    }

    #[test]
    fn hand_computed_forward_pass() {
        // W1 = [[1, 0, -1], [0.5, 0.5, 0.5]], b1 = (0, -1), w2 = (2, -3), b2 = 0.25
        let mut m = RewardModel::<f64>::zeros(Architecture::Mlp { hidden: 2 }, 3);
        m.params = vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5, 0.0, -1.0, 2.0, -3.0, 0.25];
        // phi = (3, 1, 1): z = (2, 1.5) -> relu (2, 1.5) -> 4 - 4.5 + 0.25
        assert!((m.reward(&[3.0, 1.0, 1.0]).unwrap() - (-0.25)).abs() < 1e-15);
        // phi = (0, 1, 2): z = (-2, 0.5) -> (0, 0.5) -> -1.5 + 0.25
        assert!((m.reward(&[0.0, 1.0, 2.0]).unwrap() - (-1.25)).abs() < 1e-15);
    }

    #[test]
    fn linear_reward_and_shape_errors() {
        let mut m = RewardModel::<f64>::zeros(Architecture::Linear, 2);
        m.params = vec![2.0, -1.0, 0.5];
        assert_eq!(m.reward(&[1.0, 1.0]).unwrap(), 1.5);
        assert!(m.reward(&[1.0]).is_err());
        m.params[0] = f64::NAN;
        assert!(m.check().is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = RewardModel::<f64>::init(Architecture::Mlp { hidden: 64 }, 48, 7);
        let b = RewardModel::<f64>::init(Architecture::Mlp { hidden: 64 }, 48, 7);
        let c = RewardModel::<f64>::init(Architecture::Mlp { hidden: 64 }, 48, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 112.0).sqrt();
        assert!(a.params[..64 * 48].iter().all(|w| w.abs() <= limit));
        assert!(a.params[64 * 48..64 * 49].iter().all(|&b| b == 0.0));
        assert_eq!(a.params.len(), 64 * 48 + 2 * 64 + 1);
    }
}
