//! Boltzmann policy and the listwise / pointwise objectives.

use serde::{Deserialize, Serialize};

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::irl::model::{ForwardCache, RewardModel};
use crate::scalar::{log_sum_exp, Scalar};

/// One decision: candidate features (standardized) and the expert's choice.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub items: Vec<ItemId>,
    pub features: FeatureMatrix<T>,
    pub expert: ItemId,
}

impl<T: Scalar> Transition<T> {
    pub fn expert_index(&self) -> Result<usize> {
        self.items
            .iter()
            .position(|&i| i == self.expert)
            .ok_or(Error::ExpertMissing(self.expert.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Softmax negative log-likelihood of the expert over its candidate set.
    #[default]
    Listwise,
    /// Binary cross-entropy per candidate (1 for the expert, 0 otherwise).
    Pointwise,
}

/// Softmax with max subtraction.
pub fn policy<T: Scalar>(rewards: &[T]) -> Vec<T> {
    let max = rewards.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p: Vec<T> = rewards.iter().map(|&r| (r - max).exp()).collect();
    let z: T = p.iter().copied().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// `-ln pi(expert)` and `dL/dR = pi - 1[a = expert]`.
pub fn listwise_terms<T: Scalar>(rewards: &[T], expert: usize) -> (T, Vec<T>) {
    let loss = log_sum_exp(rewards) - rewards[expert];
    let mut g = policy(rewards);
    g[expert] -= T::one();
    (loss, g)
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Mean binary cross-entropy over the candidates and its reward gradient.
pub fn pointwise_terms<T: Scalar>(logits: &[T], expert: usize) -> (T, Vec<T>) {
    let n = T::of_usize(logits.len());
    let mut loss = T::zero();
    let mut g = Vec::with_capacity(logits.len());
    for (c, &r) in logits.iter().enumerate() {
        let y = if c == expert { T::one() } else { T::zero() };
        loss += softplus(r) - y * r;
        g.push((sigmoid(r) - y) / n);
    }
    (loss / n, g)
}

fn terms<T: Scalar>(objective: Objective, rewards: &[T], expert: usize) -> (T, Vec<T>) {
    match objective {
        Objective::Listwise => listwise_terms(rewards, expert),
        Objective::Pointwise => pointwise_terms(rewards, expert),
    }
}

/// Mean objective over `batch` plus `l2 / 2 * |weights|^2`.
pub fn objective_loss<T: Scalar>(
    model: &RewardModel<T>,
    batch: &[Transition<T>],
    objective: Objective,
    l2: T,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("transition batch"));
    }
    let mut total = T::zero();
    for t in batch {
        let expert = t.expert_index()?;
        let r = model.rewards(&t.features)?;
        total += terms(objective, &r, expert).0;
    }
    Ok(total / T::of_usize(batch.len()) + penalty(model, l2))
}

/// Mean objective and its gradient with respect to the flat parameters.
pub fn objective_gradient<T: Scalar>(
    model: &RewardModel<T>,
    batch: &[Transition<T>],
    objective: Objective,
    l2: T,
) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); model.params.len()];
    let loss = accumulate(model, batch, objective, &mut grad, &mut ForwardCache::default())?;
    let n = T::of_usize(batch.len());
    for g in &mut grad {
        *g /= n;
    }
    add_penalty_gradient(model, l2, &mut grad);
    Ok((loss / n + penalty(model, l2), grad))
}

/// Adds the summed (not averaged) data gradient into `grad`; returns the summed loss.
pub(crate) fn accumulate<T: Scalar>(
    model: &RewardModel<T>,
    batch: &[Transition<T>],
    objective: Objective,
    grad: &mut [T],
    cache: &mut ForwardCache<T>,
) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("transition batch"));
    }
    let mut total = T::zero();
    for t in batch {
        let expert = t.expert_index()?;
        if t.features.dim != model.dim {
            return Err(Error::Dimension {
                expected: model.dim,
                actual: t.features.dim,
            });
        }
        let r = model.forward(&t.features, cache);
        let (loss, g) = terms(objective, &r, expert);
        total += loss;
        model.backward(&t.features, cache, &g, grad);
    }
    Ok(total)
}

pub(crate) fn penalty<T: Scalar>(model: &RewardModel<T>, l2: T) -> T {
    if l2 == T::zero() {
        return T::zero();
    }
    let sq: T = model
        .params
        .iter()
        .enumerate()
        .filter(|(k, _)| model.is_weight(*k))
        .map(|(_, &w)| w * w)
        .sum();
    l2 * sq / T::of(2.0)
}

pub(crate) fn add_penalty_gradient<T: Scalar>(model: &RewardModel<T>, l2: T, grad: &mut [T]) {
    if l2 == T::zero() {
        return;
    }
    for (k, g) in grad.iter_mut().enumerate() {
        if model.is_weight(k) {
            *g += l2 * model.params[k];
        }
    }
}

/// Mean listwise loss.
pub fn listwise_loss<T: Scalar>(model: &RewardModel<T>, batch: &[Transition<T>]) -> Result<T> {
    objective_loss(model, batch, Objective::Listwise, T::zero())
}

/// Gradient of [`listwise_loss`] with respect to the flat parameters.
pub fn loss_gradient<T: Scalar>(model: &RewardModel<T>, batch: &[Transition<T>]) -> Result<Vec<T>> {
    Ok(objective_gradient(model, batch, Objective::Listwise, T::zero())?.1)
}
