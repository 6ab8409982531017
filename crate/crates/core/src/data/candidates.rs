use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::filter::FilteredDataset;
use super::types::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::seed;

/// One positive plus `n_neg` sampled negatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub user: UserId,
    pub positive: ItemId,
    /// Ascending item id.
    pub negatives: Vec<ItemId>,
    pub seed: u64,
}

impl CandidateSet {
    /// Positive first, then negatives.
    pub fn items(&self) -> Vec<ItemId> {
        let mut v = Vec::with_capacity(self.negatives.len() + 1);
        v.push(self.positive);
        v.extend_from_slice(&self.negatives);
        v
    }

    pub fn len(&self) -> usize {
        self.negatives.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Item universe and per-user positive histories used for negative sampling.
#[derive(Clone, Debug)]
pub struct Catalog {
    /// Ascending.
    pub items: Vec<ItemId>,
    pub positive_history: BTreeMap<UserId, BTreeSet<ItemId>>,
}

impl Catalog {
    pub fn from_dataset(dataset: &FilteredDataset) -> Self {
        Catalog {
            items: dataset.items.keys().copied().collect(),
            positive_history: dataset
                .trajectories
                .iter()
                .map(|(u, t)| (*u, t.iter().map(|i| i.item).collect()))
                .collect(),
        }
    }

    /// Ascending catalog items that are neither `target` nor in the user's
    /// positive history.
    pub fn negative_pool(&self, user: UserId, target: ItemId) -> Vec<ItemId> {
        let empty = BTreeSet::new();
        let history = self.history(user).unwrap_or(&empty);
        self.items
            .iter()
            .copied()
            .filter(|i| *i != target && !history.contains(i))
            .collect()
    }

    pub fn history(&self, user: UserId) -> Option<&BTreeSet<ItemId>> {
        self.positive_history.get(&user)
    }
}

/// Uniformly samples `n_neg` distinct negatives outside the user's positive
/// history. The same `(user, target, seed)` always yields the same set.
pub fn sample_candidates(
    catalog: &Catalog,
    user: UserId,
    target: ItemId,
    n_neg: usize,
    rng_seed: u64,
) -> Result<CandidateSet> {
    let pool = catalog.negative_pool(user, target);
    sample_from_pool(&pool, user, target, n_neg, rng_seed)
}

/// [`sample_candidates`] over a precomputed [`Catalog::negative_pool`].
pub fn sample_from_pool(
    pool: &[ItemId],
    user: UserId,
    target: ItemId,
    n_neg: usize,
    rng_seed: u64,
) -> Result<CandidateSet> {
    if pool.len() < n_neg {
        return Err(Error::InsufficientNegatives {
            user: user.0,
            eligible: pool.len(),
            requested: n_neg,
        });
    }
    let mut rng = seed::rng(rng_seed);
    let mut negatives: Vec<ItemId> = index::sample(&mut rng, pool.len(), n_neg)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    negatives.sort_unstable();
    Ok(CandidateSet {
        user,
        positive: target,
        negatives,
        seed: rng_seed,
    })
}
