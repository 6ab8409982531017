//! Non-learned orderings of a candidate set.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::data::ItemId;
use crate::seed;

/// Seeded uniform shuffle.
pub fn baseline_random(candidates: &[ItemId], seed_value: u64) -> Vec<ItemId> {
    let mut v = candidates.to_vec();
    v.sort();
    v.shuffle(&mut seed::rng(seed_value));
    v
}

/// Descending training-period interaction count, ties by ascending item id.
pub fn baseline_popularity(candidates: &[ItemId], counts: &HashMap<ItemId, u64>) -> Vec<ItemId> {
    let mut v = candidates.to_vec();
    v.sort_by(|a, b| {
        let ca = counts.get(a).copied().unwrap_or(0);
        let cb = counts.get(b).copied().unwrap_or(0);
        cb.cmp(&ca).then(a.cmp(b))
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn popularity_order_and_ties() {
        let counts: HashMap<ItemId, u64> = [(ItemId(1), 1), (ItemId(2), 5), (ItemId(3), 3), (ItemId(4), 3)].into();
        let order = baseline_popularity(&[ItemId(1), ItemId(4), ItemId(3), ItemId(2), ItemId(9)], &counts);
        assert_eq!(order, vec![ItemId(2), ItemId(3), ItemId(4), ItemId(1), ItemId(9)]);
    }

    #[test]
    fn random_is_a_seeded_permutation() {
        let items: Vec<ItemId> = (0..100).map(ItemId).collect();
        let a = baseline_random(&items, 3);
        assert_eq!(a, baseline_random(&items, 3));
        assert_ne!(a, baseline_random(&items, 4));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, items);
        let mut reversed = items.clone();
        reversed.reverse();
        assert_eq!(baseline_random(&reversed, 3), a, "input order does not matter");
    }
}
