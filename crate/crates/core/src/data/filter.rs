use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::types::{Interaction, ItemId, ItemMeta, PositivePredicate, RawDataset, UserId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Items by global count, then users by post-item count, then min positives.
    #[default]
    OnePass,
    /// Repeat the one-pass filter until nothing changes.
    Fixpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub min_user_positives: usize,
    pub positive: PositivePredicate,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_user_interactions: 20,
            min_item_interactions: 10,
            min_user_positives: 3,
            positive: PositivePredicate::EXPLICIT_DEFAULT,
            mode: FilterMode::OnePass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub positives: usize,
    pub passes: usize,
}

/// Activity-filtered log plus per-user chronological positive trajectories.
#[derive(Clone, Debug)]
pub struct FilteredDataset {
    /// Sorted by `(timestamp, user, item)`.
    pub interactions: Vec<Interaction>,
    /// Items that survive filtering and still appear in `interactions`.
    pub items: BTreeMap<ItemId, ItemMeta>,
    pub positive: PositivePredicate,
    /// Positives per user, by timestamp then ascending item id.
    pub trajectories: BTreeMap<UserId, Vec<Interaction>>,
}

impl FilteredDataset {
    pub fn stats(&self, passes: usize) -> FilterStats {
        FilterStats {
            users: self.trajectories.len(),
            items: self.items.len(),
            interactions: self.interactions.len(),
            positives: self.trajectories.values().map(Vec::len).sum(),
            passes,
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.trajectories.keys().copied()
    }

    /// Interactions of every user, each list in log order.
    pub fn by_user(&self) -> BTreeMap<UserId, Vec<Interaction>> {
        let mut out: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
        for i in &self.interactions {
            out.entry(i.user).or_default().push(*i);
        }
        out
    }
}

fn one_pass(interactions: Vec<Interaction>, cfg: &FilterConfig) -> Vec<Interaction> {
    let mut item_counts: HashMap<ItemId, usize> = HashMap::new();
    for i in &interactions {
        *item_counts.entry(i.item).or_default() += 1;
    }
    let kept: Vec<Interaction> = interactions
        .into_iter()
        .filter(|i| item_counts[&i.item] >= cfg.min_item_interactions)
        .collect();

    let mut user_counts: HashMap<UserId, usize> = HashMap::new();
    for i in &kept {
        *user_counts.entry(i.user).or_default() += 1;
    }
    let kept: Vec<Interaction> = kept
        .into_iter()
        .filter(|i| user_counts[&i.user] >= cfg.min_user_interactions)
        .collect();

    let mut positives: HashMap<UserId, usize> = HashMap::new();
    for i in &kept {
        let e = positives.entry(i.user).or_default();
        if cfg.positive.is_positive(i.feedback) {
            *e += 1;
        }
    }
    kept.into_iter()
        .filter(|i| positives[&i.user] >= cfg.min_user_positives)
        .collect()
}

/// Applies the activity thresholds and builds positive trajectories.
pub fn filter_dataset(raw: &RawDataset, cfg: &FilterConfig) -> Result<(FilteredDataset, FilterStats)> {
    let mut interactions = raw.interactions.clone();
    let mut passes = 0;
    loop {
        let before = interactions.len();
        interactions = one_pass(interactions, cfg);
        passes += 1;
        if cfg.mode == FilterMode::OnePass || interactions.len() == before {
            break;
        }
    }
    if interactions.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let item_ids: BTreeSet<ItemId> = interactions.iter().map(|i| i.item).collect();
    let items = item_ids
        .iter()
        .map(|id| {
            let meta = raw.items.get(id).cloned().unwrap_or_else(|| ItemMeta::empty(*id));
            (*id, meta)
        })
        .collect();

    let mut trajectories: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for i in &interactions {
        let t = trajectories.entry(i.user).or_default();
        if cfg.positive.is_positive(i.feedback) {
            t.push(*i);
        }
    }
    for t in trajectories.values_mut() {
        t.sort_by(|a, b| (a.timestamp, a.item).cmp(&(b.timestamp, b.item)));
    }

    let dataset = FilteredDataset {
        interactions,
        items,
        positive: cfg.positive,
        trajectories,
    };
    let stats = dataset.stats(passes);
    log::info!(
        "filtered: {} users, {} items, {} interactions, {} positives ({} pass(es))",
        stats.users,
        stats.items,
        stats.interactions,
        stats.positives,
        stats.passes
    );
    Ok((dataset, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ix(user: u64, item: u64, feedback: f64, timestamp: i64) -> Interaction {
        Interaction {
            user: UserId(user),
            item: ItemId(item),
            feedback,
            timestamp,
        }
    }

    fn raw(interactions: Vec<Interaction>) -> RawDataset {
        let mut r = RawDataset {
            interactions,
            items: BTreeMap::new(),
        };
        for i in &r.interactions {
            r.items.insert(i.item, ItemMeta::empty(i.item));
        }
        r
    }

    fn cfg(u: usize, i: usize, p: usize) -> FilterConfig {
        FilterConfig {
            min_user_interactions: u,
            min_item_interactions: i,
            min_user_positives: p,
            positive: PositivePredicate::EXPLICIT_DEFAULT,
            mode: FilterMode::OnePass,
        }
    }

    #[test]
    fn zero_thresholds_are_identity() {
        let r = raw(vec![ix(1, 1, 1.0, 1), ix(1, 2, 5.0, 2), ix(2, 1, 4.0, 3)]);
        let (d, _) = filter_dataset(&r, &cfg(0, 0, 0)).unwrap();
        assert_eq!(d.interactions, r.interactions);
        assert_eq!(d.items, r.items);
        assert_eq!(d.trajectories.len(), 2);
    }

    #[test]
    fn user_below_threshold_is_removed() {
        let r = raw(vec![ix(1, 1, 4.0, 1), ix(2, 1, 4.0, 2), ix(2, 2, 4.0, 3)]);
        let (d, stats) = filter_dataset(&r, &cfg(2, 0, 0)).unwrap();
        assert_eq!(d.users().collect::<Vec<_>>(), vec![UserId(2)]);
        assert_eq!(d.trajectories[&UserId(2)].len(), 2);
        assert_eq!(stats.users, 1);
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let r = raw(vec![ix(1, 1, 4.0, 1)]);
        assert!(matches!(filter_dataset(&r, &cfg(5, 0, 0)), Err(Error::EmptyAfterFilter)));
    }

    #[test]
    fn trajectories_break_timestamp_ties_by_item() {
        let r = raw(vec![ix(1, 9, 4.0, 5), ix(1, 3, 4.5, 5), ix(1, 4, 2.0, 1)]);
        let (d, _) = filter_dataset(&r, &cfg(0, 0, 0)).unwrap();
        let items: Vec<_> = d.trajectories[&UserId(1)].iter().map(|i| i.item.0).collect();
        assert_eq!(items, vec![3, 9]);
    }

    #[test]
    fn fixpoint_removes_cascading_items() {
        // item 3 has two ratings, one from user 2 who drops out; after that
        // item 3 falls under the item threshold.
        let r = raw(vec![
            ix(1, 1, 4.0, 1),
            ix(1, 2, 4.0, 2),
            ix(1, 3, 4.0, 3),
            ix(2, 3, 4.0, 4),
            ix(3, 1, 4.0, 5),
            ix(3, 2, 4.0, 6),
        ]);
        let mut c = cfg(2, 2, 0);
        let (one, _) = filter_dataset(&r, &c).unwrap();
        assert!(one.items.contains_key(&ItemId(3)));
        c.mode = FilterMode::Fixpoint;
        let (fix, stats) = filter_dataset(&r, &c).unwrap();
        assert!(!fix.items.contains_key(&ItemId(3)));
        assert!(stats.passes >= 2);
    }

    proptest! {
        #[test]
        fn raising_thresholds_never_grows_counts(
            rows in proptest::collection::vec((0u64..8, 0u64..12, 1u32..=10), 1..120),
            u in 0usize..6, i in 0usize..6, p in 0usize..4,
            du in 0usize..3, di in 0usize..3, dp in 0usize..3,
        ) {
            let r = raw(rows.iter().enumerate()
                .map(|(t, &(a, b, f))| ix(a, b, f as f64 / 2.0, t as i64)).collect());
            let lo = filter_dataset(&r, &cfg(u, i, p)).map(|(d, _)| (d.trajectories.len(), d.items.len()));
            let hi = filter_dataset(&r, &cfg(u + du, i + di, p + dp)).map(|(d, _)| (d.trajectories.len(), d.items.len()));
            match (lo, hi) {
                (Ok((lu, li)), Ok((hu, hi))) => { prop_assert!(hu <= lu); prop_assert!(hi <= li); }
                (Err(_), Ok(_)) => prop_assert!(false, "higher thresholds kept data the lower ones dropped"),
                _ => {}
            }
        }
    }
}
