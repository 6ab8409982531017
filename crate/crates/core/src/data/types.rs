use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One logged event. `feedback` is an explicit rating or a 0/1 implicit signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub feedback: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item: ItemId,
    pub title: String,
    pub categories: BTreeSet<String>,
    /// Free-text annotations, one entry per application (a multiset).
    pub tags: Vec<String>,
}

impl ItemMeta {
    pub fn empty(item: ItemId) -> Self {
        ItemMeta {
            item,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RawDataset {
    /// Sorted by `(timestamp, user, item)`.
    pub interactions: Vec<Interaction>,
    pub items: BTreeMap<ItemId, ItemMeta>,
}

impl RawDataset {
    pub fn user_count(&self) -> usize {
        self.interactions
            .iter()
            .map(|i| i.user)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn interacted_item_count(&self) -> usize {
        self.interactions
            .iter()
            .map(|i| i.item)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// Rule deciding whether an interaction counts as a positive demonstration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositivePredicate {
    /// `feedback >= threshold` (explicit ratings).
    AtLeast { threshold: f64 },
    /// `feedback == value` (implicit signals such as clicks).
    Equals { value: f64 },
}

impl PositivePredicate {
    pub const EXPLICIT_DEFAULT: Self = PositivePredicate::AtLeast { threshold: 4.0 };
    pub const IMPLICIT_DEFAULT: Self = PositivePredicate::Equals { value: 1.0 };

    pub fn is_positive(&self, feedback: f64) -> bool {
        match *self {
            PositivePredicate::AtLeast { threshold } => feedback >= threshold,
            PositivePredicate::Equals { value } => feedback == value,
        }
    }
}

impl Default for PositivePredicate {
    fn default() -> Self {
        Self::EXPLICIT_DEFAULT
    }
}
