//! Ordering candidates by reward and cutting the top-N shortlist.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::irl::model::RewardModel;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl Confidence {
    pub fn label(self) -> &'static str {
        match self {
            Confidence::High => "high",
            Confidence::Medium => "medium",
            Confidence::Low => "low",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub item: ItemId,
    pub score: f64,
    pub irl_rank: usize,
    pub confidence: Confidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredShortlist {
    pub entries: Vec<ShortlistEntry>,
    /// Candidates below the cut, in reward order.
    pub tail: Vec<ItemId>,
}

impl ScoredShortlist {
    /// Top `n` of the candidates by score; rank terciles give the confidence.
    pub fn from_scores(items: &[ItemId], scores: &[f64], n: usize) -> Self {
        let ordered = order_by_score(items, scores);
        let n = n.max(1).min(ordered.len());
        let third = n.div_ceil(3);
        let entries = ordered[..n]
            .iter()
            .enumerate()
            .map(|(k, &(item, score))| ShortlistEntry {
                item,
                score,
                irl_rank: k + 1,
                confidence: if k < third {
                    Confidence::High
                } else if k < 2 * third {
                    Confidence::Medium
                } else {
                    Confidence::Low
                },
            })
            .collect();
        let tail = ordered[n..].iter().map(|&(i, _)| i).collect();
        ScoredShortlist { entries, tail }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.item).collect()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.entries.iter().any(|e| e.item == item)
    }

    /// Shortlist followed by the tail: the complete reward ordering.
    pub fn full_order(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.item).chain(self.tail.iter().copied()).collect()
    }
}

/// Descending score, ties by ascending item id.
pub fn order_by_score<T: Scalar>(items: &[ItemId], scores: &[T]) -> Vec<(ItemId, T)> {
    let mut v: Vec<(ItemId, T)> = items.iter().copied().zip(scores.iter().copied()).collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    v
}

/// 1-based position of `item` in `ordering`.
pub fn rank_of(ordering: &[ItemId], item: ItemId) -> Option<usize> {
    ordering.iter().position(|&i| i == item).map(|p| p + 1)
}

/// Scores raw candidate features with `model` and returns the top-`n` shortlist.
pub fn shortlist<T: Scalar>(
    model: &RewardModel<T>,
    items: &[ItemId],
    raw_features: &FeatureMatrix<T>,
    n: usize,
) -> Result<ScoredShortlist> {
    if raw_features.rows() != items.len() {
        return Err(Error::Dimension {
            expected: items.len(),
            actual: raw_features.rows(),
        });
    }
    let scores: Vec<f64> = model.score_raw(raw_features)?.into_iter().map(Scalar::as_f64).collect();
    Ok(ScoredShortlist::from_scores(items, &scores, n))
}
