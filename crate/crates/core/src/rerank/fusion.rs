//! Rank fusion of the reward order with a provider order, and α selection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::metrics::ndcg_at;
use crate::irl::rank_of;

/// Fused order of the shortlist: ascending `α·rank_llm + (1−α)·rank_irl`
/// (1-based ranks), ties by IRL rank and then item id.
///
/// Both orderings must be permutations of the same items.
pub fn fuse(llm: &[ItemId], irl: &[ItemId], alpha: f64) -> Result<Vec<ItemId>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    if llm.len() != irl.len() {
        return Err(Error::MismatchedRankings);
    }
    let llm_rank: HashMap<ItemId, usize> = llm.iter().enumerate().map(|(k, i)| (*i, k + 1)).collect();
    if llm_rank.len() != llm.len() {
        return Err(Error::MismatchedRankings);
    }
    let mut scored = Vec::with_capacity(irl.len());
    for (k, item) in irl.iter().enumerate() {
        let r_llm = *llm_rank.get(item).ok_or(Error::MismatchedRankings)?;
        let r_irl = k + 1;
        scored.push((alpha * r_llm as f64 + (1.0 - alpha) * r_irl as f64, r_irl, *item));
    }
    if scored.iter().map(|s| s.2).collect::<std::collections::HashSet<_>>().len() != irl.len() {
        return Err(Error::MismatchedRankings);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(scored.into_iter().map(|s| s.2).collect())
}

/// One held-out user as seen by the α search.
#[derive(Clone, Debug)]
pub struct AlphaCase {
    pub user: UserId,
    /// Shortlist in reward order.
    pub irl: Vec<ItemId>,
    /// Parsed provider permutation of the shortlist.
    pub llm: Vec<ItemId>,
    /// Candidates below the shortlist, in reward order.
    pub tail: Vec<ItemId>,
    pub positive: ItemId,
}

impl AlphaCase {
    /// Fused shortlist followed by the untouched tail.
    pub fn final_order(&self, alpha: f64) -> Result<Vec<ItemId>> {
        let mut order = fuse(&self.llm, &self.irl, alpha)?;
        order.extend_from_slice(&self.tail);
        Ok(order)
    }

    pub fn ndcg10(&self, alpha: f64) -> Result<f64> {
        let order = self.final_order(alpha)?;
        Ok(rank_of(&order, self.positive).map_or(0.0, |r| ndcg_at(r, 10)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTuning {
    pub alpha: f64,
    pub best_ndcg10: f64,
    /// `(α, mean NDCG@10)` for every grid point, in grid order.
    pub grid: Vec<(f64, f64)>,
}

impl AlphaTuning {
    /// Mean NDCG@10 at α = 0, i.e. the reward order alone.
    pub fn irl_ndcg10(&self, cases: &[AlphaCase]) -> Result<f64> {
        mean_ndcg10(cases, 0.0)
    }
}

pub fn mean_ndcg10(cases: &[AlphaCase], alpha: f64) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::Empty("validation cases"));
    }
    let mut sum = 0.0;
    for c in cases {
        sum += c.ndcg10(alpha)?;
    }
    Ok(sum / cases.len() as f64)
}

/// Grid point with the highest mean validation NDCG@10; ties go to the
/// smallest α.
pub fn tune_alpha(cases: &[AlphaCase], grid: &[f64]) -> Result<AlphaTuning> {
    if cases.is_empty() {
        return Err(Error::Empty("validation cases"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &a in grid {
        scores.push((a, mean_ndcg10(cases, a)?));
    }
    let (alpha, best) = scores
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |(ba, bs), (a, s)| {
            if s > bs || (s == bs && a < ba) {
                (a, s)
            } else {
                (ba, bs)
            }
        });
    Ok(AlphaTuning {
        alpha,
        best_ndcg10: best,
        grid: scores,
    })
}

/// Whether fusion is applied at test time. With the gate enabled it is
/// applied only when it does not lower validation NDCG@10.
pub fn boost_only_gate(enabled: bool, irl_val_ndcg10: f64, fused_val_ndcg10: f64) -> bool {
    !enabled || fused_val_ndcg10 >= irl_val_ndcg10
}
