//! Turning a free-form provider reply into a full shortlist permutation.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::ItemId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    /// Some ids were missing, duplicated or unknown and were fixed up.
    Repaired,
    /// Nothing usable in the reply; reward order substituted.
    ParseFailure,
    /// The provider call failed; reward order substituted.
    ProviderError,
}

impl FallbackReason {
    pub fn label(self) -> &'static str {
        match self {
            FallbackReason::Repaired => "repaired",
            FallbackReason::ParseFailure => "parse_failure",
            FallbackReason::ProviderError => "provider_error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedResponse {
    pub ordering: Vec<ItemId>,
    pub fallback_reason: Option<FallbackReason>,
}

impl RankedResponse {
    /// Reward order, tagged with why it was used.
    pub fn fallback(shortlist: &[ItemId], reason: FallbackReason) -> Self {
        RankedResponse {
            ordering: shortlist.to_vec(),
            fallback_reason: Some(reason),
        }
    }
}

fn integers() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").expect("static pattern"))
}

/// `shortlist` is in reward order; the reply refers to it by 1-based index.
///
/// Unknown indices are dropped, repeats keep their first occurrence and
/// omitted candidates follow in reward order. A reply with no usable index
/// yields the reward order tagged `parse_failure`.
pub fn parse_ranking(raw: &str, shortlist: &[ItemId]) -> RankedResponse {
    let n = shortlist.len();
    let mut seen = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut clean = true;
    for m in integers().find_iter(raw) {
        let k = match m.as_str().parse::<usize>() {
            Ok(k) if (1..=n).contains(&k) => k - 1,
            _ => {
                clean = false;
                continue;
            }
        };
        if seen[k] {
            clean = false;
            continue;
        }
        seen[k] = true;
        ordering.push(shortlist[k]);
    }
    if ordering.is_empty() {
        return RankedResponse::fallback(shortlist, FallbackReason::ParseFailure);
    }
    if ordering.len() < n {
        clean = false;
        ordering.extend(shortlist.iter().zip(&seen).filter(|(_, s)| !**s).map(|(i, _)| *i));
    }
    RankedResponse {
        ordering,
        fallback_reason: (!clean).then_some(FallbackReason::Repaired),
    }
}

/// Reply text for `ordering` in the format [`parse_ranking`] reads.
pub fn render_ranking(ordering: &[ItemId], shortlist: &[ItemId]) -> String {
    ordering
        .iter()
        .filter_map(|i| shortlist.iter().position(|s| s == i))
        .map(|k| (k + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
