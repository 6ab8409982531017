//! Individual and community context for a user state.
//!
//! Profiles are fractional category histograms over a user's positives;
//! communities are the top-M users by cosine similarity of those profiles.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::data::{Interaction, ItemId, ItemMeta, PositivePredicate, UserId};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::scalar::cosine;

/// Fixed ordering of category labels shared by profiles and feature vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CategorySpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategorySpace {
    pub fn new(labels: impl IntoIterator<Item = String>) -> Self {
        let mut labels: Vec<String> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        let index = labels.iter().enumerate().map(|(k, l)| (l.clone(), k)).collect();
        CategorySpace { labels, index }
    }

    pub fn from_graph(graph: &HeteroGraph) -> Self {
        Self::new(graph.categories.iter().cloned())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// 0/1 indicator of the item's categories.
    pub fn indicator(&self, meta: Option<&ItemMeta>) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        if let Some(meta) = meta {
            for c in &meta.categories {
                if let Some(k) = self.position(c) {
                    v[k] = 1.0;
                }
            }
        }
        v
    }

    /// Adds `1/c` to each of the item's `c` known categories.
    fn accumulate(&self, meta: Option<&ItemMeta>, into: &mut [f64]) {
        let Some(meta) = meta else { return };
        let known: Vec<usize> = meta.categories.iter().filter_map(|c| self.position(c)).collect();
        if known.is_empty() {
            return;
        }
        let w = 1.0 / known.len() as f64;
        for k in known {
            into[k] += w;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub user: UserId,
    /// Sums to 1 when any history item has a known category, else all zero.
    pub category_distribution: Vec<f64>,
    /// The `k_recent` most recent positives, chronological.
    pub positive_history: Vec<Interaction>,
    /// Concept id -> number of history items carrying it.
    pub concept_affinity: BTreeMap<u32, usize>,
    /// Size of the full positive history the profile was built from.
    pub history_len: usize,
}

impl UserProfile {
    pub fn is_cold(&self) -> bool {
        self.history_len == 0
    }

    /// Indices of the largest categories, proportion descending then label order.
    pub fn top_categories(&self, n: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .category_distribution
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }
}

/// Builds a profile from the user's chronological positives, keeping only
/// those strictly before `as_of` (all of them when `as_of` is `None`).
pub fn build_profile(
    user: UserId,
    positives: &[Interaction],
    as_of: Option<i64>,
    k_recent: usize,
    items: &BTreeMap<ItemId, ItemMeta>,
    space: &CategorySpace,
    graph: &HeteroGraph,
) -> UserProfile {
    let history: &[Interaction] = match as_of {
        Some(t) => {
            let end = positives.partition_point(|i| i.timestamp < t);
            &positives[..end]
        }
        None => positives,
    };
    let mut dist = vec![0.0; space.len()];
    let mut affinity: BTreeMap<u32, usize> = BTreeMap::new();
    for i in history {
        space.accumulate(items.get(&i.item), &mut dist);
        for c in graph.concepts_of(i.item) {
            *affinity.entry(*c).or_default() += 1;
        }
    }
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        for d in &mut dist {
            *d /= total;
        }
    }
    let start = history.len().saturating_sub(k_recent);
    UserProfile {
        user,
        category_distribution: dist,
        positive_history: history[start..].to_vec(),
        concept_affinity: affinity,
        history_len: history.len(),
    }
}

/// Top-M most similar users, similarity descending then user id ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Community {
    pub members: Vec<(UserId, f64)>,
}

impl Community {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Users with an all-zero profile get an empty community.
pub fn find_community(
    user: UserId,
    distribution: &[f64],
    all_profiles: &BTreeMap<UserId, Vec<f64>>,
    m: usize,
) -> Community {
    if distribution.iter().all(|&x| x == 0.0) || m == 0 {
        return Community::default();
    }
    let mut scored: Vec<(UserId, f64)> = all_profiles
        .iter()
        .filter(|(u, _)| **u != user)
        .map(|(u, p)| (*u, cosine(distribution, p).clamp(0.0, 1.0)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(m);
    Community { members: scored }
}

/// Communities for every user in `profiles`, computed in parallel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarityIndex {
    pub communities: BTreeMap<UserId, Community>,
}

impl SimilarityIndex {
    pub fn build(profiles: &BTreeMap<UserId, Vec<f64>>, m: usize) -> Self {
        let users: Vec<(&UserId, &Vec<f64>)> = profiles.iter().collect();
        let communities = users
            .par_iter()
            .map(|(u, p)| (**u, find_community(**u, p, profiles, m)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        SimilarityIndex { communities }
    }

    pub fn community(&self, user: UserId) -> Option<&Community> {
        self.communities.get(&user)
    }

    /// `key\t<hash>` header, then `user\tmember:similarity,...` per line.
    pub fn write_cache<W: Write>(&self, key: &str, mut out: W) -> std::io::Result<()> {
        writeln!(out, "key\t{key}")?;
        for (u, c) in &self.communities {
            let members: Vec<String> = c.members.iter().map(|(m, s)| format!("{m}:{s:?}")).collect();
            writeln!(out, "{u}\t{}", members.join(","))?;
        }
        Ok(())
    }

    /// Returns `Ok(None)` when the cache was written for a different key.
    pub fn read_cache<R: BufRead>(key: &str, input: R) -> Result<Option<Self>> {
        let mut lines = input.lines();
        let bad = |m: &str| Error::Format(format!("similarity cache: {m}"));
        let header = lines
            .next()
            .ok_or_else(|| bad("empty"))?
            .map_err(|e| bad(&e.to_string()))?;
        if header != format!("key\t{key}") {
            return Ok(None);
        }
        let mut communities = BTreeMap::new();
        for line in lines {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            let (u, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let user = UserId(u.parse().map_err(|_| bad("user id"))?);
            let mut members = Vec::new();
            for entry in rest.split(',').filter(|s| !s.is_empty()) {
                let (m, s) = entry.split_once(':').ok_or_else(|| bad("member entry"))?;
                members.push((
                    UserId(m.parse().map_err(|_| bad("member id"))?),
                    s.parse().map_err(|_| bad("similarity"))?,
                ));
            }
            communities.insert(user, Community { members });
        }
        Ok(Some(SimilarityIndex { communities }))
    }
}

/// A user's aggregated feedback on one item during the training period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItemFeedback {
    pub mean_feedback: f64,
    pub positive: bool,
}

/// Per-user, per-item feedback over the training period.
#[derive(Clone, Debug, Default)]
pub struct FeedbackTable {
    pub users: BTreeMap<UserId, HashMap<ItemId, ItemFeedback>>,
    pub global_mean: f64,
}

impl FeedbackTable {
    pub fn from_interactions<'a>(
        interactions: impl IntoIterator<Item = &'a Interaction>,
        predicate: PositivePredicate,
    ) -> Self {
        let mut acc: BTreeMap<UserId, HashMap<ItemId, (f64, usize, bool)>> = BTreeMap::new();
        let (mut sum, mut n) = (0.0, 0usize);
        for i in interactions {
            let e = acc.entry(i.user).or_default().entry(i.item).or_insert((0.0, 0, false));
            e.0 += i.feedback;
            e.1 += 1;
            e.2 |= predicate.is_positive(i.feedback);
            sum += i.feedback;
            n += 1;
        }
        let users = acc
            .into_iter()
            .map(|(u, m)| {
                let m = m
                    .into_iter()
                    .map(|(item, (s, c, p))| {
                        (
                            item,
                            ItemFeedback {
                                mean_feedback: s / c as f64,
                                positive: p,
                            },
                        )
                    })
                    .collect();
                (u, m)
            })
            .collect();
        FeedbackTable {
            users,
            global_mean: if n == 0 { 0.0 } else { sum / n as f64 },
        }
    }

    pub fn get(&self, user: UserId, item: ItemId) -> Option<&ItemFeedback> {
        self.users.get(&user).and_then(|m| m.get(&item))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommunitySignals {
    pub support: f64,
    pub avg_feedback: f64,
    pub shared_concept_count: usize,
}

/// Direct computation of the community signals for one candidate.
pub fn community_signals<'a>(
    community: &Community,
    candidate: ItemId,
    feedback: &FeedbackTable,
    graph: &HeteroGraph,
    history_items: impl IntoIterator<Item = &'a ItemId>,
) -> CommunitySignals {
    let (mut positive, mut weighted, mut weights) = (0usize, 0.0, 0.0);
    for (member, sim) in &community.members {
        if let Some(f) = feedback.get(*member, candidate) {
            positive += usize::from(f.positive);
            weighted += sim * f.mean_feedback;
            weights += sim;
        }
    }
    CommunitySignals {
        support: if community.is_empty() {
            0.0
        } else {
            positive as f64 / community.len() as f64
        },
        avg_feedback: if weights > 0.0 {
            weighted / weights
        } else {
            feedback.global_mean
        },
        shared_concept_count: crate::graph::shared_concepts(graph, history_items, candidate),
    }
}

/// Community statistics pre-aggregated per item, for O(1) lookups per
/// candidate. Agrees with [`community_signals`] on support and average.
#[derive(Clone, Debug, Default)]
pub struct CommunityAggregate {
    size: usize,
    global_mean: f64,
    per_item: HashMap<ItemId, (usize, f64, f64)>,
}

impl CommunityAggregate {
    pub fn new(community: &Community, feedback: &FeedbackTable) -> Self {
        let mut per_item: HashMap<ItemId, (usize, f64, f64)> = HashMap::new();
        for (member, sim) in &community.members {
            let Some(items) = feedback.users.get(member) else { continue };
            // sorted so the floating-point sums do not depend on hash order
            let mut sorted: Vec<(&ItemId, &ItemFeedback)> = items.iter().collect();
            sorted.sort_unstable_by_key(|(i, _)| **i);
            for (item, f) in sorted {
                let e = per_item.entry(*item).or_insert((0, 0.0, 0.0));
                e.0 += usize::from(f.positive);
                e.1 += sim * f.mean_feedback;
                e.2 += sim;
            }
        }
        CommunityAggregate {
            size: community.len(),
            global_mean: feedback.global_mean,
            per_item,
        }
    }

    /// `(support, avg_feedback)` for a candidate.
    pub fn lookup(&self, candidate: ItemId) -> (f64, f64) {
        match self.per_item.get(&candidate) {
            Some(&(pos, weighted, weights)) => (
                if self.size == 0 { 0.0 } else { pos as f64 / self.size as f64 },
                if weights > 0.0 { weighted / weights } else { self.global_mean },
            ),
            None => (0.0, self.global_mean),
        }
    }
}
