//! Feature vectors `phi(state, candidate)` and their standardization.
//!
//! Layout, with `G` the number of categories:
//!
//! | block       | dims  | contents                                               |
//! |-------------|-------|--------------------------------------------------------|
//! | user        | G + 2 | category distribution, `ln(1 + n_prior)`, recency      |
//! | candidate   | G + 1 | category indicator, `ln(1 + popularity)`               |
//! | interaction | 1     | cosine(user distribution, candidate indicator)         |
//! | graph       | 4     | text similarity, support, shared concepts, avg feedback |
//!
//! The graph block is omitted when graph features are disabled.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Interaction, ItemId, ItemMeta, UserId};
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, SparseVector, TextIndex};
use crate::retrieval::{
    build_profile, CategorySpace, CommunityAggregate, CommunitySignals, FeedbackTable, SimilarityIndex, UserProfile,
};
use crate::scalar::{cosine, dot, Scalar};

pub const GRAPH_FEATURES: usize = 4;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub n_categories: usize,
    pub graph_features: bool,
}

impl FeatureLayout {
    pub fn base_dim(&self) -> usize {
        (self.n_categories + 2) + (self.n_categories + 1) + 1
    }

    pub fn dim(&self) -> usize {
        self.base_dim() + if self.graph_features { GRAPH_FEATURES } else { 0 }
    }

    pub fn names(&self, categories: &[String]) -> Vec<String> {
        let mut v: Vec<String> = categories.iter().map(|c| format!("user_cat:{c}")).collect();
        v.extend(["user_activity".into(), "user_recency".into()]);
        v.extend(categories.iter().map(|c| format!("cand_cat:{c}")));
        v.push("cand_popularity".into());
        v.push("user_cand_cosine".into());
        if self.graph_features {
            v.extend(
                ["text_similarity", "community_support", "shared_concepts", "community_avg_feedback"]
                    .map(String::from),
            );
        }
        v
    }
}

/// Behavioral block. `delta_days` may be infinite (no prior interaction),
/// which saturates recency at 1.
pub fn behavioral_features<T: Scalar>(
    profile: &UserProfile,
    n_prior: usize,
    delta_days: f64,
    candidate_indicator: &[f64],
    popularity_count: u64,
) -> Vec<T> {
    let dist = &profile.category_distribution;
    let mut v = Vec::with_capacity(2 * dist.len() + 4);
    v.extend(dist.iter().map(|&x| T::of(x)));
    v.push(T::of((1.0 + n_prior as f64).ln()));
    v.push(T::of((delta_days.max(0.0) / 365.0).min(1.0)));
    v.extend(candidate_indicator.iter().map(|&x| T::of(x)));
    v.push(T::of((1.0 + popularity_count as f64).ln()));
    v.push(T::of(cosine(dist, candidate_indicator)));
    v
}

/// Graph block: text similarity, community support, shared concepts and
/// community average feedback.
pub fn graph_features<T: Scalar>(
    query: &SparseVector,
    candidate: ItemId,
    text_index: &TextIndex,
    signals: &CommunitySignals,
) -> Result<[T; GRAPH_FEATURES]> {
    Ok([
        T::of(text_index.similarity(query, candidate)?),
        T::of(signals.support),
        T::of_usize(signals.shared_concept_count),
        T::of(signals.avg_feedback),
    ])
}

/// Concatenates the blocks and checks the result against `layout`.
pub fn assemble<T: Scalar>(
    layout: &FeatureLayout,
    behavioral: Vec<T>,
    graph: Option<[T; GRAPH_FEATURES]>,
) -> Result<Vec<T>> {
    let mut v = behavioral;
    if layout.graph_features {
        let g = graph.ok_or(Error::Dimension {
            expected: layout.dim(),
            actual: v.len(),
        })?;
        v.extend_from_slice(&g);
    }
    if v.len() != layout.dim() {
        return Err(Error::Dimension {
            expected: layout.dim(),
            actual: v.len(),
        });
    }
    if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("feature {bad}")));
    }
    Ok(v)
}

/// Row-major matrix of feature vectors, one row per candidate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix<T> {
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(dim: usize) -> Self {
        FeatureMatrix { dim, data: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<T>]) -> Self {
        let mut m = Self::new(dim);
        for r in rows {
            m.push(r);
        }
        m
    }

    pub fn push(&mut self, row: &[T]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, k: usize) -> &[T] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.data.chunks_exact_mut(self.dim.max(1))
    }
}

/// Per-dimension z-scoring fit on training features. Dimensions whose
/// population standard deviation is below `epsilon` map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Scalar> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub epsilon: T,
}

pub const STD_EPSILON: f64 = 1e-8;

impl<T: Scalar> Standardizer<T> {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![T::zero(); dim],
            std: vec![T::one(); dim],
            epsilon: T::of(STD_EPSILON),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Streaming (Welford) fit in `f64`.
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut count = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for v in vectors {
            if count == 0 {
                mean = vec![0.0; v.len()];
                m2 = vec![0.0; v.len()];
            } else if v.len() != mean.len() {
                return Err(Error::Dimension {
                    expected: mean.len(),
                    actual: v.len(),
                });
            }
            count += 1;
            let n = count as f64;
            for (k, x) in v.iter().enumerate() {
                let x = x.as_f64();
                let delta = x - mean[k];
                mean[k] += delta / n;
                m2[k] += delta * (x - mean[k]);
            }
        }
        if count == 0 {
            return Err(Error::Empty("training feature set"));
        }
        Ok(Standardizer {
            mean: mean.iter().map(|&m| T::of(m)).collect(),
            std: m2.iter().map(|&s| T::of((s / count as f64).sqrt())).collect(),
            epsilon: T::of(STD_EPSILON),
        })
    }

    pub fn apply(&self, v: &mut [T]) {
        for ((x, &m), &s) in v.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = if s < self.epsilon { T::zero() } else { (*x - m) / s };
        }
    }

    pub fn apply_matrix(&self, m: &mut FeatureMatrix<T>) {
        for row in m.iter_mut() {
            self.apply(row);
        }
    }

    /// Inverse transform; constant dimensions come back as their mean.
    pub fn invert(&self, v: &mut [T]) {
        for ((x, &m), &s) in v.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = if s < self.epsilon { m } else { *x * s + m };
        }
    }
}

/// Everything a user state needs at one prediction time.
#[derive(Clone, Debug)]
pub struct UserState {
    pub user: UserId,
    pub as_of: i64,
    pub profile: UserProfile,
    pub n_prior: usize,
    pub delta_days: f64,
    pub query: SparseVector,
    /// Sorted concept ids over the full positive history before `as_of`.
    pub history_concepts: Vec<u32>,
}

/// Immutable inputs for feature assembly across one experiment.
#[derive(Clone, Debug)]
pub struct FeatureContext {
    pub layout: FeatureLayout,
    pub space: CategorySpace,
    pub graph: HeteroGraph,
    pub text_index: TextIndex,
    pub items: BTreeMap<ItemId, ItemMeta>,
    pub item_documents: BTreeMap<ItemId, String>,
    /// Global interaction counts over the training period.
    pub popularity: HashMap<ItemId, u64>,
    pub feedback: FeedbackTable,
    pub similarity: SimilarityIndex,
    pub k_recent: usize,
    communities: BTreeMap<UserId, CommunityAggregate>,
    indicators: HashMap<ItemId, Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
impl FeatureContext {
    pub fn new(
        graph_features: bool,
        space: CategorySpace,
        graph: HeteroGraph,
        text_index: TextIndex,
        items: BTreeMap<ItemId, ItemMeta>,
        item_documents: BTreeMap<ItemId, String>,
        popularity: HashMap<ItemId, u64>,
        feedback: FeedbackTable,
        similarity: SimilarityIndex,
        k_recent: usize,
    ) -> Self {
        let communities = similarity
            .communities
            .iter()
            .map(|(u, c)| (*u, CommunityAggregate::new(c, &feedback)))
            .collect();
        let indicators = items
            .iter()
            .map(|(id, meta)| (*id, space.indicator(Some(meta))))
            .collect();
        FeatureContext {
            layout: FeatureLayout {
                n_categories: space.len(),
                graph_features,
            },
            space,
            graph,
            text_index,
            items,
            item_documents,
            popularity,
            feedback,
            similarity,
            k_recent,
            communities,
            indicators,
        }
    }

    /// Same inputs with the graph block switched on or off.
    pub fn with_graph_features(&self, enabled: bool) -> Self {
        let mut c = self.clone();
        c.layout.graph_features = enabled;
        c
    }

    /// State at `as_of` from the user's chronological positives and the
    /// user's training-period interactions sorted by timestamp. Only data
    /// strictly before `as_of` is used.
    pub fn state(&self, user: UserId, as_of: i64, positives: &[Interaction], interactions: &[Interaction]) -> UserState {
        let profile = build_profile(
            user,
            positives,
            Some(as_of),
            self.k_recent,
            &self.items,
            &self.space,
            &self.graph,
        );
        let n_prior = interactions.partition_point(|i| i.timestamp < as_of);
        let delta_days = match n_prior {
            0 => f64::INFINITY,
            k => (as_of - interactions[k - 1].timestamp) as f64 / SECONDS_PER_DAY,
        };
        let text: Vec<&str> = profile
            .positive_history
            .iter()
            .filter_map(|i| self.item_documents.get(&i.item).map(String::as_str))
            .collect();
        let query = self.text_index.vectorize(&text.join(" "));
        let history_concepts = profile.concept_affinity.keys().copied().collect();
        UserState {
            user,
            as_of,
            profile,
            n_prior,
            delta_days,
            query,
            history_concepts,
        }
    }

    pub fn signals(&self, state: &UserState, candidate: ItemId) -> CommunitySignals {
        let (support, avg_feedback) = match self.communities.get(&state.user) {
            Some(agg) => agg.lookup(candidate),
            None => (0.0, self.feedback.global_mean),
        };
        let cand = self.graph.concepts_of(candidate);
        let shared = count_common(&state.history_concepts, cand);
        CommunitySignals {
            support,
            avg_feedback,
            shared_concept_count: shared,
        }
    }

    pub fn features<T: Scalar>(&self, state: &UserState, candidate: ItemId) -> Result<Vec<T>> {
        let indicator = self
            .indicators
            .get(&candidate)
            .ok_or(Error::UnknownItem(candidate.0))?;
        let behavioral = behavioral_features(
            &state.profile,
            state.n_prior,
            state.delta_days,
            indicator,
            self.popularity.get(&candidate).copied().unwrap_or(0),
        );
        let graph = if self.layout.graph_features {
            let signals = self.signals(state, candidate);
            Some(graph_features(&state.query, candidate, &self.text_index, &signals)?)
        } else {
            None
        };
        assemble(&self.layout, behavioral, graph)
    }

    /// All candidate rows for one state. Agrees exactly with calling
    /// [`FeatureContext::features`] per candidate, with the per-state work
    /// (query norm, dense query, profile norm) hoisted out of the loop.
    pub fn matrix<T: Scalar>(&self, state: &UserState, candidates: &[ItemId]) -> Result<FeatureMatrix<T>> {
        let dim = self.layout.dim();
        let mut m = FeatureMatrix::new(dim);
        m.data.reserve(candidates.len() * dim);

        let dist = &state.profile.category_distribution;
        let dist_norm = dot(dist, dist).sqrt();
        let log_prior = T::of((1.0 + state.n_prior as f64).ln());
        let recency = T::of((state.delta_days.max(0.0) / 365.0).min(1.0));

        let query_zero = state.query.is_zero();
        let query_norm = state.query.norm();
        let mut dense_query = Vec::new();
        if self.layout.graph_features && !query_zero {
            dense_query = vec![0.0; self.text_index.idf.len()];
            for &(k, v) in &state.query.0 {
                dense_query[k as usize] = v;
            }
        }
        let community = self.communities.get(&state.user);

        for &c in candidates {
            let indicator = self.indicators.get(&c).ok_or(Error::UnknownItem(c.0))?;
            let start = m.data.len();
            m.data.extend(dist.iter().map(|&x| T::of(x)));
            m.data.push(log_prior);
            m.data.push(recency);
            m.data.extend(indicator.iter().map(|&x| T::of(x)));
            let pop = self.popularity.get(&c).copied().unwrap_or(0);
            m.data.push(T::of((1.0 + pop as f64).ln()));
            let ind_norm = dot(indicator, indicator).sqrt();
            m.data.push(T::of(if dist_norm == 0.0 || ind_norm == 0.0 {
                0.0
            } else {
                dot(dist, indicator) / (dist_norm * ind_norm)
            }));
            if self.layout.graph_features {
                let doc = self.text_index.vector(c)?;
                let sim = if query_zero || doc.is_zero() {
                    0.0
                } else {
                    let mut acc = 0.0;
                    for &(k, v) in &doc.0 {
                        acc += dense_query[k as usize] * v;
                    }
                    acc / (query_norm * doc.norm())
                };
                let (support, avg) = match community {
                    Some(agg) => agg.lookup(c),
                    None => (0.0, self.feedback.global_mean),
                };
                let shared = count_common(&state.history_concepts, self.graph.concepts_of(c));
                m.data.extend([T::of(sim), T::of(support), T::of_usize(shared), T::of(avg)]);
            }
            let row = &m.data[start..];
            if row.len() != dim {
                return Err(Error::Dimension { expected: dim, actual: row.len() });
            }
            if let Some(bad) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("feature {bad}")));
            }
        }
        Ok(m)
    }
}

fn count_common(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// One delimited record per (user, step, candidate): metadata then the vector.
pub fn write_feature_dump<T: Scalar, W: Write>(
    out: &mut W,
    names: &[String],
    records: impl IntoIterator<Item = (UserId, usize, ItemId, bool, Vec<T>)>,
    write_header: bool,
) -> std::io::Result<()> {
    if write_header {
        writeln!(out, "user,step,candidate,label,{}", names.join(","))?;
    }
    for (user, step, cand, label, values) in records {
        let vals: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{user},{step},{cand},{},{}", u8::from(label), vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PositivePredicate;
    use crate::graph::{build_graph, build_text_index, item_document, shared_concepts};
    use crate::retrieval::{community_signals, Community};
    use proptest::prelude::*;

    fn profile(dist: Vec<f64>) -> UserProfile {
        UserProfile {
            user: UserId(1),
            category_distribution: dist,
            positive_history: vec![],
            concept_affinity: BTreeMap::new(),
            history_len: 0,
        }
    }

    #[test]
    fn behavioral_edge_values() {
        let p = profile(vec![0.5, 0.5, 0.0]);
        let v: Vec<f64> = behavioral_features(&p, 0, 730.0, &[1.0, 1.0, 0.0], 0);
        assert_eq!(v.len(), 2 * 3 + 4);
        assert_eq!(v[3], 0.0, "activity");
        assert_eq!(v[4], 1.0, "recency clamps");
        assert_eq!(v[8], 0.0, "popularity ln(1)");
        assert!((v[9] - 1.0).abs() < 1e-12, "parallel vectors");
        let none: Vec<f64> = behavioral_features(&p, 3, f64::INFINITY, &[0.0; 3], 4);
        assert_eq!(none[4], 1.0);
        assert!((none[3] - 4f64.ln()).abs() < 1e-15);
        assert_eq!(none[9], 0.0);
    }

    #[test]
    fn movielens_layout_dimensions() {
        let with = FeatureLayout { n_categories: 20, graph_features: true };
        let without = FeatureLayout { n_categories: 20, graph_features: false };
        assert_eq!(with.dim(), 48);
        assert_eq!(without.dim(), 44);
        assert_eq!(with.names(&vec!["g".into(); 20]).len(), 48);
    }

    #[test]
    fn assemble_rejects_wrong_sizes_and_non_finite() {
        let layout = FeatureLayout { n_categories: 1, graph_features: false };
        assert!(assemble::<f64>(&layout, vec![0.0; 5], None).is_err());
        assert!(assemble::<f64>(&layout, vec![0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0], None).is_err());
        assert!(assemble::<f64>(&layout, vec![0.0; 6], None).is_ok());
        let g = FeatureLayout { n_categories: 1, graph_features: true };
        assert!(assemble::<f64>(&g, vec![0.0; 6], None).is_err());
        assert_eq!(assemble::<f64>(&g, vec![0.0; 6], Some([1.0; 4])).unwrap().len(), 10);
    }

    #[test]
    fn standardizer_hand_values() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 7.0], vec![3.0, 7.0]];
        let s = Standardizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
        let mut a = rows[0].clone();
        let mut b = rows[1].clone();
        s.apply(&mut a);
        s.apply(&mut b);
        assert_eq!((a[0], b[0]), (-1.0, 1.0));
        assert_eq!((a[1], b[1]), (0.0, 0.0));
        let mut other = vec![100.0, 8.0];
        s.apply(&mut other);
        assert_eq!(other[1], 0.0, "constant dims map to zero for every vector");
        assert!(Standardizer::<f64>::fit(std::iter::empty()).is_err());
    }

    proptest! {
        #[test]
        fn standardized_fit_set_has_zero_mean_and_round_trips(
            rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 4), 2..40)
        ) {
            let s = Standardizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
            let mut z = rows.clone();
            for r in &mut z { s.apply(r); }
            for k in 0..4 {
                let mean: f64 = z.iter().map(|r| r[k]).sum::<f64>() / z.len() as f64;
                prop_assert!(mean.abs() < 1e-9);
            }
            for (orig, zr) in rows.iter().zip(&z) {
                let mut back = zr.clone();
                s.invert(&mut back);
                for k in 0..4 {
                    if s.std[k] >= s.epsilon {
                        prop_assert!((back[k] - orig[k]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    /// Three users, four items with hand-built tags.
    pub(crate) fn toy_context() -> (FeatureContext, BTreeMap<UserId, Vec<Interaction>>) {
        let mk = |id: u64, title: &str, cats: &[&str], tags: &[&str]| {
            (
                ItemId(id),
                ItemMeta {
                    item: ItemId(id),
                    title: title.into(),
                    categories: cats.iter().map(|s| s.to_string()).collect(),
                    tags: tags.iter().map(|s| s.to_string()).collect(),
                },
            )
        };
        let items: BTreeMap<ItemId, ItemMeta> = [
            mk(1, "Space Wars", &["SciFi"], &["space", "robots"]),
            mk(2, "Robot Dawn", &["SciFi", "Drama"], &["robots", "space", "dystopia"]),
            mk(3, "Quiet Farm", &["Drama"], &["rural"]),
            mk(4, "Space Farm", &["Comedy"], &["space", "rural"]),
        ]
        .into_iter()
        .collect();
        let ix = |u: u64, i: u64, f: f64, t: i64| Interaction { user: UserId(u), item: ItemId(i), feedback: f, timestamp: t };
        let log = vec![
            ix(1, 1, 5.0, 100),
            ix(1, 3, 2.0, 200),
            ix(2, 1, 4.0, 100),
            ix(2, 2, 5.0, 150),
            ix(3, 3, 4.5, 120),
            ix(3, 2, 3.0, 130),
            ix(3, 4, 4.0, 140),
        ];
        let predicate = PositivePredicate::EXPLICIT_DEFAULT;
        let graph = build_graph(&items, 1);
        let space = CategorySpace::from_graph(&graph);
        let docs: BTreeMap<ItemId, String> = items.iter().map(|(k, m)| (*k, item_document(m, 10))).collect();
        let text_index = build_text_index(&docs);
        let feedback = FeedbackTable::from_interactions(&log, predicate);
        let mut by_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
        for i in &log {
            by_user.entry(i.user).or_default().push(*i);
        }
        let profiles: BTreeMap<UserId, Vec<f64>> = by_user
            .iter()
            .map(|(u, l)| {
                let pos: Vec<_> = l.iter().filter(|i| predicate.is_positive(i.feedback)).copied().collect();
                (*u, build_profile(*u, &pos, None, 10, &items, &space, &graph).category_distribution)
            })
            .collect();
        let similarity = SimilarityIndex::build(&profiles, 2);
        let mut popularity = HashMap::new();
        for i in &log {
            *popularity.entry(i.item).or_insert(0u64) += 1;
        }
        let ctx = FeatureContext::new(true, space, graph, text_index, items, docs, popularity, feedback, similarity, 10);
        (ctx, by_user)
    }

    #[test]
    fn graph_block_matches_hand_computation() {
        let (ctx, by_user) = toy_context();
        let predicate = PositivePredicate::EXPLICIT_DEFAULT;
        let u1 = &by_user[&UserId(1)];
        let positives: Vec<_> = u1.iter().filter(|i| predicate.is_positive(i.feedback)).copied().collect();
        let state = ctx.state(UserId(1), 1_000, &positives, u1);
        let cand = ItemId(2);
        let v: Vec<f64> = ctx.features(&state, cand).unwrap();
        let g = &v[v.len() - 4..];

        // text: the history document is item 1's document alone
        let hand_text = crate::graph::text_similarity(&ctx.text_index, &ctx.item_documents[&ItemId(1)], cand).unwrap();
        assert!((g[0] - hand_text).abs() < 1e-12);

        // community of user 1 from the brute-force route
        let community: &Community = ctx.similarity.community(UserId(1)).unwrap();
        let direct = community_signals(community, cand, &ctx.feedback, &ctx.graph, &[ItemId(1)]);
        assert!((g[1] - direct.support).abs() < 1e-12);
        assert!((g[3] - direct.avg_feedback).abs() < 1e-12);
        // item 1 {space, robots} and item 2 {robots, space, dystopia}
        assert_eq!(g[2], 2.0);
        assert_eq!(shared_concepts(&ctx.graph, &[ItemId(1)], cand), 2);

        // user 1 profile is pure SciFi; user 2 likes SciFi and SciFi/Drama,
        // user 3 likes Drama (item 3) and Comedy (item 4)
        assert_eq!(community.members[0].0, UserId(2));
        // user 2 positively rated item 2, user 3 rated it 3.0 (not positive)
        let s2 = community.members[0].1;
        let s3 = community.members[1].1;
        assert!((g[1] - 0.5).abs() < 1e-12);
        assert!((g[3] - (s2 * 5.0 + s3 * 3.0) / (s2 + s3)).abs() < 1e-12);
    }

    #[test]
    fn no_tags_means_shared_concepts_are_zero() {
        let (ctx, by_user) = toy_context();
        let mut items = ctx.items.clone();
        for m in items.values_mut() {
            m.tags.clear();
        }
        let graph = build_graph(&items, 1);
        let mut ctx2 = ctx.clone();
        ctx2.graph = graph;
        for (u, log) in &by_user {
            let state = ctx2.state(*u, 1_000, log, log);
            for c in ctx2.items.keys() {
                let v: Vec<f64> = ctx2.features(&state, *c).unwrap();
                assert_eq!(v[v.len() - 2], 0.0);
            }
        }
    }

    #[test]
    fn disabling_graph_features_drops_exactly_the_last_four() {
        let (ctx, by_user) = toy_context();
        let off = ctx.with_graph_features(false);
        let log = &by_user[&UserId(3)];
        let s_on = ctx.state(UserId(3), 135, log, log);
        let s_off = off.state(UserId(3), 135, log, log);
        for c in ctx.items.keys() {
            let a: Vec<f64> = ctx.features(&s_on, *c).unwrap();
            let b: Vec<f64> = off.features(&s_off, *c).unwrap();
            assert_eq!(&a[..a.len() - 4], b.as_slice());
            assert!(a.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn future_interactions_do_not_change_features() {
        let (ctx, by_user) = toy_context();
        let log = by_user[&UserId(3)].clone();
        let as_of = 135;
        let before = ctx.state(UserId(3), as_of, &log, &log);
        let mut perturbed = log.clone();
        perturbed.push(Interaction { user: UserId(3), item: ItemId(1), feedback: 5.0, timestamp: 135 });
        perturbed.push(Interaction { user: UserId(3), item: ItemId(2), feedback: 1.0, timestamp: 9_999 });
        perturbed.sort_by_key(|i| i.timestamp);
        let after = ctx.state(UserId(3), as_of, &perturbed, &perturbed);
        for c in ctx.items.keys() {
            let a: Vec<f64> = ctx.features(&before, *c).unwrap();
            let b: Vec<f64> = ctx.features(&after, *c).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn same_inputs_give_identical_vectors_in_f32_and_f64() {
        let (ctx, by_user) = toy_context();
        let log = &by_user[&UserId(2)];
        let s = ctx.state(UserId(2), 10_000, log, log);
        let a: FeatureMatrix<f64> = ctx.matrix(&s, &[ItemId(3), ItemId(4)]).unwrap();
        let b: FeatureMatrix<f64> = ctx.matrix(&s, &[ItemId(3), ItemId(4)]).unwrap();
        assert_eq!(a, b);
        let c: FeatureMatrix<f32> = ctx.matrix(&s, &[ItemId(3), ItemId(4)]).unwrap();
        for (x, y) in a.data.iter().zip(&c.data) {
            assert!((*x as f32 - y).abs() < 1e-6);
        }
    }

    #[test]
    fn batched_matrix_equals_per_candidate_rows() {
        let (ctx, by_user) = toy_context();
        let off = ctx.with_graph_features(false);
        let candidates: Vec<ItemId> = ctx.items.keys().copied().collect();
        for c in [&ctx, &off] {
            for (u, log) in &by_user {
                for as_of in [0, 125, 10_000] {
                    let s = c.state(*u, as_of, log, log);
                    let m: FeatureMatrix<f64> = c.matrix(&s, &candidates).unwrap();
                    for (row, cand) in m.iter().zip(&candidates) {
                        let v: Vec<f64> = c.features(&s, *cand).unwrap();
                        assert_eq!(row, v.as_slice());
                    }
                }
            }
        }
    }
}
