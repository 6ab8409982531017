use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, ItemMeta};

/// Lowercase, trim and collapse internal whitespace. No stemming.
pub fn normalize_tag(tag: &str) -> String {
    tag.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Heterogeneous graph over items, categories and tag concepts.
///
/// The edge sets are the canonical data; `concept_ids` and `item_concepts`
/// are lookup tables derived from them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeteroGraph {
    pub items: BTreeSet<ItemId>,
    pub categories: BTreeSet<String>,
    pub concepts: BTreeSet<String>,
    pub item_category: BTreeSet<(ItemId, String)>,
    pub item_concept: BTreeSet<(ItemId, String)>,
    /// Unordered pairs stored as `(low, high)`.
    pub item_item: BTreeSet<(ItemId, ItemId)>,
    concept_ids: BTreeMap<String, u32>,
    item_concepts: HashMap<ItemId, Vec<u32>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub item_nodes: usize,
    pub category_nodes: usize,
    pub concept_nodes: usize,
    pub nodes: usize,
    pub item_category_edges: usize,
    pub item_concept_edges: usize,
    pub item_item_edges: usize,
    pub edges: usize,
}

impl HeteroGraph {
    pub(crate) fn from_parts(
        items: BTreeSet<ItemId>,
        categories: BTreeSet<String>,
        concepts: BTreeSet<String>,
        item_category: BTreeSet<(ItemId, String)>,
        item_concept: BTreeSet<(ItemId, String)>,
        item_item: BTreeSet<(ItemId, ItemId)>,
    ) -> Self {
        let concept_ids: BTreeMap<String, u32> = concepts
            .iter()
            .enumerate()
            .map(|(k, c)| (c.clone(), k as u32))
            .collect();
        let mut item_concepts: HashMap<ItemId, Vec<u32>> = HashMap::new();
        for (item, c) in &item_concept {
            item_concepts.entry(*item).or_default().push(concept_ids[c]);
        }
        for v in item_concepts.values_mut() {
            v.sort_unstable();
        }
        HeteroGraph {
            items,
            categories,
            concepts,
            item_category,
            item_concept,
            item_item,
            concept_ids,
            item_concepts,
        }
    }

    pub fn stats(&self) -> GraphStats {
        let (i, g, c) = (self.items.len(), self.categories.len(), self.concepts.len());
        let (ig, ic, ii) = (
            self.item_category.len(),
            self.item_concept.len(),
            self.item_item.len(),
        );
        GraphStats {
            item_nodes: i,
            category_nodes: g,
            concept_nodes: c,
            nodes: i + g + c,
            item_category_edges: ig,
            item_concept_edges: ic,
            item_item_edges: ii,
            edges: ig + ic + ii,
        }
    }

    /// Sorted concept ids attached to `item` (empty for unknown items).
    pub fn concepts_of(&self, item: ItemId) -> &[u32] {
        self.item_concepts.get(&item).map_or(&[], Vec::as_slice)
    }

    pub fn concept_id(&self, concept: &str) -> Option<u32> {
        self.concept_ids.get(concept).copied()
    }

    pub fn concept_name(&self, id: u32) -> Option<&str> {
        self.concepts.iter().nth(id as usize).map(String::as_str)
    }

    /// Category labels in the fixed order used for feature vectors.
    pub fn category_labels(&self) -> Vec<String> {
        self.categories.iter().cloned().collect()
    }
}

/// Builds the graph over `items`. Concepts are normalized tags whose number
/// of applications across `items` is at least `min_concept_freq`; two items
/// are linked when they share at least two concepts.
pub fn build_graph(items: &BTreeMap<ItemId, ItemMeta>, min_concept_freq: usize) -> HeteroGraph {
    let min_concept_freq = min_concept_freq.max(1);
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for meta in items.values() {
        for t in &meta.tags {
            let t = normalize_tag(t);
            if !t.is_empty() {
                *freq.entry(t).or_default() += 1;
            }
        }
    }
    let concepts: BTreeSet<String> = freq
        .into_iter()
        .filter(|(_, n)| *n >= min_concept_freq)
        .map(|(t, _)| t)
        .collect();

    let mut categories = BTreeSet::new();
    let mut item_category = BTreeSet::new();
    let mut item_concept = BTreeSet::new();
    for (id, meta) in items {
        for c in &meta.categories {
            categories.insert(c.clone());
            item_category.insert((*id, c.clone()));
        }
        for t in &meta.tags {
            let t = normalize_tag(t);
            if concepts.contains(&t) {
                item_concept.insert((*id, t));
            }
        }
    }

    let mut members: BTreeMap<&str, Vec<ItemId>> = BTreeMap::new();
    for (item, c) in &item_concept {
        members.entry(c.as_str()).or_default().push(*item);
    }
    let mut shared: HashMap<(ItemId, ItemId), u32> = HashMap::new();
    for list in members.values() {
        for (k, a) in list.iter().enumerate() {
            for b in &list[k + 1..] {
                let key = if a < b { (*a, *b) } else { (*b, *a) };
                *shared.entry(key).or_default() += 1;
            }
        }
    }
    let item_item: BTreeSet<(ItemId, ItemId)> = shared
        .into_iter()
        .filter(|(_, n)| *n >= 2)
        .map(|(k, _)| k)
        .collect();

    let graph = HeteroGraph::from_parts(
        items.keys().copied().collect(),
        categories,
        concepts,
        item_category,
        item_concept,
        item_item,
    );
    let s = graph.stats();
    log::info!(
        "graph: {} nodes ({} items, {} categories, {} concepts), {} edges",
        s.nodes,
        s.item_nodes,
        s.category_nodes,
        s.concept_nodes,
        s.edges
    );
    graph
}

/// Graph statistics for each concept-frequency threshold.
pub fn concept_sweep(
    items: &BTreeMap<ItemId, ItemMeta>,
    thresholds: impl IntoIterator<Item = usize>,
) -> Vec<(usize, GraphStats)> {
    thresholds
        .into_iter()
        .map(|t| (t, build_graph(items, t).stats()))
        .collect()
}

/// Number of concepts of `candidate` that also occur on any history item.
pub fn shared_concepts<'a>(
    graph: &HeteroGraph,
    history_items: impl IntoIterator<Item = &'a ItemId>,
    candidate: ItemId,
) -> usize {
    let target = graph.concepts_of(candidate);
    if target.is_empty() {
        return 0;
    }
    let mut seen = vec![false; target.len()];
    for h in history_items {
        for c in graph.concepts_of(*h) {
            if let Ok(k) = target.binary_search(c) {
                seen[k] = true;
            }
        }
    }
    seen.into_iter().filter(|&s| s).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(id: u64, cats: &[&str], tags: &[&str]) -> (ItemId, ItemMeta) {
        (
            ItemId(id),
            ItemMeta {
                item: ItemId(id),
                title: format!("Item {id}"),
                categories: cats.iter().map(|s| s.to_string()).collect(),
                tags: tags.iter().map(|s| s.to_string()).collect(),
            },
        )
    }

    #[test]
    fn no_tags_means_no_concepts_or_item_edges() {
        let items: BTreeMap<_, _> = [item(1, &["A"], &[]), item(2, &["A", "B"], &[])].into_iter().collect();
        let g = build_graph(&items, 1);
        assert!(g.concepts.is_empty());
        assert!(g.item_item.is_empty());
        assert_eq!(g.stats().item_category_edges, 3);
        assert_eq!(g.stats().nodes, 4);
    }

    #[test]
    fn two_shared_concepts_make_an_edge_one_does_not() {
        let items: BTreeMap<_, _> = [
            item(1, &[], &["x", "y", "z"]),
            item(2, &[], &["X ", "y"]),
            item(3, &[], &["z"]),
        ]
        .into_iter()
        .collect();
        let g = build_graph(&items, 1);
        assert_eq!(g.item_item, [(ItemId(1), ItemId(2))].into_iter().collect());
    }

    #[test]
    fn tag_normalization() {
        assert_eq!(normalize_tag("  Dark   Comedy "), "dark comedy");
    }

    #[test]
    fn shared_concept_counts() {
        let items: BTreeMap<_, _> = [
            item(1, &[], &["a1", "b1"]),
            item(2, &[], &["b1", "c1"]),
            item(3, &[], &["a1", "b1", "c1"]),
            item(4, &[], &[]),
        ]
        .into_iter()
        .collect();
        let g = build_graph(&items, 1);
        assert_eq!(shared_concepts(&g, &[ItemId(4)], ItemId(3)), 0);
        assert_eq!(shared_concepts(&g, &[ItemId(1), ItemId(2)], ItemId(3)), 3);
        assert_eq!(shared_concepts(&g, &[] as &[ItemId], ItemId(3)), 0);
    }

    fn brute_force_concepts(items: &BTreeMap<ItemId, ItemMeta>, min: usize) -> BTreeMap<ItemId, BTreeSet<String>> {
        let mut all: Vec<String> = Vec::new();
        for m in items.values() {
            all.extend(m.tags.iter().map(|t| normalize_tag(t)));
        }
        items
            .iter()
            .map(|(id, m)| {
                let set = m
                    .tags
                    .iter()
                    .map(|t| normalize_tag(t))
                    .filter(|t| all.iter().filter(|a| *a == t).count() >= min)
                    .collect();
                (*id, set)
            })
            .collect()
    }

    fn arb_items(max_items: usize) -> impl Strategy<Value = BTreeMap<ItemId, ItemMeta>> {
        proptest::collection::vec(
            (proptest::collection::vec(0u8..12, 0..6), proptest::collection::vec(0u8..4, 0..3)),
            1..max_items,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(k, (tags, cats))| {
                    let id = ItemId(k as u64);
                    (
                        id,
                        ItemMeta {
                            item: id,
                            title: String::new(),
                            categories: cats.iter().map(|c| format!("g{c}")).collect(),
                            tags: tags.iter().map(|t| format!("Tag{t}")).collect(),
                        },
                    )
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn item_edges_match_pairwise_brute_force(items in arb_items(200), min in 1usize..4) {
            let g = build_graph(&items, min);
            let concepts = brute_force_concepts(&items, min);
            let ids: Vec<ItemId> = items.keys().copied().collect();
            let mut expected = BTreeSet::new();
            for (k, a) in ids.iter().enumerate() {
                for b in &ids[k + 1..] {
                    if concepts[a].intersection(&concepts[b]).count() >= 2 {
                        expected.insert((*a, *b));
                    }
                }
            }
            prop_assert_eq!(&g.item_item, &expected);
            for (item, c) in &g.item_concept {
                prop_assert!(g.items.contains(item) && g.concepts.contains(c));
            }
            for (item, c) in &g.item_category {
                prop_assert!(g.items.contains(item) && g.categories.contains(c));
            }
        }

        #[test]
        fn shared_concepts_match_set_intersection(items in arb_items(12), hist_mask in any::<u16>(), cand in 0usize..12) {
            let g = build_graph(&items, 1);
            let ids: Vec<ItemId> = items.keys().copied().collect();
            let cand = ids[cand % ids.len()];
            let history: Vec<ItemId> = ids.iter().enumerate()
                .filter(|(k, _)| hist_mask & (1 << k) != 0).map(|(_, i)| *i).collect();
            let concepts = brute_force_concepts(&items, 1);
            let union: BTreeSet<String> = history.iter().flat_map(|h| concepts[h].iter().cloned()).collect();
            let expected = union.intersection(&concepts[&cand]).count();
            prop_assert_eq!(shared_concepts(&g, &history, cand), expected);
            prop_assert!(expected <= g.concepts_of(cand).len());
        }

        #[test]
        fn raising_threshold_never_adds_concepts_or_edges(items in arb_items(60), min in 1usize..4) {
            let lo = build_graph(&items, min).stats();
            let hi = build_graph(&items, min + 1).stats();
            prop_assert!(hi.concept_nodes <= lo.concept_nodes);
            prop_assert!(hi.item_item_edges <= lo.item_item_edges);
        }
    }
}
