use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::hetero::normalize_tag;
use crate::data::{ItemId, ItemMeta};
use crate::error::{Error, Result};

/// Lowercased alphanumeric runs of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1)
        .map(str::to_lowercase)
        .collect()
}

/// Title, every category label and the `top_tags` most frequent tags,
/// tokenized and joined with single spaces.
pub fn item_document(item: &ItemMeta, top_tags: usize) -> String {
    let mut tokens = tokenize(&item.title);
    for c in &item.categories {
        tokens.extend(tokenize(c));
    }
    for tag in ranked_tags(item, top_tags) {
        tokens.extend(tokenize(&tag));
    }
    tokens.join(" ")
}

/// The item's `n` most applied normalized tags, ties by tag.
pub fn ranked_tags(item: &ItemMeta, n: usize) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in &item.tags {
        let t = normalize_tag(t);
        if !t.is_empty() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // count descending, then tag ascending (BTreeMap order, stable sort)
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.into_iter().take(n).map(|(t, _)| t).collect()
}

/// Sparse vector with strictly increasing term indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector(pub Vec<(u32, f64)>);

impl SparseVector {
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|(_, v)| *v == 0.0)
    }
}

/// Smoothed TF-IDF: `tf` is the raw count, `idf = ln((1 + N) / (1 + df)) + 1`,
/// and every stored vector is L2-normalized.
#[derive(Clone, Debug, Default)]
pub struct TextIndex {
    pub vocabulary: BTreeMap<String, u32>,
    pub idf: Vec<f64>,
    pub doc_vectors: BTreeMap<ItemId, SparseVector>,
}

pub fn build_text_index(documents: &BTreeMap<ItemId, String>) -> TextIndex {
    let tokenized: Vec<(ItemId, Vec<String>)> = documents
        .iter()
        .map(|(id, d)| (*id, tokenize(d)))
        .collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, toks) in &tokenized {
        let mut seen: Vec<&str> = toks.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = tokenized.len() as f64;
    let vocabulary: BTreeMap<String, u32> = df
        .keys()
        .enumerate()
        .map(|(k, t)| (t.to_string(), k as u32))
        .collect();
    let idf: Vec<f64> = df
        .values()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let mut index = TextIndex {
        vocabulary,
        idf,
        doc_vectors: BTreeMap::new(),
    };
    for (id, toks) in &tokenized {
        let v = index.vectorize_tokens(toks);
        index.doc_vectors.insert(*id, v);
    }
    index
}

impl TextIndex {
    /// TF-IDF vector of arbitrary text using this index's vocabulary; unseen
    /// terms are ignored.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.vectorize_tokens(&tokenize(text))
    }

    fn vectorize_tokens(&self, tokens: &[String]) -> SparseVector {
        let mut tf: HashMap<u32, f64> = HashMap::new();
        for t in tokens {
            if let Some(&k) = self.vocabulary.get(t) {
                *tf.entry(k).or_default() += 1.0;
            }
        }
        let mut v: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(k, c)| (k, c * self.idf[k as usize]))
            .collect();
        v.sort_unstable_by_key(|e| e.0);
        let mut v = SparseVector(v);
        let norm = v.norm();
        if norm > 0.0 {
            for e in &mut v.0 {
                e.1 /= norm;
            }
        }
        v
    }

    pub fn vector(&self, item: ItemId) -> Result<&SparseVector> {
        self.doc_vectors.get(&item).ok_or(Error::UnknownItem(item.0))
    }

    /// Cosine between a pre-vectorized query and an indexed item.
    pub fn similarity(&self, query: &SparseVector, item: ItemId) -> Result<f64> {
        let doc = self.vector(item)?;
        if query.is_zero() || doc.is_zero() {
            return Ok(0.0);
        }
        Ok(query.dot(doc) / (query.norm() * doc.norm()))
    }
}

pub fn text_similarity(index: &TextIndex, query_doc: &str, item: ItemId) -> Result<f64> {
    index.similarity(&index.vectorize(query_doc), item)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn docs(texts: &[&str]) -> BTreeMap<ItemId, String> {
        texts
            .iter()
            .enumerate()
            .map(|(k, t)| (ItemId(k as u64 + 1), t.to_string()))
            .collect()
    }

    #[test]
    fn tokenizer_drops_single_characters() {
        assert_eq!(tokenize("Heat (1995) a B-movie"), vec!["heat", "1995", "movie"]);
    }

    #[test]
    fn heat_document() {
        let item = ItemMeta {
            item: ItemId(6),
            title: "Heat".into(),
            categories: ["Action", "Crime"].iter().map(|s| s.to_string()).collect(),
            tags: vec!["heist".into(), "Heist ".into(), "heist".into(), "pacino".into()],
        };
        let toks: BTreeSet<String> = tokenize(&item_document(&item, 1)).into_iter().collect();
        let want: BTreeSet<String> = ["heat", "action", "crime", "heist"].iter().map(|s| s.to_string()).collect();
        assert_eq!(toks, want);
        assert_eq!(item_document(&item, 0), "heat action crime");
        assert_eq!(item_document(&ItemMeta::empty(ItemId(1)), 10), "");
    }

    #[test]
    fn identical_and_disjoint_documents() {
        let idx = build_text_index(&docs(&["alpha beta", "alpha beta", "gamma delta"]));
        let v1 = idx.vector(ItemId(1)).unwrap();
        assert!((idx.similarity(v1, ItemId(2)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(idx.similarity(v1, ItemId(3)).unwrap(), 0.0);
        for v in idx.doc_vectors.values() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(idx.idf.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn three_document_corpus_matches_hand_values() {
        // corpus {"aa bb", "aa cc", "cc cc"}; N = 3, df(aa) = 2, df(bb) = 1, df(cc) = 2
        let idx = build_text_index(&docs(&["aa bb", "aa cc", "cc cc"]));
        let idf_aa = (4.0f64 / 3.0).ln() + 1.0;
        let idf_bb = (4.0f64 / 2.0).ln() + 1.0;
        let idf_cc = idf_aa;
        let d1 = [idf_aa, idf_bb, 0.0];
        let d2 = [idf_aa, 0.0, idf_cc];
        let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let hand = (d1[0] * d2[0]) / (norm(&d1) * norm(&d2));
        let got = idx.similarity(idx.vector(ItemId(1)).unwrap(), ItemId(2)).unwrap();
        assert!((got - hand).abs() < 1e-12, "{got} vs {hand}");

        let hand_query = idf_aa / norm(&d1);
        let q = text_similarity(&idx, "aa", ItemId(1)).unwrap();
        assert!((q - hand_query).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_and_empty_query() {
        let d = docs(&["toy story animation", "heat crime action"]);
        let idx = build_text_index(&d);
        assert!((text_similarity(&idx, &d[&ItemId(1)], ItemId(1)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(text_similarity(&idx, "", ItemId(1)).unwrap(), 0.0);
        assert!(matches!(text_similarity(&idx, "x", ItemId(9)), Err(Error::UnknownItem(9))));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded() {
        let idx = build_text_index(&docs(&["aa bb cc", "bb cc dd dd", "ee aa", "ff"]));
        for a in 1..=4 {
            for b in 1..=4 {
                let va = idx.vector(ItemId(a)).unwrap();
                let vb = idx.vector(ItemId(b)).unwrap();
                let ab = idx.similarity(va, ItemId(b)).unwrap();
                let ba = idx.similarity(vb, ItemId(a)).unwrap();
                assert!((ab - ba).abs() < 1e-12);
                assert!((0.0..=1.0 + 1e-12).contains(&ab));
            }
        }
    }
}
