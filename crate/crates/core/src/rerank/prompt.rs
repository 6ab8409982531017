//! Listwise re-ranking prompts.
//!
//! Candidates are shown in reward order under short indices `[1]..[N]`; the
//! mapping back to catalog ids stays in [`PersonaPrompt::items`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::PromptMode;
use crate::data::{ItemId, ItemMeta, UserId};
use crate::error::{Error, Result};
use crate::graph::ranked_tags;
use crate::irl::ScoredShortlist;
use crate::retrieval::{CategorySpace, UserProfile};
use crate::seed::sha256_hex;

/// Categories listed in the persona.
pub const PERSONA_CATEGORIES: usize = 5;
/// Tags listed per candidate.
pub const CANDIDATE_TAGS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct PersonaPrompt {
    pub user: UserId,
    /// Shortlist in reward order; index `k` is shown as `[k + 1]`.
    pub items: Vec<ItemId>,
    pub text: String,
}

impl PersonaPrompt {
    pub fn hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }
}

/// Per-request inputs besides the shortlist itself.
pub struct PromptInputs<'a> {
    pub mode: PromptMode,
    pub profile: &'a UserProfile,
    pub space: &'a CategorySpace,
    pub items: &'a BTreeMap<ItemId, ItemMeta>,
    /// Fraction of the user's community that liked each shortlist item,
    /// aligned with the shortlist entries.
    pub support: &'a [f64],
}

fn title(items: &BTreeMap<ItemId, ItemMeta>, item: ItemId) -> &str {
    items.get(&item).map_or("(unknown title)", |m| m.title.as_str())
}

pub fn build_prompt(inputs: &PromptInputs<'_>, shortlist: &ScoredShortlist) -> Result<PersonaPrompt> {
    if shortlist.is_empty() {
        return Err(Error::Empty("shortlist"));
    }
    if inputs.support.len() != shortlist.len() {
        return Err(Error::Dimension {
            expected: shortlist.len(),
            actual: inputs.support.len(),
        });
    }
    let n = shortlist.len();
    let persona = inputs.mode == PromptMode::Persona;
    let mut s = String::new();

    let _ = writeln!(s, "You are a recommendation assistant. Rank {n} candidate items for one user.");
    if persona {
        let _ = writeln!(s, "\n## User persona");
        if inputs.profile.is_cold() {
            let _ = writeln!(s, "The user has no history.");
        } else {
            let mut prefs: Vec<(usize, f64)> = inputs
                .profile
                .category_distribution
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, p)| *p > 0.0)
                .collect();
            prefs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let listed: Vec<String> = prefs
                .iter()
                .take(PERSONA_CATEGORIES)
                .map(|&(k, p)| format!("{} {p:.2}", inputs.space.labels()[k]))
                .collect();
            let _ = writeln!(s, "Preferred categories: {}", listed.join(", "));
            let recent: Vec<&str> = inputs
                .profile
                .positive_history
                .iter()
                .rev()
                .map(|i| title(inputs.items, i.item))
                .collect();
            let _ = writeln!(s, "Recently enjoyed (newest first): {}", recent.join("; "));
        }

        let _ = writeln!(s, "\n## Community context");
        let _ = writeln!(s, "Share of similar users who liked each candidate:");
        for (k, support) in inputs.support.iter().enumerate() {
            let _ = writeln!(s, "[{}] {support:.2}", k + 1);
        }
    }

    let _ = writeln!(s, "\n## Candidates");
    for (k, e) in shortlist.entries.iter().enumerate() {
        let meta = inputs.items.get(&e.item);
        let cats = meta.map_or_else(String::new, |m| m.categories.iter().cloned().collect::<Vec<_>>().join(", "));
        let tags = meta.map_or_else(Vec::new, |m| ranked_tags(m, CANDIDATE_TAGS)).join(", ");
        let _ = write!(s, "[{}] {} | categories: {}", k + 1, title(inputs.items, e.item), cats);
        if !tags.is_empty() {
            let _ = write!(s, " | tags: {tags}");
        }
        s.push('\n');
    }

    if persona {
        let _ = writeln!(s, "\n## Model confidence");
        for (k, e) in shortlist.entries.iter().enumerate() {
            let _ = writeln!(s, "[{}] {}", k + 1, e.confidence.label());
        }
    }

    let _ = writeln!(s, "\n## Task");
    let _ = writeln!(
        s,
        "Order all {n} candidates from most to least likely to be enjoyed next. \
         Answer with the bracket numbers only, comma-separated, each of 1..{n} exactly once."
    );

    Ok(PersonaPrompt {
        user: inputs.profile.user,
        items: shortlist.items(),
        text: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;
    use std::collections::BTreeSet;

    fn catalog() -> BTreeMap<ItemId, ItemMeta> {
        (1..=20u64)
            .map(|i| {
                let cats: BTreeSet<String> = [["Drama", "Comedy", "Action"][i as usize % 3].to_string()].into();
                (
                    ItemId(i),
                    ItemMeta {
                        item: ItemId(i),
                        title: format!("Film {i}"),
                        categories: cats,
                        tags: vec!["slow burn".into(), "Slow Burn".into(), "twist".into()],
                    },
                )
            })
            .collect()
    }

    fn profile(cold: bool) -> UserProfile {
        let history: Vec<Interaction> = if cold {
            vec![]
        } else {
            vec![
                Interaction { user: UserId(7), item: ItemId(3), feedback: 5.0, timestamp: 1 },
                Interaction { user: UserId(7), item: ItemId(4), feedback: 4.0, timestamp: 2 },
            ]
        };
        UserProfile {
            user: UserId(7),
            category_distribution: if cold { vec![0.0; 3] } else { vec![0.5, 0.0, 0.5] },
            history_len: history.len(),
            positive_history: history,
            concept_affinity: BTreeMap::new(),
        }
    }

    fn shortlist() -> ScoredShortlist {
        let items: Vec<ItemId> = (1..=30u64).map(ItemId).collect();
        let scores: Vec<f64> = (1..=30).map(|k| -(k as f64)).collect();
        ScoredShortlist::from_scores(&items, &scores, 20)
    }

    fn build(mode: PromptMode, cold: bool) -> PersonaPrompt {
        let space = CategorySpace::new(["Action".to_string(), "Comedy".into(), "Drama".into()]);
        let items = catalog();
        let p = profile(cold);
        let support = vec![0.25; 20];
        let inputs = PromptInputs { mode, profile: &p, space: &space, items: &items, support: &support };
        build_prompt(&inputs, &shortlist()).unwrap()
    }

    #[test]
    fn candidate_section_lists_each_item_once() {
        let p = build(PromptMode::Persona, false);
        assert_eq!(p.items.len(), 20);
        let distinct: BTreeSet<_> = p.items.iter().collect();
        assert_eq!(distinct.len(), 20);
        let cands = p.text.split("## Candidates").nth(1).unwrap().split("\n## ").next().unwrap();
        for k in 1..=20 {
            assert_eq!(cands.matches(&format!("[{k}] Film")).count(), 1);
        }
        assert!(p.text.contains("Preferred categories: Action 0.50, Drama 0.50"));
        assert!(p.text.contains("Film 4; Film 3"));
        assert!(p.text.contains("tags: slow burn, twist"));
        assert!(p.text.contains("[1] high") && p.text.contains("[20] low"));
    }

    #[test]
    fn plain_mode_has_no_persona_or_community() {
        let p = build(PromptMode::Plain, false);
        assert!(!p.text.contains("persona"));
        assert!(!p.text.contains("Community"));
        assert!(!p.text.contains("Preferred"));
        assert!(!p.text.contains("confidence"));
        assert!(p.text.contains("[20] Film 20"));
    }

    #[test]
    fn cold_user_says_no_history() {
        assert!(build(PromptMode::Persona, true).text.contains("no history"));
    }

    #[test]
    fn prompt_is_deterministic() {
        assert_eq!(build(PromptMode::Persona, false), build(PromptMode::Persona, false));
        assert_eq!(build(PromptMode::Persona, false).hash(), build(PromptMode::Persona, false).hash());
    }

    #[test]
    fn empty_shortlist_is_rejected() {
        let space = CategorySpace::new(Vec::<String>::new());
        let items = catalog();
        let p = profile(true);
        let inputs = PromptInputs { mode: PromptMode::Persona, profile: &p, space: &space, items: &items, support: &[] };
        let empty = ScoredShortlist { entries: vec![], tail: vec![] };
        assert!(build_prompt(&inputs, &empty).is_err());
    }
}
