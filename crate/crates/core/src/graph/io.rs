//! Line-oriented graph format.
//!
//! ```text
//! graphrag-irl-graph	1
//! node	item	<item id>
//! node	category	<label>
//! node	concept	<label>
//! edge	item-category	<item id>	<label>
//! edge	item-concept	<item id>	<label>
//! edge	item-item	<item id>	<item id>
//! ```
//!
//! Fields are tab-separated; `\`, tab and newline inside labels are escaped
//! as `\\`, `\t` and `\n`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::hetero::HeteroGraph;
use crate::data::ItemId;
use crate::error::{Error, Result};

const MAGIC: &str = "graphrag-irl-graph";
const VERSION: u32 = 1;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn write_graph<W: Write>(graph: &HeteroGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}\t{VERSION}")?;
    for i in &graph.items {
        writeln!(out, "node\titem\t{i}")?;
    }
    for c in &graph.categories {
        writeln!(out, "node\tcategory\t{}", escape(c))?;
    }
    for c in &graph.concepts {
        writeln!(out, "node\tconcept\t{}", escape(c))?;
    }
    for (i, c) in &graph.item_category {
        writeln!(out, "edge\titem-category\t{i}\t{}", escape(c))?;
    }
    for (i, c) in &graph.item_concept {
        writeln!(out, "edge\titem-concept\t{i}\t{}", escape(c))?;
    }
    for (a, b) in &graph.item_item {
        writeln!(out, "edge\titem-item\t{a}\t{b}")?;
    }
    Ok(())
}

pub fn read_graph<R: BufRead>(input: R) -> Result<HeteroGraph> {
    let mut items = BTreeSet::new();
    let mut categories = BTreeSet::new();
    let mut concepts = BTreeSet::new();
    let mut item_category = BTreeSet::new();
    let mut item_concept = BTreeSet::new();
    let mut item_item = BTreeSet::new();

    let bad = |line: usize, msg: &str| Error::Format(format!("graph line {line}: {msg}"));
    let item_id = |line: usize, s: &str| {
        s.parse::<u64>()
            .map(ItemId)
            .map_err(|_| bad(line, &format!("bad item id {s:?}")))
    };

    let mut saw_header = false;
    for (k, line) in input.lines().enumerate() {
        let n = k + 1;
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if f.len() != 2 || f[0] != MAGIC || f[1] != VERSION.to_string() {
                return Err(bad(n, "missing or unsupported header"));
            }
            saw_header = true;
            continue;
        }
        match f.as_slice() {
            ["node", "item", id] => {
                items.insert(item_id(n, id)?);
            }
            ["node", "category", c] => {
                categories.insert(unescape(c));
            }
            ["node", "concept", c] => {
                concepts.insert(unescape(c));
            }
            ["edge", "item-category", i, c] => {
                item_category.insert((item_id(n, i)?, unescape(c)));
            }
            ["edge", "item-concept", i, c] => {
                item_concept.insert((item_id(n, i)?, unescape(c)));
            }
            ["edge", "item-item", a, b] => {
                let (a, b) = (item_id(n, a)?, item_id(n, b)?);
                item_item.insert(if a < b { (a, b) } else { (b, a) });
            }
            _ => return Err(bad(n, "unrecognized record")),
        }
    }
    if !saw_header {
        return Err(bad(0, "empty input"));
    }
    for (i, c) in &item_category {
        if !items.contains(i) || !categories.contains(c) {
            return Err(Error::Format(format!("edge ({i}, {c}) has a missing endpoint")));
        }
    }
    for (i, c) in &item_concept {
        if !items.contains(i) || !concepts.contains(c) {
            return Err(Error::Format(format!("edge ({i}, {c}) has a missing endpoint")));
        }
    }
    for (a, b) in &item_item {
        if !items.contains(a) || !items.contains(b) {
            return Err(Error::Format(format!("edge ({a}, {b}) has a missing endpoint")));
        }
    }
    Ok(HeteroGraph::from_parts(
        items,
        categories,
        concepts,
        item_category,
        item_concept,
        item_item,
    ))
}
