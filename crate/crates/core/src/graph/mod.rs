//! Item/category/concept graph with co-occurrence edges, and the TF-IDF
//! index over item documents.

mod hetero;
mod io;
mod text;

pub use hetero::{build_graph, concept_sweep, normalize_tag, shared_concepts, GraphStats, HeteroGraph};
pub use io::{read_graph, write_graph};
pub use text::{build_text_index, item_document, ranked_tags, text_similarity, tokenize, SparseVector, TextIndex};
