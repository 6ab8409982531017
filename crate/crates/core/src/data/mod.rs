//! Interaction logs, activity filtering, leave-last-two-out splits and
//! seeded candidate sets.

mod candidates;
mod filter;
mod load;
mod split;
mod synthetic;
mod types;

pub use candidates::{sample_candidates, sample_from_pool, CandidateSet, Catalog};
pub use filter::{filter_dataset, FilterConfig, FilterMode, FilterStats, FilteredDataset};
pub use load::{load_interactions, ColumnarSource, DatasetSource, ItemFileSpec, MovieLensSource, TimestampUnit};
pub use synthetic::{write_synthetic_movielens, SyntheticSpec, SYNTHETIC_CATEGORIES};
pub use split::{split_leave_last_two, Split, UserSplit};
pub use types::{Interaction, ItemId, ItemMeta, PositivePredicate, RawDataset, UserId};
