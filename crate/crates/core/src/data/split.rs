use std::collections::BTreeMap;

use super::filter::FilteredDataset;
use super::types::{Interaction, UserId};

#[derive(Clone, Debug, PartialEq)]
pub struct UserSplit {
    /// All positives except the last two, chronological.
    pub train: Vec<Interaction>,
    pub validation: Interaction,
    pub test: Interaction,
}

impl UserSplit {
    /// Interactions of this user strictly before the validation positive
    /// (plus the training positives themselves) make up the training period.
    pub fn training_cutoff(&self) -> i64 {
        self.validation.timestamp
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub users: BTreeMap<UserId, UserSplit>,
    /// Users with fewer than three positives.
    pub excluded: Vec<UserId>,
}

/// Time-based leave-last-two-out split of every positive trajectory.
pub fn split_leave_last_two(dataset: &FilteredDataset) -> Split {
    let mut split = Split::default();
    for (&user, trajectory) in &dataset.trajectories {
        let n = trajectory.len();
        if n < 3 {
            split.excluded.push(user);
            continue;
        }
        split.users.insert(
            user,
            UserSplit {
                train: trajectory[..n - 2].to_vec(),
                validation: trajectory[n - 2],
                test: trajectory[n - 1],
            },
        );
    }
    if !split.excluded.is_empty() {
        log::info!("{} users with fewer than 3 positives excluded from the split", split.excluded.len());
    }
    split
}
