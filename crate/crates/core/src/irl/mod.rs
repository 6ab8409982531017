//! Reward learning from expert choices over candidate sets.

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod optim;
pub mod shortlist;
pub mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use gradcheck::{check_gradient, relative_error, GradCheck};
pub use loss::{
    listwise_loss, listwise_terms, loss_gradient, objective_gradient, objective_loss, pointwise_terms, policy,
    Objective, Transition,
};
pub use model::{Architecture, RewardModel};
pub use optim::{Optimizer, OptimizerKind};
pub use shortlist::{order_by_score, rank_of, shortlist, Confidence, ScoredShortlist, ShortlistEntry};
pub use train::{fit_standardizer, train, validation_metrics, EpochRecord, TrainConfig, TrainingLog, TransitionSource};
