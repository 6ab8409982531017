//! Offline evaluation: baselines, metric reports and ablation summaries.

pub mod baselines;
pub mod logistic;
pub mod report;

pub use crate::metrics::{hit_at, ndcg_at, reciprocal_rank, RankMetrics};
pub use baselines::{baseline_popularity, baseline_random};
pub use logistic::{fit_logistic, logistic_loss_gradient, LogisticConfig, LogisticFit};
pub use report::{
    evaluate, relative_delta, render_ablation, render_table, AblationRow, MetricsReport, RankResult, Superadditivity,
};
