//! Per-method metric reports, ablation tables and their text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::irl::rank_of;
use crate::metrics::RankMetrics;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub user: UserId,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub config_hash: String,
    pub users: usize,
    pub metrics: RankMetrics,
    /// Fraction of users whose positive made the shortlist, when one was cut.
    pub shortlist_recall: Option<f64>,
    pub ranks: Vec<RankResult>,
}

/// Scores one ordering per test user against that user's held-out positive.
/// Users are reduced in ascending id order.
pub fn evaluate(
    method: &str,
    config_hash: &str,
    orderings: &BTreeMap<UserId, Vec<ItemId>>,
    positives: &BTreeMap<UserId, ItemId>,
    shortlists: Option<&BTreeMap<UserId, Vec<ItemId>>>,
) -> Result<MetricsReport> {
    let missing: Vec<u64> = positives.keys().filter(|u| !orderings.contains_key(u)).map(|u| u.0).collect();
    if !missing.is_empty() {
        return Err(Error::MissingUsers(missing));
    }
    if positives.is_empty() {
        return Err(Error::Empty("test users"));
    }
    let mut ranks = Vec::with_capacity(positives.len());
    for (user, positive) in positives {
        let rank = rank_of(&orderings[user], *positive).ok_or(Error::ExpertMissing(positive.0))?;
        ranks.push(RankResult { user: *user, rank });
    }
    let shortlist_recall = match shortlists {
        None => None,
        Some(s) => {
            let mut hits = 0usize;
            for (user, positive) in positives {
                let list = s.get(user).ok_or_else(|| Error::MissingUsers(vec![user.0]))?;
                hits += usize::from(list.contains(positive));
            }
            Some(hits as f64 / positives.len() as f64)
        }
    };
    Ok(MetricsReport {
        method: method.into(),
        config_hash: config_hash.into(),
        users: ranks.len(),
        metrics: RankMetrics::mean_of(ranks.iter().map(|r| r.rank)),
        shortlist_recall,
        ranks,
    })
}

/// `(x - reference) / reference`.
pub fn relative_delta(x: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| (x - reference) / reference)
}

impl MetricsReport {
    /// Machine-readable per-user rows followed by the mean row.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# method={} config_hash={}", self.method, self.config_hash);
        let _ = writeln!(s, "user,rank,hr5,ndcg5,hr10,ndcg10,mrr");
        for r in &self.ranks {
            let m = RankMetrics::for_rank(r.rank);
            let _ = writeln!(s, "{},{},{}", r.user, r.rank, fmt_values(&m.values()));
        }
        let _ = writeln!(s, "mean,,{}", fmt_values(&self.metrics.values()));
        if let Some(recall) = self.shortlist_recall {
            let _ = writeln!(s, "# shortlist_recall={recall:.6}");
        }
        s
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("metrics_{}.csv", self.method));
        std::fs::write(&path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
}

/// Aligned text table of several methods with NDCG@10 deltas against `reference`.
pub fn render_table(title: &str, reports: &[MetricsReport], reference: Option<&str>) -> String {
    let ref_ndcg = reference.and_then(|r| reports.iter().find(|m| m.method == r)).map(|m| m.metrics.ndcg10);
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = write!(s, "{:<width$}", "method");
    for n in RankMetrics::NAMES {
        let _ = write!(s, " {n:>8}");
    }
    let _ = writeln!(s, " {:>9} {:>10}", "dN@10", "recall@N");
    for r in reports {
        let _ = write!(s, "{:<width$}", r.method);
        for v in r.metrics.values() {
            let _ = write!(s, " {v:>8.4}");
        }
        let delta = ref_ndcg
            .and_then(|base| relative_delta(r.metrics.ndcg10, base))
            .filter(|_| Some(r.method.as_str()) != reference)
            .map_or("-".to_string(), |d| format!("{:+.1}%", 100.0 * d));
        let recall = r.shortlist_recall.map_or("-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(s, " {delta:>9} {recall:>10}");
    }
    s
}

/// NDCG@10 of the four cells of the objective x graph-feature grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superadditivity {
    pub base: f64,
    pub listwise_only: f64,
    pub graph_only: f64,
    pub combined: f64,
}

impl Superadditivity {
    pub fn gain_listwise(&self) -> f64 {
        self.listwise_only - self.base
    }

    pub fn gain_graph(&self) -> f64 {
        self.graph_only - self.base
    }

    pub fn gain_combined(&self) -> f64 {
        self.combined - self.base
    }

    /// Combined gain minus the sum of the individual gains.
    pub fn synergy(&self) -> f64 {
        self.gain_combined() - (self.gain_listwise() + self.gain_graph())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NDCG@10 gains over the pointwise model without graph features");
        let _ = writeln!(s, "  listwise objective      {:+.4}", self.gain_listwise());
        let _ = writeln!(s, "  graph features          {:+.4}", self.gain_graph());
        let _ = writeln!(s, "  sum of individual gains {:+.4}", self.gain_listwise() + self.gain_graph());
        let _ = writeln!(s, "  combined gain           {:+.4}", self.gain_combined());
        let sign = if self.synergy() > 0.0 { "superadditive" } else { "not superadditive" };
        let _ = writeln!(s, "  synergy                 {:+.4} ({sign})", self.synergy());
        s
    }
}

/// One row per configuration: the full model first, then each removal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub configuration: String,
    pub hr10: f64,
    pub ndcg10: f64,
}

pub fn render_ablation(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.configuration.len()).max().unwrap_or(0).max(13);
    let full = rows.first().map(|r| r.ndcg10);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$} {:>8} {:>8} {:>8}", "configuration", "HR@10", "NDCG@10", "delta");
    for (k, r) in rows.iter().enumerate() {
        let delta = match (k, full.and_then(|f| relative_delta(r.ndcg10, f))) {
            (0, _) | (_, None) => "-".to_string(),
            (_, Some(d)) => format!("{:+.1}%", 100.0 * d),
        };
        let _ = writeln!(s, "{:<width$} {:>8.4} {:>8.4} {:>8}", r.configuration, r.hr10, r.ndcg10, delta);
    }
    s
}
