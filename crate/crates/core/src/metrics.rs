//! Single-relevant-item ranking metrics.

use serde::{Deserialize, Serialize};

pub fn hit_at(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0
    } else {
        0.0
    }
}

/// `1 / log2(rank + 1)` inside the cutoff; the ideal DCG is 1.
pub fn ndcg_at(rank: usize, k: usize) -> f64 {
    if rank >= 1 && rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

pub fn reciprocal_rank(rank: usize) -> f64 {
    if rank == 0 {
        0.0
    } else {
        1.0 / rank as f64
    }
}

/// The five reported metrics for one rank (or their mean over users).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub hr5: f64,
    pub ndcg5: f64,
    pub hr10: f64,
    pub ndcg10: f64,
    pub mrr: f64,
}

impl RankMetrics {
    pub const NAMES: [&'static str; 5] = ["HR@5", "NDCG@5", "HR@10", "NDCG@10", "MRR"];

    pub fn for_rank(rank: usize) -> Self {
        RankMetrics {
            hr5: hit_at(rank, 5),
            ndcg5: ndcg_at(rank, 5),
            hr10: hit_at(rank, 10),
            ndcg10: ndcg_at(rank, 10),
            mrr: reciprocal_rank(rank),
        }
    }

    /// Mean over ranks, summed in the given order.
    pub fn mean_of(ranks: impl IntoIterator<Item = usize>) -> Self {
        let mut acc = RankMetrics::default();
        let mut n = 0usize;
        for r in ranks {
            let m = Self::for_rank(r);
            acc.hr5 += m.hr5;
            acc.ndcg5 += m.ndcg5;
            acc.hr10 += m.hr10;
            acc.ndcg10 += m.ndcg10;
            acc.mrr += m.mrr;
            n += 1;
        }
        if n > 0 {
            let n = n as f64;
            acc.hr5 /= n;
            acc.ndcg5 /= n;
            acc.hr10 /= n;
            acc.ndcg10 /= n;
            acc.mrr /= n;
        }
        acc
    }

    pub fn values(&self) -> [f64; 5] {
        [self.hr5, self.ndcg5, self.hr10, self.ndcg10, self.mrr]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let top = RankMetrics::for_rank(1);
        assert_eq!((top.hr5, top.ndcg10, top.mrr), (1.0, 1.0, 1.0));
        let third = RankMetrics::for_rank(3);
        assert_eq!(third.ndcg10, 0.5);
        assert!((third.mrr - 1.0 / 3.0).abs() < 1e-15);
        let eleventh = RankMetrics::for_rank(11);
        assert_eq!((eleventh.hr10, eleventh.ndcg10), (0.0, 0.0));
        assert!((eleventh.mrr - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn cutoff_and_monotonicity() {
        for r in 1..200 {
            let a = RankMetrics::for_rank(r);
            let b = RankMetrics::for_rank(r + 1);
            assert!(b.ndcg10 <= a.ndcg10 && b.mrr < a.mrr);
            assert!(a.ndcg5 <= a.ndcg10 && a.hr5 <= a.hr10);
        }
    }
}
