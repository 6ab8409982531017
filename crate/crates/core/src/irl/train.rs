//! Epoch loop with per-transition updates and validation early stopping.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::irl::loss::{accumulate, add_penalty_gradient, Objective, Transition};
use crate::irl::model::{Architecture, ForwardCache, RewardModel};
use crate::irl::optim::{Optimizer, OptimizerKind};
use crate::irl::shortlist::order_by_score;
use crate::metrics::RankMetrics;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub objective: Objective,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Transitions averaged per update; 1 is a step per transition.
    pub batch_size: usize,
    /// Negatives sampled per training transition.
    pub n_neg: usize,
    /// Weight penalty `l2 / 2 * |w|^2` (biases excluded).
    pub l2: f64,
    /// Visit transitions in a seeded random order instead of user order.
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::Mlp { hidden: 64 },
            objective: Objective::Listwise,
            optimizer: OptimizerKind::default(),
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: 5,
            batch_size: 1,
            n_neg: 99,
            l2: 0.0,
            shuffle: false,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.n_neg == 0 {
            return bad("max_epochs, batch_size and n_neg must be at least 1");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if let Architecture::Mlp { hidden: 0 } = self.architecture {
            return bad("hidden size must be at least 1");
        }
        Ok(())
    }
}

/// Training data seen by [`train`]. Features are returned unstandardized.
pub trait TransitionSource<T: Scalar> {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Transition `index` with the candidate set drawn for `epoch`.
    fn transition(&self, epoch: usize, index: usize) -> Result<Transition<T>>;
    /// Held-out decisions used for early stopping; identical every epoch.
    fn validation(&self) -> Result<Vec<Transition<T>>>;
}

impl<T: Scalar> TransitionSource<T> for (Vec<Transition<T>>, Vec<Transition<T>>) {
    fn dim(&self) -> usize {
        self.0.first().map_or(0, |t| t.features.dim)
    }
    fn len(&self) -> usize {
        self.0.len()
    }
    fn transition(&self, _epoch: usize, index: usize) -> Result<Transition<T>> {
        Ok(self.0[index].clone())
    }
    fn validation(&self) -> Result<Vec<Transition<T>>> {
        Ok(self.1.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ndcg10: f64,
    pub val_hr10: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_ndcg10: f64,
    pub updates: u64,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path, cfg: &TrainConfig) -> Result<()> {
        let mut out = Vec::new();
        let _ = writeln!(
            out,
            "# architecture={} objective={:?} optimizer={:?} lr={} batch={} n_neg={} l2={} seed={}",
            cfg.architecture.label(),
            cfg.objective,
            cfg.optimizer,
            cfg.learning_rate,
            cfg.batch_size,
            cfg.n_neg,
            cfg.l2,
            cfg.seed
        );
        let _ = writeln!(out, "epoch,train_loss,val_ndcg10,val_hr10,improved");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9},{:.9},{}",
                r.epoch,
                r.train_loss,
                r.val_ndcg10,
                r.val_hr10,
                u8::from(r.improved)
            );
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Fits the standardizer on the epoch-0 training candidates.
pub fn fit_standardizer<T: Scalar, S: TransitionSource<T> + ?Sized>(source: &S) -> Result<Standardizer<T>> {
    let mut rows: Vec<Transition<T>> = Vec::with_capacity(1);
    let mut acc = StreamingMoments::default();
    for i in 0..source.len() {
        rows.clear();
        rows.push(source.transition(0, i)?);
        for row in rows[0].features.iter() {
            acc.push(row)?;
        }
    }
    acc.finish()
}

#[derive(Default)]
struct StreamingMoments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StreamingMoments {
    fn push<T: Scalar>(&mut self, row: &[T]) -> Result<()> {
        if self.count == 0 {
            self.mean = vec![0.0; row.len()];
            self.m2 = vec![0.0; row.len()];
        } else if row.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: row.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (k, x) in row.iter().enumerate() {
            let x = x.as_f64();
            let delta = x - self.mean[k];
            self.mean[k] += delta / n;
            self.m2[k] += delta * (x - self.mean[k]);
        }
        Ok(())
    }

    fn finish<T: Scalar>(self) -> Result<Standardizer<T>> {
        if self.count == 0 {
            return Err(Error::Empty("training feature set"));
        }
        let n = self.count as f64;
        let mut s = Standardizer::identity(self.mean.len());
        s.mean = self.mean.iter().map(|&m| T::of(m)).collect();
        s.std = self.m2.iter().map(|&v| T::of((v / n).sqrt())).collect();
        Ok(s)
    }
}

/// Mean validation metrics of `model` over standardized transitions.
pub fn validation_metrics<T: Scalar>(model: &RewardModel<T>, validation: &[Transition<T>]) -> Result<RankMetrics> {
    let mut ranks = Vec::with_capacity(validation.len());
    for t in validation {
        t.expert_index()?;
        let r = model.rewards(&t.features)?;
        let order = order_by_score(&t.items, &r);
        ranks.push(order.iter().position(|(i, _)| *i == t.expert).unwrap() + 1);
    }
    Ok(RankMetrics::mean_of(ranks))
}

/// Trains a reward model; returns the best-validation parameters and the log.
pub fn train<T: Scalar, S: TransitionSource<T> + ?Sized>(
    source: &S,
    cfg: &TrainConfig,
) -> Result<(RewardModel<T>, TrainingLog)> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::Empty("training transitions"));
    }
    let standardizer = fit_standardizer(source)?;
    let mut model = RewardModel::init(cfg.architecture, source.dim(), cfg.seed).with_standardizer(standardizer)?;
    let mut validation = source.validation()?;
    for t in &mut validation {
        model.standardizer.apply_matrix(&mut t.features);
    }

    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.params.len());
    let l2 = T::of(cfg.l2);
    let mut grad = vec![T::zero(); model.params.len()];
    let mut cache = ForwardCache::default();
    let mut batch: Vec<Transition<T>> = Vec::with_capacity(cfg.batch_size);
    let mut log = TrainingLog {
        best_val_ndcg10: f64::NEG_INFINITY,
        ..TrainingLog::default()
    };
    let mut best = model.params.clone();
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..source.len()).collect();
        if cfg.shuffle {
            order.shuffle(&mut seed::rng(seed::derive_seed(cfg.seed, "shuffle", 0, epoch as u64)));
        }
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                let mut t = source.transition(epoch, i)?;
                model.standardizer.apply_matrix(&mut t.features);
                batch.push(t);
            }
            grad.iter_mut().for_each(|g| *g = T::zero());
            let loss = accumulate(&model, &batch, cfg.objective, &mut grad, &mut cache)?.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {loss} at epoch {epoch}, transitions {:?}",
                    chunk
                )));
            }
            loss_sum += loss;
            let n = T::of_usize(batch.len());
            grad.iter_mut().for_each(|g| *g /= n);
            add_penalty_gradient(&model, l2, &mut grad);
            optimizer.apply(&mut model.params, &grad);
            log.updates += 1;
        }
        if let Some(k) = model.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {k} after epoch {epoch}")));
        }
        let val = validation_metrics(&model, &validation)?;
        let improved = val.ndcg10 > log.best_val_ndcg10;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / source.len() as f64,
            val_ndcg10: val.ndcg10,
            val_hr10: val.hr10,
            improved,
        });
        log::info!(
            "epoch {epoch}: loss {:.5} val NDCG@10 {:.4} HR@10 {:.4}",
            loss_sum / source.len() as f64,
            val.ndcg10,
            val.hr10
        );
        if improved {
            log.best_val_ndcg10 = val.ndcg10;
            log.best_epoch = epoch;
            best.copy_from_slice(&model.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.patience {
                break;
            }
        }
    }
    model.params = best;
    Ok((model, log))
}
