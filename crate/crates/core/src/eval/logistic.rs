//! Full-batch L2-regularized logistic regression on labelled feature rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::irl::{Architecture, RewardModel};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub l2: f64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            tolerance: 1e-6,
            max_iterations: 5_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit<T: Scalar> {
    pub model: RewardModel<T>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy plus `l2 / 2 * |w|^2` over standardized rows, and its
/// gradient in the linear model's parameter layout `[w, b]`.
pub fn logistic_loss_gradient<T: Scalar>(
    model: &RewardModel<T>,
    x: &FeatureMatrix<T>,
    labels: &[bool],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    if model.architecture != Architecture::Linear {
        return Err(Error::Config("logistic regression needs a linear model".into()));
    }
    if x.rows() != labels.len() || x.rows() == 0 {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: x.rows(),
        });
    }
    let d = model.dim;
    let w: Vec<f64> = model.params[..d].iter().map(|v| v.as_f64()).collect();
    let b = model.params[d].as_f64();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &y) in x.iter().zip(labels) {
        let z = row.iter().zip(&w).map(|(a, b)| a.as_f64() * b).sum::<f64>() + b;
        let y = if y { 1.0 } else { 0.0 };
        loss += log1p_exp(z) - y * z;
        let g = sigmoid(z) - y;
        for (gk, xk) in grad[..d].iter_mut().zip(row) {
            *gk += g * xk.as_f64();
        }
        grad[d] += g;
    }
    let n = labels.len() as f64;
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (gk, wk) in grad[..d].iter_mut().zip(&w) {
        *gk += l2 * wk;
    }
    Ok((loss, grad))
}

/// Gradient descent with step `1/L`, `L` a smoothness bound of the objective.
pub fn fit_logistic<T: Scalar>(raw: &FeatureMatrix<T>, labels: &[bool], cfg: &LogisticConfig) -> Result<LogisticFit<T>> {
    let standardizer = Standardizer::fit(raw.iter())?;
    let mut x = raw.clone();
    standardizer.apply_matrix(&mut x);
    let mut model = RewardModel::zeros(Architecture::Linear, raw.dim).with_standardizer(standardizer)?;
    let n = labels.len().max(1) as f64;
    let mean_sq: f64 = x.iter().map(|r| 1.0 + r.iter().map(|v| v.as_f64().powi(2)).sum::<f64>()).sum::<f64>() / n;
    let step = 1.0 / (0.25 * mean_sq + cfg.l2);
    let mut params: Vec<f64> = model.params.iter().map(|v| v.as_f64()).collect();
    let mut norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let (loss, grad) = logistic_loss_gradient(&model, &x, labels, cfg.l2)?;
        norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !loss.is_finite() || !norm.is_finite() {
            return Err(Error::NonFinite(format!(
                "logistic regression diverged at iteration {iterations} (loss {loss}, gradient norm {norm})"
            )));
        }
        if norm < cfg.tolerance {
            break;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= step * g;
        }
        for (m, p) in model.params.iter_mut().zip(&params) {
            *m = T::of(*p);
        }
        iterations += 1;
    }
    Ok(LogisticFit {
        model,
        iterations,
        gradient_norm: norm,
        converged: norm < cfg.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irl::relative_error;
    use rand::Rng;

    fn separable() -> (FeatureMatrix<f64>, Vec<bool>) {
        let mut rng = crate::seed::rng(1);
        let mut x = FeatureMatrix::new(2);
        let mut y = Vec::new();
        for k in 0..40 {
            let label = k % 4 == 0;
            let sign = if label { 1.0 } else { -1.0 };
            x.push(&[sign * rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_fixture_reaches_full_accuracy() {
        let (x, y) = separable();
        let fit = fit_logistic(&x, &y, &LogisticConfig { l2: 1e-3, ..LogisticConfig::default() }).unwrap();
        let scores = fit.model.score_raw(&x).unwrap();
        let correct = scores.iter().zip(&y).filter(|(s, &l)| (**s > 0.0) == l).count();
        assert_eq!(correct, y.len());
    }

    #[test]
    fn huge_penalty_shrinks_weights_to_zero() {
        let (x, y) = separable();
        let fit = fit_logistic(&x, &y, &LogisticConfig { l2: 1e12, ..LogisticConfig::default() }).unwrap();
        assert!(fit.model.params[..2].iter().all(|w| w.abs() < 1e-9));
        let scores = fit.model.score_raw(&x).unwrap();
        assert!(scores.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-8));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng(2);
        for case in 0..100 {
            let d = rng.gen_range(1..=10);
            let rows = rng.gen_range(1..=8);
            let mut x = FeatureMatrix::new(d);
            let mut y = Vec::new();
            for _ in 0..rows {
                let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                x.push(&r);
                y.push(rng.gen_bool(0.3));
            }
            let mut model = RewardModel::<f64>::zeros(Architecture::Linear, d);
            for p in &mut model.params {
                *p = rng.gen_range(-1.0..1.0);
            }
            let l2 = rng.gen_range(0.0..0.5);
            let (_, g) = logistic_loss_gradient(&model, &x, &y, l2).unwrap();
            for k in 0..=d {
                let mut probe = model.clone();
                probe.params[k] += 1e-5;
                let up = logistic_loss_gradient(&probe, &x, &y, l2).unwrap().0;
                probe.params[k] -= 2e-5;
                let down = logistic_loss_gradient(&probe, &x, &y, l2).unwrap().0;
                let numeric = (up - down) / 2e-5;
                assert!(relative_error(g[k], numeric) < 1e-4, "case {case} param {k}");
            }
        }
    }
}
