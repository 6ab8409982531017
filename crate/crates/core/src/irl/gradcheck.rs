//! Central finite-difference check of analytic parameter gradients.

use crate::error::Result;
use crate::irl::loss::{objective_gradient, objective_loss, Objective, Transition};
use crate::irl::model::RewardModel;

/// Relative error `|a - n| / max(|a|, |n|, floor)` with this floor.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares every analytic partial derivative with `(L(p+h) - L(p-h)) / 2h`.
pub fn check_gradient(
    model: &RewardModel<f64>,
    batch: &[Transition<f64>],
    objective: Objective,
    l2: f64,
    step: f64,
) -> Result<GradCheck> {
    let (_, analytic) = objective_gradient(model, batch, objective, l2)?;
    let mut probe = model.clone();
    let mut worst = GradCheck {
        max_relative_error: 0.0,
        worst_parameter: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for k in 0..model.params.len() {
        let base = model.params[k];
        probe.params[k] = base + step;
        let up = objective_loss(&probe, batch, objective, l2)?;
        probe.params[k] = base - step;
        let down = objective_loss(&probe, batch, objective, l2)?;
        probe.params[k] = base;
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(analytic[k], numeric);
        if err > worst.max_relative_error {
            worst = GradCheck {
                max_relative_error: err,
                worst_parameter: k,
                analytic: analytic[k],
                numeric,
            };
        }
    }
    Ok(worst)
}
