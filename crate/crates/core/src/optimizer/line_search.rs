use crate::error::{Error, Result};
use crate::multi_wg::{state_sum_rate, MultiWgScenario, NetworkState};

use super::{GradientVector, OptimizerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BlsOutcome {
    /// Updated positions, or the input positions when no step was accepted.
    pub positions: Vec<f64>,
    /// Step `ℓ = ℓ'·β^k*` that was accepted.
    pub accepted_step: Option<f64>,
    /// Candidate for the next call: `ζ·ℓ` after success, else the input candidate.
    pub next_candidate: f64,
    pub sum_rate: f64,
    pub backtracks: usize,
    /// No improving step was found (zero gradient or backtracks exhausted).
    pub stationary: bool,
}

/// Projected normalized-gradient step with backtracking: the smallest
/// `k ≥ 0` for which `clamp(x + ℓ'β^k g/g_max, 0, L)` strictly raises the
/// sum rate (beams and feeds fixed).
pub fn bls_position_update(
    scenario: &MultiWgScenario,
    state: &NetworkState,
    grad: &GradientVector,
    cfg: &OptimizerConfig,
    step_candidate: f64,
) -> Result<BlsOutcome> {
    if !(step_candidate.is_finite() && step_candidate > 0.0) {
        return Err(Error::domain(format!(
            "step candidate must be positive, got {step_candidate}"
        )));
    }
    if grad.g.len() != state.positions.len() {
        return Err(Error::Dimension(format!(
            "gradient has {} entries for {} PAs",
            grad.g.len(),
            state.positions.len()
        )));
    }
    let current = state_sum_rate(scenario, state)?;
    let unchanged = |backtracks| BlsOutcome {
        positions: state.positions.clone(),
        accepted_step: None,
        next_candidate: step_candidate,
        sum_rate: current,
        backtracks,
        stationary: true,
    };
    if grad.is_stationary() {
        return Ok(unchanged(0));
    }

    let length = scenario.length();
    let mut trial = state.clone();
    let mut step = step_candidate;
    for k in 0..=cfg.bls_max_backtracks {
        for (x, (x0, g)) in trial.positions.iter_mut().zip(state.positions.iter().zip(&grad.g)) {
            *x = (x0 + step * g / grad.g_max).clamp(0.0, length);
        }
        if trial.positions != state.positions {
            let rate = state_sum_rate(scenario, &trial)?;
            if rate > current {
                return Ok(BlsOutcome {
                    positions: trial.positions,
                    accepted_step: Some(step),
                    next_candidate: cfg.bls_expansion * step,
                    sum_rate: rate,
                    backtracks: k,
                    stationary: false,
                });
            }
        }
        step *= cfg.bls_contraction;
    }
    Ok(unchanged(cfg.bls_max_backtracks))
}
