//! Two-phase joint optimizer for the multi-waveguide network: greedy
//! feed-point switching (Phase I), then alternating PA-position gradient
//! ascent and WMMSE beamforming (Phase II).

mod gradient;
mod greedy;
mod line_search;
mod two_phase;
mod wmmse;

pub use gradient::{sum_rate_gradient, GradientVector};
pub use greedy::{
    greedy_feed_switching, greedy_feed_switching_from, phase_one_objective, temporary_positions, GreedyOutcome,
};
pub use line_search::{bls_position_update, BlsOutcome};
pub use two_phase::{optimize_with_policy, two_phase_optimize, FeedPolicy, OptimizationResult, Phase, TraceRecord};
pub use wmmse::{mrt_beams, wmmse_beamforming, wmmse_from, WmmseAuxiliaries, WmmseOutcome, WmmseSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Sum-rate improvement below which an outer loop stops (bits/s/Hz).
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub max_greedy_passes: usize,
    /// `β`
    pub bls_contraction: f64,
    /// `ζ`
    pub bls_expansion: f64,
    /// First BLS candidate in meters; `None` means `L_x / 10`.
    pub initial_step: Option<f64>,
    pub bls_max_backtracks: usize,
    /// Stop WMMSE once the weighted-MSE objective moves less than this.
    pub wmmse_tolerance: f64,
    pub wmmse_max_iters: usize,
    /// Relative mismatch allowed between beam power and budget.
    pub bisection_tolerance: f64,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_outer_iters: 200,
            max_greedy_passes: 20,
            bls_contraction: 0.5,
            bls_expansion: 1.2,
            initial_step: None,
            bls_max_backtracks: 30,
            wmmse_tolerance: 1e-9,
            wmmse_max_iters: 500,
            bisection_tolerance: 1e-10,
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("wmmse_tolerance", self.wmmse_tolerance),
            ("bisection_tolerance", self.bisection_tolerance),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.bls_contraction > 0.0 && self.bls_contraction < 1.0) {
            return Err(Error::config(
                "bls_contraction",
                format!("must lie in (0, 1), got {}", self.bls_contraction),
            ));
        }
        if !(self.bls_expansion.is_finite() && self.bls_expansion > 1.0) {
            return Err(Error::config(
                "bls_expansion",
                format!("must exceed 1, got {}", self.bls_expansion),
            ));
        }
        if let Some(step) = self.initial_step {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::config("initial_step", format!("must be positive, got {step}")));
            }
        }
        if self.wmmse_max_iters == 0 {
            return Err(Error::config("wmmse_max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn initial_step_for(&self, length_m: f64) -> f64 {
        self.initial_step.unwrap_or(length_m / 10.0)
    }

    pub(crate) fn phase_two_wmmse(&self) -> WmmseSettings {
        WmmseSettings {
            tolerance: self.wmmse_tolerance,
            max_iters: self.wmmse_max_iters,
            bisection_tolerance: self.bisection_tolerance,
        }
    }

    pub(crate) fn phase_one_wmmse(&self) -> WmmseSettings {
        WmmseSettings {
            tolerance: 10.0 * self.wmmse_tolerance,
            ..self.phase_two_wmmse()
        }
    }
}
