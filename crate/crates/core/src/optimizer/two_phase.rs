use log::warn;
use serde::{Deserialize, Serialize};

use crate::channel::Feed;
use crate::error::Result;
use crate::multi_wg::{effective_channel_matrix, rate_report, MultiWgScenario, NetworkState, RateReport};

use super::{
    bls_position_update, greedy_feed_switching, phase_one_objective, sum_rate_gradient, temporary_positions,
    wmmse_from, OptimizerConfig,
};

/// How Phase I chooses feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedPolicy {
    /// Greedy switching between both ends (DF-PAS).
    Switching,
    /// Every waveguide fed from the left end (SF-PAS).
    FixedLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    FeedSelection,
    Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub sum_rate: f64,
    /// Accepted BLS step in meters; absent in Phase I and for skipped steps.
    pub step_size: Option<f64>,
    /// Feed indicators `ξ_n` (1 = left).
    pub feeds: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub state: NetworkState,
    pub report: RateReport,
    pub trace: Vec<TraceRecord>,
    /// Sum rate at the end of Phase I.
    pub phase_one_rate: f64,
    pub outer_iterations: usize,
    /// Phase II stopped on the `ε` test rather than the iteration cap.
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Two-phase optimization with greedy feed switching.
pub fn two_phase_optimize(scenario: &MultiWgScenario, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    optimize_with_policy(scenario, FeedPolicy::Switching, cfg)
}

pub fn optimize_with_policy(
    scenario: &MultiWgScenario,
    policy: FeedPolicy,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    scenario.validate()?;
    let indicators = |feeds: &[Feed]| feeds.iter().map(|f| f.indicator()).collect::<Vec<_>>();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();

    let mut state = match policy {
        FeedPolicy::Switching => {
            let greedy = greedy_feed_switching(scenario, cfg)?;
            for (pass, rate) in greedy.pass_rates.iter().enumerate() {
                trace.push(TraceRecord {
                    iteration: pass,
                    phase: Phase::FeedSelection,
                    sum_rate: *rate,
                    step_size: None,
                    feeds: indicators(&greedy.feeds),
                });
            }
            if !greedy.converged {
                warnings.push(format!(
                    "feed switching hit the cap of {} passes",
                    cfg.max_greedy_passes
                ));
            }
            greedy.state
        }
        FeedPolicy::FixedLeft => {
            let feeds = vec![Feed::Left; scenario.num_waveguides()];
            let (rate, beams) = phase_one_objective(scenario, &feeds, cfg)?;
            trace.push(TraceRecord {
                iteration: 0,
                phase: Phase::FeedSelection,
                sum_rate: rate,
                step_size: None,
                feeds: indicators(&feeds),
            });
            NetworkState {
                positions: temporary_positions(&feeds, scenario.length()),
                feeds,
                beamforming: beams,
            }
        }
    };
    let h = effective_channel_matrix(scenario, &state.feeds, &state.positions)?;
    let mut rate = rate_report(&h, &state.beamforming, scenario.noise_power_w)?.sum_rate;
    let phase_one_rate = rate;

    let mut step = cfg.initial_step_for(scenario.length());
    let mut converged = false;
    let mut outer_iterations = 0;
    let mut wmmse_capped = 0usize;
    while outer_iterations < cfg.max_outer_iters {
        outer_iterations += 1;
        let grad = sum_rate_gradient(scenario, &state)?;
        let bls = bls_position_update(scenario, &state, &grad, cfg, step)?;
        let mut candidate = state.clone();
        if !bls.stationary {
            candidate.positions = bls.positions;
        }
        let h = effective_channel_matrix(scenario, &candidate.feeds, &candidate.positions)?;
        let wm = wmmse_from(
            &h,
            scenario.total_power_w,
            scenario.noise_power_w,
            &candidate.beamforming,
            cfg.phase_two_wmmse(),
        )?;
        if !wm.converged {
            wmmse_capped += 1;
        }
        candidate.beamforming = wm.beams;
        let improvement = wm.sum_rate - rate;
        if improvement < cfg.epsilon {
            converged = true;
            break;
        }
        state = candidate;
        rate = wm.sum_rate;
        if !bls.stationary {
            step = bls.next_candidate;
        }
        trace.push(TraceRecord {
            iteration: outer_iterations,
            phase: Phase::Placement,
            sum_rate: rate,
            step_size: bls.accepted_step,
            feeds: indicators(&state.feeds),
        });
    }
    if wmmse_capped > 0 {
        warnings.push(format!(
            "WMMSE reached its iteration cap in {wmmse_capped} outer iterations"
        ));
    }
    if !converged {
        warnings.push(format!(
            "placement loop hit the cap of {} iterations",
            cfg.max_outer_iters
        ));
    }
    for w in &warnings {
        warn!("{w}");
    }

    let h = effective_channel_matrix(scenario, &state.feeds, &state.positions)?;
    let report = rate_report(&h, &state.beamforming, scenario.noise_power_w)?;
    Ok(OptimizationResult {
        state,
        report,
        trace,
        phase_one_rate,
        outer_iterations,
        converged,
        warnings,
    })
}
