use std::collections::HashMap;

use crate::channel::Feed;
use crate::error::{Error, Result};
use crate::multi_wg::{effective_channel_matrix, CMatrix, MultiWgScenario, NetworkState};

use super::{mrt_beams, wmmse_from, OptimizerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub feeds: Vec<Feed>,
    /// Feeds, temporary PA positions and the WMMSE beams behind `sum_rate`.
    pub state: NetworkState,
    pub sum_rate: f64,
    /// Objective after the initial assignment and after every pass.
    pub pass_rates: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
    /// Distinct feed vectors whose objective was computed.
    pub evaluations: usize,
}

/// PA parked at its active feed: `x_n = 0` for a left feed, `L_x` for a right.
pub fn temporary_positions(feeds: &[Feed], length_m: f64) -> Vec<f64> {
    feeds.iter().map(|f| f.position(length_m)).collect()
}

/// Phase-I objective `J(ξ)`: WMMSE sum rate from MRT initial beams with
/// every PA at its active feed. Deterministic in `ξ`.
pub fn phase_one_objective(
    scenario: &MultiWgScenario,
    feeds: &[Feed],
    cfg: &OptimizerConfig,
) -> Result<(f64, CMatrix)> {
    let positions = temporary_positions(feeds, scenario.length());
    let h = effective_channel_matrix(scenario, feeds, &positions)?;
    let init = mrt_beams(&h, scenario.total_power_w);
    let out = wmmse_from(
        &h,
        scenario.total_power_w,
        scenario.noise_power_w,
        &init,
        cfg.phase_one_wmmse(),
    )?;
    Ok((out.sum_rate, out.beams))
}

/// Cyclic coordinate search over `ξ` starting from all-left feeds. Each
/// waveguide takes the left feed iff `J(left) ≥ J(right)` with the others
/// fixed; passes repeat until one improves `J` by less than `ε`.
pub fn greedy_feed_switching(scenario: &MultiWgScenario, cfg: &OptimizerConfig) -> Result<GreedyOutcome> {
    greedy_feed_switching_from(scenario, &vec![Feed::Left; scenario.num_waveguides()], cfg)
}

/// [`greedy_feed_switching`] from an arbitrary starting feed vector.
pub fn greedy_feed_switching_from(
    scenario: &MultiWgScenario,
    initial: &[Feed],
    cfg: &OptimizerConfig,
) -> Result<GreedyOutcome> {
    if initial.len() != scenario.num_waveguides() {
        return Err(Error::Dimension(format!(
            "{} initial feeds for {} waveguides",
            initial.len(),
            scenario.num_waveguides()
        )));
    }
    let mut cache: HashMap<Vec<Feed>, (f64, CMatrix)> = HashMap::new();
    let mut evaluate = |feeds: &[Feed]| -> Result<f64> {
        if let Some((rate, _)) = cache.get(feeds) {
            return Ok(*rate);
        }
        let value = phase_one_objective(scenario, feeds, cfg)?;
        let rate = value.0;
        cache.insert(feeds.to_vec(), value);
        Ok(rate)
    };

    let mut feeds = initial.to_vec();
    let mut rate = evaluate(&feeds)?;
    let mut pass_rates = vec![rate];
    let mut passes = 0;
    let mut converged = false;
    while passes < cfg.max_greedy_passes {
        passes += 1;
        for n in 0..feeds.len() {
            feeds[n] = Feed::Left;
            let left = evaluate(&feeds)?;
            feeds[n] = Feed::Right;
            let right = evaluate(&feeds)?;
            feeds[n] = if left >= right { Feed::Left } else { Feed::Right };
        }
        let next = evaluate(&feeds)?;
        pass_rates.push(next);
        let improvement = next - rate;
        rate = next;
        if improvement < cfg.epsilon {
            converged = true;
            break;
        }
    }

    let evaluations = cache.len();
    let beams = cache.remove(&feeds).expect("final feeds were evaluated").1;
    Ok(GreedyOutcome {
        state: NetworkState {
            positions: temporary_positions(&feeds, scenario.length()),
            feeds: feeds.clone(),
            beamforming: beams,
        },
        feeds,
        sum_rate: rate,
        pass_rates,
        passes,
        converged,
        evaluations,
    })
}
