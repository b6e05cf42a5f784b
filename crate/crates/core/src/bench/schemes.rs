use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Feed, WaveguideSpec};
use crate::error::{Error, Result};
use crate::multi_wg::{effective_channel_matrix, rate_report, MultiWgScenario, NetworkState, RateReport};
use crate::optimizer::{optimize_with_policy, wmmse_beamforming, FeedPolicy, OptimizationResult, OptimizerConfig};
use crate::phys::AttenuationCoefficient;
use crate::single_wg::{optimal_pa_position, select_feed_per_user, tdma_sum_rate, PaPlacementResult, SingleWgScenario};

/// ChaCha stream of a seed reserved for random PA positions; scenario drops
/// use stream 0.
const RANDOM_PA_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "DF-PAS")]
    DfPas,
    #[serde(rename = "SF-PAS")]
    SfPas,
    #[serde(rename = "RANDOM-PA")]
    RandomPa,
    #[serde(rename = "CONVENTIONAL")]
    Conventional,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::DfPas,
        SchemeId::SfPas,
        SchemeId::RandomPa,
        SchemeId::Conventional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::DfPas => "DF-PAS",
            SchemeId::SfPas => "SF-PAS",
            SchemeId::RandomPa => "RANDOM-PA",
            SchemeId::Conventional => "CONVENTIONAL",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<_> = SchemeId::ALL.iter().map(|id| id.as_str()).collect();
                Error::config(
                    "schemes",
                    format!("unknown scheme `{s}`; expected one of {}", known.join(", ")),
                )
            })
    }
}

fn random_pa_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RANDOM_PA_STREAM);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaOutcome {
    pub placements: Vec<PaPlacementResult>,
    pub sum_rate: f64,
}

/// Single-waveguide TDMA under `scheme`:
/// - DF-PAS: per-slot optimal placement under whichever feed serves the user
///   better (ties left);
/// - SF-PAS: per-slot optimal placement fed from the left;
/// - RANDOM-PA: uniform PA position per slot, nearer feed;
/// - CONVENTIONAL: a lossless antenna fixed at `L_x / 2`.
pub fn single_tdma(scenario: &SingleWgScenario, scheme: SchemeId, seed: u64) -> Result<TdmaOutcome> {
    scenario.validate()?;
    let length = scenario.length();
    let (evaluated, placements): (SingleWgScenario, Vec<PaPlacementResult>) = match scheme {
        SchemeId::DfPas => {
            let placements = scenario
                .users
                .iter()
                .map(|u| {
                    let left = optimal_pa_position(u, Feed::Left, scenario);
                    let right = optimal_pa_position(u, Feed::Right, scenario);
                    if left.achieved_snr >= right.achieved_snr {
                        left
                    } else {
                        right
                    }
                })
                .collect();
            (scenario.clone(), placements)
        }
        SchemeId::SfPas => {
            let placements = scenario
                .users
                .iter()
                .map(|u| optimal_pa_position(u, Feed::Left, scenario))
                .collect();
            (scenario.clone(), placements)
        }
        SchemeId::RandomPa => {
            let mut rng = random_pa_rng(seed);
            let placements = scenario
                .users
                .iter()
                .map(|u| {
                    let x = rng.random_range(0.0..=length);
                    let feed = select_feed_per_user(x, length);
                    PaPlacementResult {
                        x_star_m: x,
                        feed,
                        achieved_snr: scenario.snr_at(u, x, feed),
                        boundary_case: false,
                    }
                })
                .collect();
            (scenario.clone(), placements)
        }
        SchemeId::Conventional => {
            let mut lossless = scenario.clone();
            lossless.alpha = AttenuationCoefficient::from_nepers_per_meter(0.0)?;
            let x = 0.5 * length;
            let placements = scenario
                .users
                .iter()
                .map(|u| PaPlacementResult {
                    x_star_m: x,
                    feed: Feed::Left,
                    achieved_snr: lossless.snr_at(u, x, Feed::Left),
                    boundary_case: false,
                })
                .collect();
            (lossless, placements)
        }
    };
    let sum_rate = tdma_sum_rate(&evaluated, &placements)?;
    Ok(TdmaOutcome { placements, sum_rate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiOutcome {
    pub state: NetworkState,
    pub report: RateReport,
    /// Present for the optimized schemes.
    pub optimization: Option<OptimizationResult>,
}

/// Multi-waveguide downlink under `scheme`:
/// - DF-PAS: two-phase optimization with feed switching;
/// - SF-PAS: the same pipeline with every waveguide fed from the left;
/// - RANDOM-PA: uniform PA positions, nearer feeds, WMMSE beams;
/// - CONVENTIONAL: lossless antennas fixed at `x = L_x / 2`, WMMSE beams.
pub fn multi_oma(
    scenario: &MultiWgScenario,
    scheme: SchemeId,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<MultiOutcome> {
    let optimized = |policy| -> Result<MultiOutcome> {
        let out = optimize_with_policy(scenario, policy, cfg)?;
        Ok(MultiOutcome {
            state: out.state.clone(),
            report: out.report.clone(),
            optimization: Some(out),
        })
    };
    let fixed = |s: &MultiWgScenario, feeds: Vec<Feed>, positions: Vec<f64>| -> Result<MultiOutcome> {
        s.validate()?;
        cfg.validate()?;
        let h = effective_channel_matrix(s, &feeds, &positions)?;
        let wm = wmmse_beamforming(&h, s.total_power_w, s.noise_power_w, cfg)?;
        let report = rate_report(&h, &wm.beams, s.noise_power_w)?;
        Ok(MultiOutcome {
            state: NetworkState {
                feeds,
                positions,
                beamforming: wm.beams,
            },
            report,
            optimization: None,
        })
    };
    let n = scenario.num_waveguides();
    let length = scenario.length();
    match scheme {
        SchemeId::DfPas => optimized(FeedPolicy::Switching),
        SchemeId::SfPas => optimized(FeedPolicy::FixedLeft),
        SchemeId::RandomPa => {
            let mut rng = random_pa_rng(seed);
            let positions: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=length)).collect();
            let feeds = positions.iter().map(|&x| select_feed_per_user(x, length)).collect();
            fixed(scenario, feeds, positions)
        }
        SchemeId::Conventional => {
            // Without loss, ν only rotates each antenna's phase, which the
            // beams absorb.
            let mut lossless = scenario.clone();
            lossless.waveguide = WaveguideSpec::new(
                AttenuationCoefficient::from_nepers_per_meter(0.0)?,
                scenario.waveguide.effective_refractive_index,
                length,
            )?;
            fixed(&lossless, vec![Feed::Left; n], vec![0.5 * length; n])
        }
    }
}
