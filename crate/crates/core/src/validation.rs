//! Acceptance criteria A1–A10, shared by the `validate` command and the
//! acceptance test target.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bench::{multi_oma, single_tdma, SchemeId};
use crate::channel::Feed;
use crate::error::Result;
use crate::montecarlo::{mc_ergodic_rate_multi, mc_ergodic_rate_single, FeedRule, McConfig};
use crate::multi_wg::{effective_channel_matrix, ergodic_rate_multi_closed, state_sum_rate, CMatrix, NetworkState};
use crate::optimizer::{
    greedy_feed_switching, mrt_beams, phase_one_objective, sum_rate_gradient, wmmse_beamforming, wmmse_from,
    OptimizerConfig,
};
use crate::phys::{
    dielectric_attenuation, propagated_power, AttenuationCoefficient, CarrierConfig, Point3, WaveguideMaterial,
};
use crate::scenario::ScenarioParams;
use crate::single_wg::{ergodic_rate_df_closed, optimal_pa_position, rate_gain_df_over_sf, SingleWgScenario};

pub const CRITERIA: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    /// Monte Carlo drops for A3–A5.
    pub drops: usize,
    /// Base seed for Monte Carlo streams and scenario draws.
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            drops: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: &'static str,
    pub passed: bool,
    pub summary: String,
    /// One line per measured case.
    pub details: Vec<String>,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.id, self.summary)
    }
}

pub fn run_criterion(id: &str, opts: &ValidationOptions) -> Result<CriterionReport> {
    match id {
        "A1" => Ok(a1()),
        "A2" => Ok(a2()),
        "A3" => a3(opts),
        "A4" => a4(opts),
        "A5" => a5(opts),
        "A6" => Ok(a6(opts)),
        "A7" => a7(opts),
        "A8" => a8(opts),
        "A9" => a9(opts),
        "A10" => a10(opts),
        other => Err(crate::error::Error::config(
            "criterion",
            format!("unknown criterion `{other}`; expected one of {}", CRITERIA.join(", ")),
        )),
    }
}

pub fn run_all(opts: &ValidationOptions) -> Result<Vec<CriterionReport>> {
    CRITERIA.iter().map(|id| run_criterion(id, opts)).collect()
}

fn report(id: &'static str, passed: bool, summary: String, details: Vec<String>) -> CriterionReport {
    CriterionReport {
        id,
        passed,
        summary,
        details,
    }
}

fn ptfe_alpha() -> AttenuationCoefficient {
    dielectric_attenuation(WaveguideMaterial::PTFE, CarrierConfig::new(28e9).expect("28 GHz")).expect("PTFE")
}

fn a1() -> CriterionReport {
    let db = ptfe_alpha().db_per_meter();
    report(
        "A1",
        (db - 1.48).abs() <= 0.01,
        format!("PTFE attenuation {db:.5} dB/m (1.48 ± 0.01)"),
        vec![],
    )
}

fn a2() -> CriterionReport {
    let p = propagated_power(1.0, ptfe_alpha(), 10.0).expect("valid inputs");
    report(
        "A2",
        (p - 0.033).abs() <= 0.001,
        format!("power after 10 m {p:.5} W (0.033 ± 0.001)"),
        vec![],
    )
}

const A3_LENGTHS: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

fn a3_scenario(length: f64) -> Result<SingleWgScenario> {
    ScenarioParams {
        service_length_m: length,
        service_width_m: 10.0,
        transmit_power_dbm: 30.0,
        num_users: 0,
        ..Default::default()
    }
    .single_scenario(0)
}

fn mc_config(opts: &ValidationOptions, stream: u64) -> McConfig {
    McConfig {
        num_drops: opts.drops,
        rng_seed: opts.seed.wrapping_add(stream),
        los_only: true,
        ..Default::default()
    }
}

fn a3(opts: &ValidationOptions) -> Result<CriterionReport> {
    let mut details = Vec::new();
    let mut passed = true;
    for (i, &length) in A3_LENGTHS.iter().enumerate() {
        let s = a3_scenario(length)?;
        let est = mc_ergodic_rate_single(&s, FeedRule::Nearest, &mc_config(opts, i as u64))?;
        let closed = ergodic_rate_df_closed(&s);
        let diff = (closed - est.mean_rate).abs();
        let tol = 0.05f64.max(2.0 * est.ci_halfwidth);
        passed &= diff <= tol;
        details.push(format!(
            "L_x={length}: closed {closed:.4}, MC {:.4} ± {:.4}, |diff| {diff:.4} (tol {tol:.4})",
            est.mean_rate, est.ci_halfwidth
        ));
    }
    let summary = format!(
        "dual-feed closed form vs MC over L_x ∈ {A3_LENGTHS:?}, {} drops",
        opts.drops
    );
    Ok(report("A3", passed, summary, details))
}

fn a4(opts: &ValidationOptions) -> Result<CriterionReport> {
    let mut details = Vec::new();
    let mut failing = Vec::new();
    for (i, &length) in A3_LENGTHS.iter().enumerate() {
        let s = a3_scenario(length)?;
        let cfg = mc_config(opts, i as u64);
        let df = mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg)?;
        let sf = mc_ergodic_rate_single(&s, FeedRule::Left, &cfg)?;
        let gain = df.mean_rate - sf.mean_rate;
        let expected = rate_gain_df_over_sf(s.alpha, length);
        let pooled = (df.ci_halfwidth.powi(2) + sf.ci_halfwidth.powi(2)).sqrt();
        let ok = (gain - expected).abs() <= 2.0 * pooled;
        if !ok {
            failing.push(length);
        }
        details.push(format!(
            "L_x={length}: MC gain {gain:.4}, (αL_x/4)log2 e {expected:.4}, |diff| {:.4} (tol {:.4})",
            (gain - expected).abs(),
            2.0 * pooled
        ));
    }
    let summary = if failing.is_empty() {
        "MC dual-minus-single gain matches (αL_x/4)log2 e at every L_x".to_string()
    } else {
        format!("MC gain outside 2·pooled CI at L_x ∈ {failing:?} (exact-rate integrand leaves high-SNR regime)")
    };
    Ok(report("A4", failing.is_empty(), summary, details))
}

fn a5(opts: &ValidationOptions) -> Result<CriterionReport> {
    let mut gaps = Vec::new();
    let mut details = Vec::new();
    let mut upper_bound = true;
    for (i, n) in [2usize, 4, 8].into_iter().enumerate() {
        let s = ScenarioParams {
            num_waveguides: n,
            num_users: 0,
            num_scatterers: 0,
            service_length_m: 10.0,
            service_width_m: 6.0,
            ..Default::default()
        }
        .multi_scenario(0)?;
        let est = mc_ergodic_rate_multi(&s, FeedRule::Nearest, &mc_config(opts, 100 + i as u64))?;
        let closed = ergodic_rate_multi_closed(&s);
        let gap = closed - est.mean_rate;
        upper_bound &= closed >= est.mean_rate;
        gaps.push(gap);
        details.push(format!(
            "N={n}: closed {closed:.4}, MC {:.4} ± {:.4}, gap {gap:.4}",
            est.mean_rate, est.ci_halfwidth
        ));
    }
    let shrinks = gaps[2] < gaps[0];
    let tight = gaps[2].abs() <= 0.2;
    let summary = format!(
        "closed ≥ MC: {upper_bound}; gap N=2 {:.4} > N=8 {:.4}: {shrinks}; |gap N=8| ≤ 0.2: {tight}",
        gaps[0], gaps[2]
    );
    Ok(report("A5", upper_bound && shrinks && tight, summary, details))
}

fn a6(opts: &ValidationOptions) -> CriterionReport {
    const STEP: f64 = 1e-4;
    let results: Vec<(f64, String)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(6_000_000 + i));
            let length = rng.random_range(1.0..30.0);
            let width = rng.random_range(1.0..10.0);
            let mut s = ScenarioParams {
                service_length_m: length,
                service_width_m: width,
                waveguide_height_m: rng.random_range(0.5..5.0),
                num_users: 0,
                ..Default::default()
            }
            .single_scenario(0)
            .expect("valid instance");
            s.alpha = AttenuationCoefficient::from_nepers_per_meter(rng.random_range(0.0..1.0)).expect("α ≥ 0");
            let user = Point3::ground(rng.random_range(0.0..=length), rng.random_range(0.0..=width));
            let mut worst = 0.0f64;
            for feed in [Feed::Left, Feed::Right] {
                let closed = optimal_pa_position(&user, feed, &s);
                let points = (length / STEP).ceil() as usize;
                let grid = (0..=points)
                    .map(|k| s.snr_at(&user, (k as f64 * STEP).min(length), feed))
                    .fold(f64::MIN, f64::max);
                worst = worst.max((grid - closed.achieved_snr) / grid);
            }
            (worst, format!("instance {i}: L_x={length:.3}, user {user:?}"))
        })
        .collect();
    let (worst, at) = results
        .iter()
        .cloned()
        .fold((f64::MIN, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    // The closed form is an exact maximizer; it may only lose rounding to
    // the grid.
    let passed = worst <= 1e-12;
    let summary = format!("1000 instances, largest relative SNR shortfall vs 1e-4 grid {worst:.3e}");
    report("A6", passed, summary, vec![format!("worst at {at}")])
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, m: usize, length: f64, power: f64) -> NetworkState {
    let beams = CMatrix::from_fn(n, m, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let norm2: f64 = beams.iter().map(|c| c.norm_sqr()).sum();
    NetworkState {
        feeds: (0..n)
            .map(|_| if rng.random_bool(0.5) { Feed::Left } else { Feed::Right })
            .collect(),
        positions: (0..n).map(|_| rng.random_range(0.01 * length..0.99 * length)).collect(),
        beamforming: beams * Complex64::from((power / norm2).sqrt()),
    }
}

/// Bits/s/Hz per meter.
const GRADIENT_FLOOR: f64 = 1e-3;

fn a7(opts: &ValidationOptions) -> Result<CriterionReport> {
    const H: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(7_000_000 + trial));
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let length = rng.random_range(5.0..30.0);
        let s = ScenarioParams {
            num_waveguides: n,
            num_users: m,
            service_length_m: length,
            num_scatterers: 10,
            ..Default::default()
        }
        .multi_scenario(opts.seed.wrapping_add(trial))?;
        let state = random_state(&mut rng, n, m, length, s.total_power_w);
        let g = sum_rate_gradient(&s, &state)?;
        let mut fd = vec![0.0; n];
        for (k, slot) in fd.iter_mut().enumerate() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.positions[k] += H;
            minus.positions[k] -= H;
            *slot = (state_sum_rate(&s, &plus)? - state_sum_rate(&s, &minus)?) / (2.0 * H);
        }
        let diff = g.g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Central differences in double precision carry roundoff of about
        // ε·R_sum/H ≈ 1e-9, so components far below the floor are not
        // resolvable by the oracle.
        let scale = fd.iter().map(|v| v.abs()).fold(GRADIENT_FLOOR, f64::max);
        let rel = diff / scale;
        if rel > worst {
            worst = rel;
            details.push(format!(
                "trial {trial} (N={n}, M={m}): relative error {rel:.3e}, ‖FD‖∞ {:.3e}",
                fd.iter().map(|v| v.abs()).fold(0.0, f64::max)
            ));
        }
    }
    let summary =
        format!("100 states with scatterers, worst ‖g − FD‖∞/max(‖FD‖∞, {GRADIENT_FLOOR:e}) = {worst:.3e} (≤ 1e-4)");
    Ok(report("A7", worst <= 1e-4, summary, details))
}

fn a8(opts: &ValidationOptions) -> Result<CriterionReport> {
    let cfg = OptimizerConfig::default();
    let mut mrt_err = 0.0f64;
    let mut monotone = true;
    let mut power_ok = true;
    let mut runs = 0;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(8_000_000 + trial));
        let n = rng.random_range(1..=4);
        let m = if trial < 50 { 1 } else { rng.random_range(1..=4) };
        let length = rng.random_range(5.0..30.0);
        let s = ScenarioParams {
            num_waveguides: n,
            num_users: m,
            service_length_m: length,
            ..Default::default()
        }
        .multi_scenario(opts.seed.wrapping_add(trial))?;
        let state = random_state(&mut rng, n, m, length, s.total_power_w);
        let h = effective_channel_matrix(&s, &state.feeds, &state.positions)?;
        let starts = [mrt_beams(&h, s.total_power_w), state.beamforming.clone()];
        for init in &starts {
            let out = wmmse_from(&h, s.total_power_w, s.noise_power_w, init, cfg.phase_two_wmmse())?;
            runs += 1;
            monotone &= out.rate_trace.windows(2).all(|w| w[1] >= w[0]);
            let used: f64 = out.beams.iter().map(|c| c.norm_sqr()).sum();
            power_ok &= used <= s.total_power_w * (1.0 + 1e-6);
        }
        if m == 1 {
            let out = wmmse_beamforming(&h, s.total_power_w, s.noise_power_w, &cfg)?;
            let expected = (1.0 + s.total_power_w * h.norm_squared() / s.noise_power_w).log2();
            mrt_err = mrt_err.max((out.sum_rate - expected).abs());
        }
    }
    let passed = mrt_err <= 1e-8 && monotone && power_ok;
    let summary = format!(
        "M=1 error vs full-power MRT {mrt_err:.3e} (≤ 1e-8); {runs} runs: traces nondecreasing {monotone}, power feasible {power_ok}"
    );
    Ok(report("A8", passed, summary, vec![]))
}

fn a9(opts: &ValidationOptions) -> Result<CriterionReport> {
    let cfg = OptimizerConfig::default();
    let outcomes: Vec<(usize, f64, f64, String)> = (0..50u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let n = 1 + (i % 4) as usize;
            let s = ScenarioParams {
                num_waveguides: n,
                num_users: n,
                service_length_m: 10.0,
                ..Default::default()
            }
            .multi_scenario(opts.seed.wrapping_add(9_000 + i))?;
            let greedy = greedy_feed_switching(&s, &cfg)?;
            let mut best = f64::MIN;
            let mut best_feeds = Vec::new();
            for mask in 0..(1u32 << n) {
                let feeds: Vec<Feed> = (0..n)
                    .map(|k| if mask >> k & 1 == 0 { Feed::Left } else { Feed::Right })
                    .collect();
                let (j, _) = phase_one_objective(&s, &feeds, &cfg)?;
                if j > best {
                    best = j;
                    best_feeds = feeds;
                }
            }
            let fmt = |f: &[Feed]| f.iter().map(|x| x.indicator().to_string()).collect::<String>();
            Ok((
                n,
                greedy.sum_rate,
                best,
                format!(
                    "scenario {i} (N={n}): greedy ξ={} J={:.6}, exhaustive ξ={} J={best:.6}",
                    fmt(&greedy.feeds),
                    greedy.sum_rate,
                    fmt(&best_feeds)
                ),
            ))
        })
        .collect::<Result<_>>()?;
    let mut mismatches = [0usize; 5];
    let mut details = Vec::new();
    for (n, greedy, best, line) in &outcomes {
        if *greedy < best - 1e-9 * best.abs().max(1.0) {
            mismatches[*n] += 1;
            details.push(line.clone());
        }
    }
    let total: usize = mismatches.iter().sum();
    let summary = format!(
        "greedy equals 2^N enumeration on {}/50 scenarios (misses by N=1..4: {:?})",
        50 - total,
        &mismatches[1..]
    );
    Ok(report("A9", total == 0, summary, details))
}

const A10_LENGTHS: [f64; 3] = [10.0, 20.0, 30.0];
const A10_SEEDS: u64 = 50;

struct Ordering {
    df_ge_sf: usize,
    df_ge_random: usize,
    df_ge_conventional: usize,
    mean_gap: f64,
}

fn ordering(rates: &[[f64; 4]]) -> Ordering {
    let count = |k: usize| rates.iter().filter(|r| r[0] >= r[k]).count();
    Ordering {
        df_ge_sf: count(1),
        df_ge_random: count(2),
        df_ge_conventional: count(3),
        mean_gap: rates.iter().map(|r| r[0] - r[1]).sum::<f64>() / rates.len() as f64,
    }
}

fn a10(opts: &ValidationOptions) -> Result<CriterionReport> {
    let cfg = OptimizerConfig::default();
    let mut details = Vec::new();
    let mut violations = Vec::new();
    for pipeline in ["single_tdma", "multi_oma"] {
        let mut gaps = Vec::new();
        for &length in &A10_LENGTHS {
            let rates: Vec<[f64; 4]> = (0..A10_SEEDS)
                .into_par_iter()
                .map(|i| -> Result<[f64; 4]> {
                    let seed = opts.seed.wrapping_add(10_000 + i);
                    let mut out = [0.0; 4];
                    if pipeline == "single_tdma" {
                        let s = ScenarioParams {
                            service_length_m: length,
                            transmit_power_dbm: 40.0,
                            ..Default::default()
                        }
                        .single_scenario(seed)?;
                        for (k, scheme) in SchemeId::ALL.into_iter().enumerate() {
                            out[k] = single_tdma(&s, scheme, seed)?.sum_rate;
                        }
                    } else {
                        let s = ScenarioParams {
                            service_length_m: length,
                            ..Default::default()
                        }
                        .multi_scenario(seed)?;
                        for (k, scheme) in SchemeId::ALL.into_iter().enumerate() {
                            out[k] = multi_oma(&s, scheme, &cfg, seed)?.report.sum_rate;
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let o = ordering(&rates);
            let needed = (0.9 * A10_SEEDS as f64).ceil() as usize;
            for (name, count, required) in [
                ("DF≥SF", o.df_ge_sf, A10_SEEDS as usize),
                ("DF≥RANDOM", o.df_ge_random, needed),
                ("DF≥CONVENTIONAL", o.df_ge_conventional, needed),
            ] {
                if count < required {
                    violations.push(format!("{pipeline} L_x={length} {name}"));
                }
            }
            gaps.push(o.mean_gap);
            details.push(format!(
                "{pipeline} L_x={length}: DF≥SF {}/{A10_SEEDS}, DF≥RANDOM {}/{A10_SEEDS}, DF≥CONVENTIONAL {}/{A10_SEEDS}, mean DF−SF {:.4}",
                o.df_ge_sf, o.df_ge_random, o.df_ge_conventional, o.mean_gap
            ));
        }
        let increasing = gaps.windows(2).all(|w| w[1] > w[0]);
        if !increasing {
            violations.push(format!("{pipeline} gap trend"));
        }
        details.push(format!("{pipeline}: mean DF−SF gap increasing in L_x: {increasing}"));
    }
    let summary = if violations.is_empty() {
        format!("ordering holds for single TDMA and multi OMA at L_x ∈ {A10_LENGTHS:?}, {A10_SEEDS} seeds each")
    } else {
        format!("ordering violated: {}", violations.join("; "))
    };
    Ok(report("A10", violations.is_empty(), summary, details))
}
