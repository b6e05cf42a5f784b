//! Seeded Monte Carlo estimates of ergodic rates over uniform user drops.
//!
//! Drop `i` draws from ChaCha8 stream `i` of the configured seed, so a run is
//! bit-identical across thread counts and any split of the drop range into
//! sub-runs reproduces the same samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::multi_wg::{mrt_equal_power_snr, mrt_equal_power_snr_sf, MultiWgScenario};
use crate::phys::Point3;
use crate::single_wg::SingleWgScenario;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub num_drops: usize,
    pub rng_seed: u64,
    pub confidence_level: f64,
    /// Skip the statistical NLoS realization (single waveguide only).
    pub los_only: bool,
    /// Index of the first drop; sub-runs over disjoint ranges pool exactly.
    pub drop_offset: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            num_drops: 100_000,
            rng_seed: 0,
            confidence_level: 0.95,
            los_only: true,
            drop_offset: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_drops == 0 {
            return Err(Error::config("num_drops", "must be at least 1"));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::config(
                "confidence_level",
                format!("must lie in (0, 1), got {}", self.confidence_level),
            ));
        }
        Ok(())
    }

    fn z_score(&self) -> f64 {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        normal.inverse_cdf(0.5 * (1.0 + self.confidence_level))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean_rate: f64,
    /// Sample standard deviation over `√num_drops`.
    pub std_error: f64,
    pub ci_halfwidth: f64,
    pub num_drops: usize,
    pub confidence_level: f64,
}

impl McEstimate {
    /// Combine estimates over disjoint drop sets as if they were one run.
    pub fn pool(parts: &[McEstimate]) -> Result<McEstimate> {
        let first = parts.first().ok_or_else(|| Error::domain("nothing to pool"))?;
        let mut acc = Moments::default();
        for p in parts {
            if p.confidence_level != first.confidence_level {
                return Err(Error::domain("pooled estimates use different confidence levels"));
            }
            let n = p.num_drops as f64;
            let variance = p.std_error * p.std_error * n;
            acc = acc.merge(Moments {
                count: n,
                mean: p.mean_rate,
                m2: variance * (n - 1.0),
            });
        }
        let cfg = McConfig {
            confidence_level: first.confidence_level,
            ..Default::default()
        };
        Ok(acc.estimate(&cfg))
    }
}

/// Which feed serves a user whose PA sits directly above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedRule {
    /// Dual feeding: the nearer end.
    Nearest,
    /// Single feeding: always the left end.
    Left,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        if other.count == 0.0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }

    fn estimate(&self, cfg: &McConfig) -> McEstimate {
        let variance = if self.count > 1.0 {
            self.m2 / (self.count - 1.0)
        } else {
            0.0
        };
        let std_error = (variance / self.count).sqrt();
        McEstimate {
            mean_rate: self.mean,
            std_error,
            ci_halfwidth: cfg.z_score() * std_error,
            num_drops: self.count as usize,
            confidence_level: cfg.confidence_level,
        }
    }
}

fn run<F>(cfg: &McConfig, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let base = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let chunks = cfg.num_drops.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(cfg.num_drops);
            let mut acc = Moments::default();
            for i in start..end {
                let mut rng = base.clone();
                rng.set_stream(cfg.drop_offset + i as u64);
                acc.push(sample(&mut rng)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    if !total.mean.is_finite() {
        return Err(Error::Numerical("Monte Carlo mean is not finite".into()));
    }
    Ok(total.estimate(cfg))
}

/// Ergodic rate `E[log2(1 + γ)]` of the single-waveguide system with the PA
/// directly above a uniformly dropped user. Unless `los_only`, each drop adds
/// one statistical NLoS realization to the LoS coefficient.
pub fn mc_ergodic_rate_single(scenario: &SingleWgScenario, rule: FeedRule, cfg: &McConfig) -> Result<McEstimate> {
    scenario.validate()?;
    let g = &scenario.geometry;
    let (length, width) = (g.service_length_m, g.service_width_m);
    let eta_sqrt = scenario.carrier.los_constant().sqrt();
    let scale = scenario.injected_power_w / scenario.noise_power_w;
    run(cfg, |rng| {
        let user = Point3::ground(rng.random_range(0.0..=length), rng.random_range(0.0..=width));
        let z = match rule {
            FeedRule::Nearest => user.x_m.min(length - user.x_m),
            FeedRule::Left => user.x_m,
        };
        let r = scenario.lateral_distance_sq(&user).sqrt();
        let gain = if cfg.los_only {
            (eta_sqrt / r).powi(2)
        } else {
            // The LoS phase is immaterial against a circularly symmetric
            // NLoS draw, so the LoS term is taken real.
            (scenario.nlos.sample(r, rng)? + eta_sqrt / r).norm_sqr()
        };
        Ok((1.0 + scale * scenario.alpha.power_ratio(z) * gain).log2())
    })
}

/// Ergodic per-user rate of the multi-waveguide LoS model with every PA above
/// the user, equal per-waveguide power and MRT. Scatterers in `scenario` and
/// `los_only` are ignored.
pub fn mc_ergodic_rate_multi(scenario: &MultiWgScenario, rule: FeedRule, cfg: &McConfig) -> Result<McEstimate> {
    scenario.validate()?;
    let g = &scenario.geometry;
    let (length, width) = (g.service_length_m, g.service_width_m);
    run(cfg, |rng| {
        let user = Point3::ground(rng.random_range(0.0..=length), rng.random_range(0.0..=width));
        let snr = match rule {
            FeedRule::Nearest => mrt_equal_power_snr(&user, scenario),
            FeedRule::Left => mrt_equal_power_snr_sf(&user, scenario),
        };
        Ok((1.0 + snr).log2())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioParams;
    use crate::single_wg::{ergodic_rate_df_closed, ergodic_rate_sf_closed};

    fn single(length: f64, width: f64) -> SingleWgScenario {
        ScenarioParams {
            service_length_m: length,
            service_width_m: width,
            num_users: 0,
            ..Default::default()
        }
        .single_scenario(0)
        .unwrap()
    }

    #[test]
    fn rerun_is_bit_identical_across_thread_counts() {
        let s = single(10.0, 10.0);
        let cfg = McConfig {
            num_drops: 20_000,
            rng_seed: 17,
            ..Default::default()
        };
        let a = mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg).unwrap());
        assert_eq!(a, b);
        let other = McConfig { rng_seed: 18, ..cfg };
        assert_ne!(a, mc_ergodic_rate_single(&s, FeedRule::Nearest, &other).unwrap());
    }

    #[test]
    fn split_runs_pool_to_the_full_run() {
        let s = single(15.0, 6.0);
        let full = McConfig {
            num_drops: 30_000,
            rng_seed: 3,
            ..Default::default()
        };
        let first = McConfig {
            num_drops: 12_345,
            ..full.clone()
        };
        let second = McConfig {
            num_drops: 30_000 - 12_345,
            drop_offset: 12_345,
            ..full.clone()
        };
        let whole = mc_ergodic_rate_single(&s, FeedRule::Left, &full).unwrap();
        let parts = [
            mc_ergodic_rate_single(&s, FeedRule::Left, &first).unwrap(),
            mc_ergodic_rate_single(&s, FeedRule::Left, &second).unwrap(),
        ];
        let pooled = McEstimate::pool(&parts).unwrap();
        assert_eq!(pooled.num_drops, whole.num_drops);
        assert!((pooled.mean_rate - whole.mean_rate).abs() < 1e-12);
        assert!((pooled.std_error / whole.std_error - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ci_shrinks_as_inverse_sqrt_of_drops() {
        let s = single(10.0, 10.0);
        let small = McConfig {
            num_drops: 10_000,
            rng_seed: 5,
            ..Default::default()
        };
        let large = McConfig {
            num_drops: 40_000,
            ..small.clone()
        };
        let a = mc_ergodic_rate_single(&s, FeedRule::Nearest, &small).unwrap();
        let b = mc_ergodic_rate_single(&s, FeedRule::Nearest, &large).unwrap();
        assert!((a.ci_halfwidth / b.ci_halfwidth / 2.0 - 1.0).abs() < 0.15);
        // z(0.95) = 1.959964
        assert!((a.ci_halfwidth / a.std_error - 1.959_964).abs() < 1e-5);
    }

    #[test]
    fn dual_feed_matches_closed_form_at_high_snr() {
        let cfg = McConfig {
            num_drops: 200_000,
            rng_seed: 11,
            ..Default::default()
        };
        for length in [5.0, 20.0] {
            let s = single(length, 10.0);
            let df = mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg).unwrap();
            let sf = mc_ergodic_rate_single(&s, FeedRule::Left, &cfg).unwrap();
            let tol = |e: &McEstimate| 0.05f64.max(e.ci_halfwidth);
            assert!((df.mean_rate - ergodic_rate_df_closed(&s)).abs() <= tol(&df), "{df:?}");
            assert!((sf.mean_rate - ergodic_rate_sf_closed(&s)).abs() <= tol(&sf), "{sf:?}");
        }
    }

    #[test]
    fn lossless_feeds_agree() {
        let mut p = ScenarioParams {
            attenuation_db_per_m: Some(0.0),
            num_users: 0,
            ..Default::default()
        };
        p.service_length_m = 25.0;
        let s = p.single_scenario(0).unwrap();
        let cfg = McConfig {
            num_drops: 50_000,
            los_only: false,
            ..Default::default()
        };
        let df = mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg).unwrap();
        let sf = mc_ergodic_rate_single(&s, FeedRule::Left, &cfg).unwrap();
        assert!((df.mean_rate - sf.mean_rate).abs() <= 2.0 * df.ci_halfwidth.max(sf.ci_halfwidth));
    }

    #[test]
    fn nlos_realizations_perturb_rate_mildly() {
        // The NLoS power is κ = 0.1 of the LoS power.
        let s = single(10.0, 6.0);
        let cfg = McConfig {
            num_drops: 50_000,
            ..Default::default()
        };
        let los = mc_ergodic_rate_single(&s, FeedRule::Nearest, &cfg).unwrap();
        let nlos = mc_ergodic_rate_single(&s, FeedRule::Nearest, &McConfig { los_only: false, ..cfg }).unwrap();
        assert!(nlos.mean_rate.is_finite());
        assert!((nlos.mean_rate - los.mean_rate).abs() < 1.0);
    }

    #[test]
    fn one_waveguide_multi_matches_single_with_half_width() {
        // With the waveguide at L_y/2, |y - L_y/2| is uniform on [0, L_y/2].
        let multi = ScenarioParams {
            num_waveguides: 1,
            num_users: 0,
            num_scatterers: 0,
            service_width_m: 8.0,
            ..Default::default()
        }
        .multi_scenario(0)
        .unwrap();
        let s = single(10.0, 4.0);
        let cfg = McConfig {
            num_drops: 100_000,
            ..Default::default()
        };
        let a = mc_ergodic_rate_multi(&multi, FeedRule::Nearest, &cfg).unwrap();
        let b = mc_ergodic_rate_single(&s, FeedRule::Nearest, &McConfig { rng_seed: 1, ..cfg }).unwrap();
        let tol = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean_rate - b.mean_rate).abs() <= tol, "{a:?} {b:?}");
    }

    #[test]
    fn zero_drops_rejected() {
        let cfg = McConfig {
            num_drops: 0,
            ..Default::default()
        };
        match mc_ergodic_rate_single(&single(10.0, 6.0), FeedRule::Left, &cfg) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "num_drops"),
            other => panic!("{other:?}"),
        }
    }
}
