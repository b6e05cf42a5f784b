//! Single dual-fed waveguide serving users in TDMA.
//!
//! The waveguide runs along the service-area edge at `y = 0`, height `d`,
//! with feeds at `x = 0` (left) and `x = L_x` (right). One PA is placed per
//! time slot.

use std::f64::consts::{LN_2, LOG2_E};

use serde::{Deserialize, Serialize};

use crate::channel::{Feed, StatisticalNlosModel};
use crate::error::{Error, Result};
use crate::phys::{AttenuationCoefficient, CarrierConfig, Point3, SystemGeometry};

/// High-SNR closed forms are flagged below this area-minimum SNR (10 dB).
pub const HIGH_SNR_WARNING_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleWgScenario {
    /// Service rectangle and waveguide height. `num_waveguides` is 1; the
    /// waveguide lies at `y = 0`, not at `geometry.waveguide_y(0)`.
    pub geometry: SystemGeometry,
    pub carrier: CarrierConfig,
    pub alpha: AttenuationCoefficient,
    pub injected_power_w: f64,
    pub noise_power_w: f64,
    pub users: Vec<Point3>,
    /// NLoS statistics shared by every user.
    pub nlos: StatisticalNlosModel,
}

impl SingleWgScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.geometry.num_waveguides != 1 {
            return Err(Error::domain("single-waveguide scenario needs num_waveguides = 1"));
        }
        for (name, v) in [
            ("injected power", self.injected_power_w),
            ("noise power", self.noise_power_w),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (m, u) in self.users.iter().enumerate() {
            if u.z_m != 0.0 || !self.geometry.contains_ground_point(u) {
                return Err(Error::domain(format!("user {m} at {u:?} is outside the service area")));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.geometry.service_length_m
    }

    /// `P0 η / σ²`.
    pub fn snr_scale(&self) -> f64 {
        self.injected_power_w * self.carrier.los_constant() / self.noise_power_w
    }

    /// Effective channel coefficient `η_m = η + μ_m`.
    pub fn effective_gain_constant(&self) -> f64 {
        self.carrier.los_constant() + self.nlos.aggregate()
    }

    /// `D_m = y_m² + d²`.
    pub fn lateral_distance_sq(&self, user: &Point3) -> f64 {
        let d = self.geometry.waveguide_height_m;
        user.y_m * user.y_m + d * d
    }

    pub fn pa_point(&self, x_pin: f64) -> Point3 {
        Point3::new(x_pin, 0.0, self.geometry.waveguide_height_m)
    }

    /// Average SNR of `user` with the PA at `x_pin` fed from `feed`, LoS plus
    /// the aggregate NLoS power:
    /// `(P0 η_m / σ²) e^{-α z} / ((x_pin - x_m)² + D_m)`.
    pub fn snr_at(&self, user: &Point3, x_pin: f64, feed: Feed) -> f64 {
        let z = feed.guided_distance(x_pin, self.length());
        let dx = x_pin - user.x_m;
        self.injected_power_w * self.effective_gain_constant() / self.noise_power_w * self.alpha.power_ratio(z)
            / (dx * dx + self.lateral_distance_sq(user))
    }
}

/// LoS SNR with the PA directly above the user and the nearer feed active.
pub fn snr_df_nearest(user: &Point3, scenario: &SingleWgScenario) -> f64 {
    let l = scenario.length();
    let z = user.x_m.min(l - user.x_m);
    scenario.snr_scale() * scenario.alpha.power_ratio(z) / scenario.lateral_distance_sq(user)
}

/// LoS SNR with the PA above the user and the left feed always active.
pub fn snr_sf_left(user: &Point3, scenario: &SingleWgScenario) -> f64 {
    scenario.snr_scale() * scenario.alpha.power_ratio(user.x_m) / scenario.lateral_distance_sq(user)
}

/// Mean over `y ~ U[0, L_y]` of `log2(y² + d²)`.
fn mean_log2_lateral(width: f64, height: f64) -> f64 {
    (width * width + height * height).log2() - 2.0 / LN_2 * (1.0 - height / width * (width / height).atan())
}

/// High-SNR ergodic rate with nearest-feed selection.
pub fn ergodic_rate_df_closed(scenario: &SingleWgScenario) -> f64 {
    let g = &scenario.geometry;
    scenario.snr_scale().log2()
        - 0.25 * scenario.alpha.nepers_per_meter() * g.service_length_m * LOG2_E
        - mean_log2_lateral(g.service_width_m, g.waveguide_height_m)
}

/// High-SNR ergodic rate of the single-fed baseline (left feed only).
pub fn ergodic_rate_sf_closed(scenario: &SingleWgScenario) -> f64 {
    let g = &scenario.geometry;
    scenario.snr_scale().log2()
        - 0.5 * scenario.alpha.nepers_per_meter() * g.service_length_m * LOG2_E
        - mean_log2_lateral(g.service_width_m, g.waveguide_height_m)
}

/// Ergodic-rate gain of dual feeding over single feeding: `(α L_x / 4) log2 e`.
pub fn rate_gain_df_over_sf(alpha: AttenuationCoefficient, length_m: f64) -> f64 {
    0.25 * alpha.nepers_per_meter() * length_m * LOG2_E
}

/// Diagnostic for the high-SNR closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrDiagnostic {
    /// Worst-case LoS SNR over the area with nearest-feed selection.
    pub min_area_snr_df: f64,
    /// Worst-case LoS SNR over the area with the left feed only.
    pub min_area_snr_sf: f64,
}

impl HighSnrDiagnostic {
    pub fn df_stretched(&self) -> bool {
        self.min_area_snr_df < HIGH_SNR_WARNING_THRESHOLD
    }

    pub fn sf_stretched(&self) -> bool {
        self.min_area_snr_sf < HIGH_SNR_WARNING_THRESHOLD
    }
}

pub fn high_snr_diagnostic(scenario: &SingleWgScenario) -> HighSnrDiagnostic {
    let g = &scenario.geometry;
    let far = g.service_width_m * g.service_width_m + g.waveguide_height_m * g.waveguide_height_m;
    let diag = HighSnrDiagnostic {
        min_area_snr_df: scenario.snr_scale() * scenario.alpha.power_ratio(0.5 * g.service_length_m) / far,
        min_area_snr_sf: scenario.snr_scale() * scenario.alpha.power_ratio(g.service_length_m) / far,
    };
    if diag.df_stretched() {
        log::warn!(
            "area-minimum SNR {:.2} dB is below 10 dB; high-SNR closed form is stretched",
            10.0 * diag.min_area_snr_df.log10()
        );
    }
    diag
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaPlacementResult {
    pub x_star_m: f64,
    pub feed: Feed,
    pub achieved_snr: f64,
    /// The optimum sits at the active feed (`x* = 0` left, `x* = L_x` right).
    pub boundary_case: bool,
}

/// Maximizer over `x ∈ [0, L]` of `e^{-αx} / ((x - x_m)² + D)` for a left
/// feed. Returns `(x*, at_boundary)`.
///
/// The stationary points are `x_m + t` with `α t² + 2t + αD = 0`; the larger
/// root is the only local maximum and the smaller one a local minimum. When
/// `x = 0` falls left of the local minimum both candidates must be compared.
fn left_feed_optimum(x_m: f64, lateral_sq: f64, alpha: f64, length: f64) -> (f64, bool) {
    if alpha == 0.0 {
        return (x_m, x_m == 0.0);
    }
    let disc = 1.0 - alpha * alpha * lateral_sq;
    if disc <= 0.0 {
        // No stationary point: the objective decreases on the whole line.
        return (0.0, true);
    }
    let root = disc.sqrt();
    let interior = x_m + (-1.0 + root) / alpha;
    if interior <= 0.0 {
        return (0.0, true);
    }
    let objective = |x: f64| (-alpha * x).exp() / ((x - x_m).powi(2) + lateral_sq);
    let threshold_says_boundary = lateral_sq >= x_m * (2.0 - alpha * x_m) / alpha;
    let boundary_left_of_min = x_m + (-1.0 - root) / alpha >= 0.0;
    debug_assert!(
        !threshold_says_boundary || boundary_left_of_min,
        "threshold and root ordering disagree"
    );
    let x = interior.min(length);
    if boundary_left_of_min && objective(0.0) > objective(x) {
        (0.0, true)
    } else {
        (x, false)
    }
}

/// SNR-maximizing PA coordinate for `user` when `feed` is active.
pub fn optimal_pa_position(user: &Point3, feed: Feed, scenario: &SingleWgScenario) -> PaPlacementResult {
    let l = scenario.length();
    let alpha = scenario.alpha.nepers_per_meter();
    let lateral = scenario.lateral_distance_sq(user);
    let (x_star, boundary_case) = match feed {
        Feed::Left => left_feed_optimum(user.x_m, lateral, alpha, l),
        Feed::Right => {
            let (mirrored, b) = left_feed_optimum(l - user.x_m, lateral, alpha, l);
            (l - mirrored, b)
        }
    };
    let x_star = x_star.clamp(0.0, l);
    PaPlacementResult {
        x_star_m: x_star,
        feed,
        achieved_snr: scenario.snr_at(user, x_star, feed),
        boundary_case,
    }
}

/// Nearer feed for a PA at `x_pin`; the midpoint goes to the left feed.
pub fn select_feed_per_user(x_pin: f64, length_m: f64) -> Feed {
    if x_pin <= 0.5 * length_m {
        Feed::Left
    } else {
        Feed::Right
    }
}

/// Outcome of selecting one feed for the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedFeedSelection {
    pub feed: Feed,
    pub left_sum_rate: f64,
    pub right_sum_rate: f64,
    /// Per-user optimal placements under the selected feed.
    pub placements: Vec<PaPlacementResult>,
}

/// Choose one feed for all users by comparing the TDMA sum rates reached with
/// per-user optimal placements under each feed. Ties go left.
pub fn select_feed_fixed(scenario: &SingleWgScenario) -> Result<FixedFeedSelection> {
    if scenario.users.is_empty() {
        return Err(Error::domain("feed selection needs at least one user"));
    }
    let place = |feed| -> Vec<PaPlacementResult> {
        scenario
            .users
            .iter()
            .map(|u| optimal_pa_position(u, feed, scenario))
            .collect()
    };
    let left = place(Feed::Left);
    let right = place(Feed::Right);
    let left_sum_rate = tdma_sum_rate(scenario, &left)?;
    let right_sum_rate = tdma_sum_rate(scenario, &right)?;
    let (feed, placements) = if left_sum_rate >= right_sum_rate {
        (Feed::Left, left)
    } else {
        (Feed::Right, right)
    };
    Ok(FixedFeedSelection {
        feed,
        left_sum_rate,
        right_sum_rate,
        placements,
    })
}

/// Equal-share TDMA sum rate `(1/M) Σ log2(1 + γ_m)`.
pub fn tdma_sum_rate(scenario: &SingleWgScenario, placements: &[PaPlacementResult]) -> Result<f64> {
    if placements.len() != scenario.users.len() {
        return Err(Error::Dimension(format!(
            "{} placements for {} users",
            placements.len(),
            scenario.users.len()
        )));
    }
    if placements.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = scenario
        .users
        .iter()
        .zip(placements)
        .map(|(u, p)| (1.0 + scenario.snr_at(u, p.x_star_m, p.feed)).log2())
        .sum();
    Ok(total / placements.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::{dbm_to_watts, dielectric_attenuation, WaveguideMaterial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(length: f64, width: f64, users: Vec<Point3>) -> SingleWgScenario {
        let carrier = CarrierConfig::new(28e9).unwrap();
        SingleWgScenario {
            geometry: SystemGeometry::new(length, width, 1.5, 1).unwrap(),
            carrier,
            alpha: dielectric_attenuation(WaveguideMaterial::PTFE, carrier).unwrap(),
            injected_power_w: dbm_to_watts(30.0),
            noise_power_w: dbm_to_watts(-90.0),
            users,
            nlos: StatisticalNlosModel::none(),
        }
    }

    fn with_alpha(mut s: SingleWgScenario, alpha: f64) -> SingleWgScenario {
        s.alpha = AttenuationCoefficient::from_nepers_per_meter(alpha).unwrap();
        s
    }

    /// Brute-force maximizer of the placement SNR on a uniform grid.
    fn grid_optimum(s: &SingleWgScenario, user: &Point3, feed: Feed, step: f64) -> (f64, f64) {
        let n = (s.length() / step).round() as usize;
        (0..=n)
            .map(|i| (i as f64 * step).min(s.length()))
            .map(|x| (x, s.snr_at(user, x, feed)))
            .fold((0.0, f64::MIN), |best, c| if c.1 > best.1 { c } else { best })
    }

    #[test]
    fn snr_nearest_examples() {
        let s = scenario(10.0, 10.0, vec![]);
        let mid_a = snr_df_nearest(&Point3::ground(5.0, 3.0), &s);
        let lossless = with_alpha(s.clone(), 0.0);
        assert_eq!(
            snr_df_nearest(&Point3::ground(1.0, 3.0), &lossless),
            snr_df_nearest(&Point3::ground(8.0, 3.0), &lossless)
        );
        assert!(mid_a > 0.0);
        // P0 η / σ² = 7.2597e5, divided by d² = 2.25.
        let g = snr_df_nearest(&Point3::ground(0.0, 0.0), &s);
        assert!((g - 3.2265e5).abs() / 3.2265e5 < 1e-4, "{g}");
    }

    #[test]
    fn snr_nearest_symmetric_at_midpoint() {
        let s = scenario(12.0, 10.0, vec![]);
        let u = Point3::ground(6.0, 4.0);
        let l = s.snr_at(&u, 6.0, Feed::Left);
        let r = s.snr_at(&u, 6.0, Feed::Right);
        assert_eq!(l, r);
    }

    #[test]
    fn dual_feed_closed_form_reference_value() {
        let s = scenario(10.0, 10.0, vec![]);
        let rate = ergodic_rate_df_closed(&s);
        // log2(7.2597e5) - 1.2277 - (log2(102.25) - 2.2700)
        assert!((rate - 13.84).abs() < 0.01, "{rate}");
    }

    #[test]
    fn closed_forms_coincide_without_loss() {
        let s = with_alpha(scenario(20.0, 8.0, vec![]), 0.0);
        assert_eq!(ergodic_rate_df_closed(&s), ergodic_rate_sf_closed(&s));
        assert_eq!(rate_gain_df_over_sf(s.alpha, 20.0), 0.0);
    }

    #[test]
    fn attenuation_term_is_linear_in_length() {
        let a = scenario(10.0, 10.0, vec![]);
        let b = scenario(13.0, 10.0, vec![]);
        let drop = ergodic_rate_df_closed(&a) - ergodic_rate_df_closed(&b);
        let expected = 0.25 * a.alpha.nepers_per_meter() * 3.0 * LOG2_E;
        assert!((drop - expected).abs() < 1e-12);
    }

    #[test]
    fn rate_gain_examples() {
        let alpha = AttenuationCoefficient::from_nepers_per_meter(0.34037).unwrap();
        assert!((rate_gain_df_over_sf(alpha, 10.0) - 1.2277).abs() < 1e-4);
        assert!((rate_gain_df_over_sf(alpha, 15.0) - 1.8415).abs() < 1e-3);
        let g1 = rate_gain_df_over_sf(alpha, 7.0);
        assert!((rate_gain_df_over_sf(alpha, 14.0) - 2.0 * g1).abs() < 1e-12);
        let s = scenario(15.0, 10.0, vec![]);
        assert!(
            (ergodic_rate_df_closed(&s) - ergodic_rate_sf_closed(&s) - rate_gain_df_over_sf(s.alpha, 15.0)).abs()
                < 1e-12
        );
    }

    #[test]
    fn placement_examples_against_grid() {
        let s = with_alpha(scenario(10.0, 10.0, vec![]), 0.34037);
        // The threshold rule alone would put this PA at the feed; the
        // interior stationary point is better.
        let u = Point3::ground(5.0, 2.0);
        let p = optimal_pa_position(&u, Feed::Left, &s);
        let (gx, gsnr) = grid_optimum(&s, &u, Feed::Left, 1e-4);
        assert!((p.x_star_m - 3.6053).abs() < 1e-3, "{p:?}");
        assert!((p.x_star_m - gx).abs() < 1e-3);
        assert!(p.achieved_snr >= gsnr * (1.0 - 1e-9));
        assert!(!p.boundary_case);

        let u = Point3::ground(5.0, 0.5);
        let p = optimal_pa_position(&u, Feed::Left, &s);
        assert!((p.x_star_m - 4.538).abs() < 1e-3, "{p:?}");
        let (gx, _) = grid_optimum(&s, &u, Feed::Left, 1e-4);
        assert!((p.x_star_m - gx).abs() < 1e-3);
    }

    #[test]
    fn placement_boundary_when_user_near_feed() {
        let s = with_alpha(scenario(10.0, 10.0, vec![]), 0.34037);
        // Interior root lies left of the feed.
        let u = Point3::ground(0.3, 2.0);
        let p = optimal_pa_position(&u, Feed::Left, &s);
        assert_eq!(p.x_star_m, 0.0);
        assert!(p.boundary_case);
        // α²D >= 1: no stationary point.
        let u = Point3::ground(6.0, 9.5);
        let p = optimal_pa_position(&u, Feed::Left, &s);
        assert_eq!(p.x_star_m, 0.0);
    }

    #[test]
    fn placement_small_alpha_limit() {
        let u = Point3::ground(3.7, 1.0);
        for alpha in [1e-3, 1e-5, 1e-7] {
            let s = with_alpha(scenario(10.0, 10.0, vec![]), alpha);
            let p = optimal_pa_position(&u, Feed::Left, &s);
            assert!((p.x_star_m - 3.7).abs() < 10.0 * alpha, "{alpha}: {p:?}");
        }
        let s = with_alpha(scenario(10.0, 10.0, vec![]), 0.0);
        assert_eq!(optimal_pa_position(&u, Feed::Left, &s).x_star_m, 3.7);
    }

    #[test]
    fn right_feed_mirrors_left() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let l = rng.random_range(2.0..30.0);
            let s = scenario(l, 8.0, vec![]);
            let u = Point3::ground(rng.random_range(0.0..l), rng.random_range(0.0..8.0));
            let mirrored = Point3::ground(l - u.x_m, u.y_m);
            let right = optimal_pa_position(&u, Feed::Right, &s);
            let left = optimal_pa_position(&mirrored, Feed::Left, &s);
            assert!((right.x_star_m - (l - left.x_star_m)).abs() < 1e-9);
            assert!((right.achieved_snr / left.achieved_snr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn per_user_feed_rule() {
        assert_eq!(select_feed_per_user(0.0, 10.0), Feed::Left);
        assert_eq!(select_feed_per_user(10.0, 10.0), Feed::Right);
        assert_eq!(select_feed_per_user(5.0, 10.0), Feed::Left);
    }

    #[test]
    fn fixed_feed_dominance_and_ties() {
        let users = vec![
            Point3::ground(1.0, 0.0),
            Point3::ground(3.0, 0.0),
            Point3::ground(4.9, 0.0),
        ];
        let sel = select_feed_fixed(&scenario(10.0, 5.0, users)).unwrap();
        assert_eq!(sel.feed, Feed::Left);
        assert!(sel.left_sum_rate >= sel.right_sum_rate);

        let users = vec![
            Point3::ground(1.5, 2.0),
            Point3::ground(8.5, 2.0),
            Point3::ground(3.0, 4.0),
            Point3::ground(7.0, 4.0),
        ];
        let sel = select_feed_fixed(&scenario(10.0, 5.0, users)).unwrap();
        assert!((sel.left_sum_rate - sel.right_sum_rate).abs() < 1e-12);
        assert_eq!(sel.feed, Feed::Left);

        assert!(select_feed_fixed(&scenario(10.0, 5.0, vec![])).is_err());
    }

    #[test]
    fn fixed_feed_agrees_with_per_user_for_one_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let l = rng.random_range(2.0..30.0);
            let w = rng.random_range(1.0..10.0);
            let u = Point3::ground(rng.random_range(0.0..l), rng.random_range(0.0..w));
            let s = scenario(l, w, vec![u]);
            let sel = select_feed_fixed(&s).unwrap();
            let left = optimal_pa_position(&u, Feed::Left, &s);
            let right = optimal_pa_position(&u, Feed::Right, &s);
            let best = if left.achieved_snr >= right.achieved_snr {
                left
            } else {
                right
            };
            assert_eq!(select_feed_per_user(best.x_star_m, l), sel.feed, "{u:?} L={l}");
        }
    }

    #[test]
    fn fixed_feed_reports_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let users = (0..4)
                .map(|_| Point3::ground(rng.random_range(0.0..15.0), rng.random_range(0.0..6.0)))
                .collect();
            let sel = select_feed_fixed(&scenario(15.0, 6.0, users)).unwrap();
            let expected = if sel.left_sum_rate >= sel.right_sum_rate {
                Feed::Left
            } else {
                Feed::Right
            };
            assert_eq!(sel.feed, expected);
        }
    }

    #[test]
    fn tdma_examples() {
        let u = Point3::ground(2.0, 1.0);
        let s1 = scenario(10.0, 5.0, vec![u]);
        let p = optimal_pa_position(&u, Feed::Left, &s1);
        let single = tdma_sum_rate(&s1, &[p]).unwrap();
        assert!((single - (1.0 + p.achieved_snr).log2()).abs() < 1e-12);

        let s2 = scenario(10.0, 5.0, vec![u, u]);
        assert!((tdma_sum_rate(&s2, &[p, p]).unwrap() - single).abs() < 1e-12);

        let mirrored = Point3::ground(8.0, 1.0);
        let s3 = scenario(10.0, 5.0, vec![u, mirrored]);
        let q = optimal_pa_position(&mirrored, Feed::Right, &s3);
        assert!((tdma_sum_rate(&s3, &[p, q]).unwrap() - single).abs() < 1e-12);

        assert!(matches!(tdma_sum_rate(&s3, &[p]), Err(Error::Dimension(_))));
    }

    #[test]
    fn tdma_uses_nlos_aggregate() {
        let u = Point3::ground(2.0, 1.0);
        let mut s = scenario(10.0, 5.0, vec![u]);
        let eta = s.carrier.los_constant();
        s.nlos = StatisticalNlosModel::equal_weights(10, 0.1 * eta).unwrap();
        let p = optimal_pa_position(&u, Feed::Left, &s);
        let bare = scenario(10.0, 5.0, vec![u]);
        let ratio = p.achieved_snr / bare.snr_at(&u, p.x_star_m, Feed::Left);
        assert!((ratio - 1.1).abs() < 1e-12);
    }

    #[test]
    fn diagnostic_flags_low_snr() {
        let s = scenario(10.0, 10.0, vec![]);
        assert!(!high_snr_diagnostic(&s).df_stretched());
        let mut weak = s.clone();
        weak.injected_power_w = dbm_to_watts(-10.0);
        assert!(high_snr_diagnostic(&weak).df_stretched());
        let long = scenario(30.0, 10.0, vec![]);
        let d = high_snr_diagnostic(&long);
        assert!(d.sf_stretched() && !d.df_stretched());
    }

    #[test]
    fn validation_rejects_outside_users() {
        let s = scenario(10.0, 5.0, vec![Point3::ground(11.0, 1.0)]);
        assert!(s.validate().is_err());
        let s = scenario(10.0, 5.0, vec![Point3::ground(1.0, 1.0)]);
        assert!(s.validate().is_ok());
    }
}
