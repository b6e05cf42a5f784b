//! N parallel dual-fed waveguides, one PA each, jointly serving M users.
//!
//! Matrices are `N × M`: row `n` is a waveguide, column `m` a user. The
//! channel matrix holds `h̃_{n,m}` and the beamforming matrix holds
//! `p_{n,m}`, so column `m` is the beam `p_m`. User `m` receives
//! `h̃_mᴴ p_m` as its useful signal.

use std::f64::consts::LOG2_E;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    geometric_nlos_with_derivative, in_waveguide_response_with_derivative, los_gain_with_derivative, Feed,
    ScattererField, WaveguideSpec, WithDerivative,
};
use crate::error::{Error, Result};
use crate::phys::{CarrierConfig, Point3, SystemGeometry};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiWgScenario {
    pub geometry: SystemGeometry,
    pub carrier: CarrierConfig,
    /// Shared by all waveguides; `length_m` equals the service length.
    pub waveguide: WaveguideSpec,
    pub total_power_w: f64,
    pub noise_power_w: f64,
    pub users: Vec<Point3>,
    pub scatterers: ScattererField,
}

impl MultiWgScenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if (self.waveguide.length_m - self.geometry.service_length_m).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "waveguide length {} differs from service length {}",
                self.waveguide.length_m, self.geometry.service_length_m
            )));
        }
        for (name, v) in [("total power", self.total_power_w), ("noise power", self.noise_power_w)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (m, u) in self.users.iter().enumerate() {
            if u.z_m != 0.0 || !self.geometry.contains_ground_point(u) {
                return Err(Error::domain(format!("user {m} at {u:?} is outside the service area")));
            }
        }
        if !self.scatterers.within(&self.geometry) {
            return Err(Error::domain("scatterer outside the service area"));
        }
        Ok(())
    }

    pub fn num_waveguides(&self) -> usize {
        self.geometry.num_waveguides
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn length(&self) -> f64 {
        self.geometry.service_length_m
    }

    /// Copy of the scenario with every scatterer removed.
    pub fn los_only(&self) -> Self {
        Self {
            scatterers: ScattererField::empty(),
            ..self.clone()
        }
    }
}

/// Feed selection `ξ`, PA positions `x` and beams `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub feeds: Vec<Feed>,
    pub positions: Vec<f64>,
    pub beamforming: CMatrix,
}

impl NetworkState {
    /// Total transmit power `Σ_m ||p_m||²`.
    pub fn total_power(&self) -> f64 {
        self.beamforming.iter().map(|p| p.norm_sqr()).sum()
    }

    /// Checks the power budget, binary feeds (by type) and PA ranges.
    pub fn validate(&self, scenario: &MultiWgScenario) -> Result<()> {
        let n = scenario.num_waveguides();
        let m = scenario.num_users();
        if self.feeds.len() != n || self.positions.len() != n {
            return Err(Error::Dimension(format!(
                "state has {} feeds and {} positions for {n} waveguides",
                self.feeds.len(),
                self.positions.len()
            )));
        }
        if self.beamforming.shape() != (n, m) {
            return Err(Error::Dimension(format!(
                "beamforming is {:?}, expected ({n}, {m})",
                self.beamforming.shape()
            )));
        }
        let l = scenario.length();
        if let Some(x) = self
            .positions
            .iter()
            .find(|x| !(x.is_finite() && (0.0..=l).contains(*x)))
        {
            return Err(Error::domain(format!("PA position {x} outside [0, {l}]")));
        }
        if self.total_power() > scenario.total_power_w + 1e-9 {
            return Err(Error::domain(format!(
                "beam power {} exceeds budget {}",
                self.total_power(),
                scenario.total_power_w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
}

impl RateReport {
    pub fn from_sinr(per_user_sinr: Vec<f64>) -> Self {
        let per_user_rate: Vec<f64> = per_user_sinr.iter().map(|g| (1.0 + g).log2()).collect();
        let sum_rate = per_user_rate.iter().sum();
        Self {
            per_user_sinr,
            per_user_rate,
            sum_rate,
        }
    }
}

/// Composite coefficient `ν_n (h^LoS + h^NLoS)` and its `x_n`-derivative.
pub(crate) fn entry_with_derivative(
    scenario: &MultiWgScenario,
    n: usize,
    feed: Feed,
    x_pin: f64,
    user: &Point3,
) -> Result<WithDerivative> {
    let pa = scenario.geometry.pa_point(n, x_pin);
    let nu = in_waveguide_response_with_derivative(feed, x_pin, &scenario.waveguide, &scenario.carrier)?;
    let radio = los_gain_with_derivative(pa, *user, &scenario.carrier)?
        + geometric_nlos_with_derivative(pa, *user, &scenario.scatterers, &scenario.carrier)?;
    Ok(nu.mul(radio))
}

fn check_lengths(scenario: &MultiWgScenario, feeds: &[Feed], positions: &[f64]) -> Result<()> {
    let n = scenario.num_waveguides();
    if feeds.len() != n || positions.len() != n {
        return Err(Error::Dimension(format!(
            "{} feeds and {} positions for {n} waveguides",
            feeds.len(),
            positions.len()
        )));
    }
    Ok(())
}

/// `N × M` matrix of `h̃_{n,m} = ν_n(ξ_n, x_n) (h^LoS_{n,m} + h^NLoS_{n,m})`.
pub fn effective_channel_matrix(scenario: &MultiWgScenario, feeds: &[Feed], positions: &[f64]) -> Result<CMatrix> {
    Ok(channel_matrix_with_derivative(scenario, feeds, positions)?.0)
}

/// Channel matrix and the entrywise derivative `∂h̃_{n,m}/∂x_n`.
pub fn channel_matrix_with_derivative(
    scenario: &MultiWgScenario,
    feeds: &[Feed],
    positions: &[f64],
) -> Result<(CMatrix, CMatrix)> {
    check_lengths(scenario, feeds, positions)?;
    let n_wg = scenario.num_waveguides();
    let m_users = scenario.num_users();
    let mut h = CMatrix::zeros(n_wg, m_users);
    let mut dh = CMatrix::zeros(n_wg, m_users);
    for n in 0..n_wg {
        for (m, user) in scenario.users.iter().enumerate() {
            let e = entry_with_derivative(scenario, n, feeds[n], positions[n], user)?;
            h[(n, m)] = e.value;
            dh[(n, m)] = e.d_dx;
        }
    }
    Ok((h, dh))
}

/// `h̃_mᴴ p_i`.
pub fn received_amplitude(channel: &CMatrix, beams: &CMatrix, m: usize, i: usize) -> Complex64 {
    channel.column(m).dotc(&beams.column(i))
}

/// SINR of user `m`: `|h̃_mᴴ p_m|² / (Σ_{i≠m} |h̃_mᴴ p_i|² + σ²)`.
pub fn sinr(channel: &CMatrix, beams: &CMatrix, m: usize, noise_power_w: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..beams.ncols() {
        let p = received_amplitude(channel, beams, m, i).norm_sqr();
        if i == m {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise_power_w)
}

pub fn rate_report(channel: &CMatrix, beams: &CMatrix, noise_power_w: f64) -> Result<RateReport> {
    if channel.shape() != beams.shape() {
        return Err(Error::Dimension(format!(
            "channel {:?} and beams {:?} differ",
            channel.shape(),
            beams.shape()
        )));
    }
    Ok(RateReport::from_sinr(
        (0..channel.ncols())
            .map(|m| sinr(channel, beams, m, noise_power_w))
            .collect(),
    ))
}

/// Sum rate of a full network state.
pub fn state_sum_rate(scenario: &MultiWgScenario, state: &NetworkState) -> Result<f64> {
    let h = effective_channel_matrix(scenario, &state.feeds, &state.positions)?;
    Ok(rate_report(&h, &state.beamforming, scenario.noise_power_w)?.sum_rate)
}

fn lateral_array_factor(user: &Point3, geometry: &SystemGeometry) -> f64 {
    let d2 = geometry.waveguide_height_m * geometry.waveguide_height_m;
    geometry
        .waveguide_y_coords()
        .iter()
        .map(|y_n| 1.0 / ((user.y_m - y_n).powi(2) + d2).sqrt())
        .sum()
}

/// Single-user LoS SNR with every PA above the user, nearest-feed selection,
/// equal per-waveguide power `P0/N` and MRT:
/// `(P0 η / (N σ²)) e^{-α z} (Σ_n 1/√((y_m - y_n)² + d²))²`.
pub fn mrt_equal_power_snr(user: &Point3, scenario: &MultiWgScenario) -> f64 {
    let l = scenario.length();
    mrt_equal_power_snr_at_distance(user, scenario, user.x_m.min(l - user.x_m))
}

/// As [`mrt_equal_power_snr`] with every waveguide fed from the left.
pub fn mrt_equal_power_snr_sf(user: &Point3, scenario: &MultiWgScenario) -> f64 {
    mrt_equal_power_snr_at_distance(user, scenario, user.x_m)
}

fn mrt_equal_power_snr_at_distance(user: &Point3, scenario: &MultiWgScenario, z: f64) -> f64 {
    let n = scenario.num_waveguides() as f64;
    let s = lateral_array_factor(user, &scenario.geometry);
    scenario.total_power_w * scenario.carrier.los_constant() / (n * scenario.noise_power_w)
        * scenario.waveguide.alpha.power_ratio(z)
        * s
        * s
}

fn closed_form_common(scenario: &MultiWgScenario) -> f64 {
    let g = &scenario.geometry;
    let n = g.num_waveguides as f64;
    let d = g.waveguide_height_m;
    let w = g.service_width_m;
    let asinh_sum: f64 = g
        .waveguide_y_coords()
        .iter()
        .map(|y| ((w - y) / d).asinh() + (y / d).asinh())
        .sum();
    (scenario.total_power_w * scenario.carrier.los_constant() / (n * scenario.noise_power_w)).log2()
        + 2.0 * (asinh_sum / w).log2()
}

/// High-SNR ergodic rate of the equal-power MRT multi-waveguide system with
/// the averaged array factor moved inside the logarithm (an upper bound on
/// the exact high-SNR average).
pub fn ergodic_rate_multi_closed(scenario: &MultiWgScenario) -> f64 {
    closed_form_common(scenario) - 0.25 * scenario.waveguide.alpha.nepers_per_meter() * scenario.length() * LOG2_E
}

/// Single-fed counterpart of [`ergodic_rate_multi_closed`].
pub fn ergodic_rate_multi_closed_sf(scenario: &MultiWgScenario) -> f64 {
    closed_form_common(scenario) - 0.5 * scenario.waveguide.alpha.nepers_per_meter() * scenario.length() * LOG2_E
}
