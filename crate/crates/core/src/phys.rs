//! Physical constants, unit conversion, the dielectric attenuation law and
//! the geometric primitives every other module builds on.
//!
//! Attenuation is carried in nepers per meter (power, natural log) and
//! powers in watts. Decibel forms only appear at the I/O boundary.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `10 log10(e)`: dB per neper for power ratios.
pub const DB_PER_NEPER: f64 = 10.0 / LN_10;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Carrier frequency together with the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CarrierSerde", into = "CarrierSerde")]
pub struct CarrierConfig {
    carrier_frequency_hz: f64,
    free_space_wavelength_m: f64,
    los_constant: f64,
}

impl CarrierConfig {
    pub fn new(carrier_frequency_hz: f64) -> Result<Self> {
        if !(carrier_frequency_hz.is_finite() && carrier_frequency_hz > 0.0) {
            return Err(Error::domain(format!(
                "carrier frequency must be positive and finite, got {carrier_frequency_hz}"
            )));
        }
        let amplitude = SPEED_OF_LIGHT / (4.0 * PI * carrier_frequency_hz);
        Ok(Self {
            carrier_frequency_hz,
            free_space_wavelength_m: SPEED_OF_LIGHT / carrier_frequency_hz,
            los_constant: amplitude * amplitude,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    /// Free-space wavelength `c / f_c`.
    pub fn wavelength_m(&self) -> f64 {
        self.free_space_wavelength_m
    }

    /// Free-space amplitude factor at unit distance, squared: `(c / (4π f_c))²`.
    pub fn los_constant(&self) -> f64 {
        self.los_constant
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.free_space_wavelength_m
    }
}

#[derive(Serialize, Deserialize)]
struct CarrierSerde {
    carrier_frequency_hz: f64,
}

impl TryFrom<CarrierSerde> for CarrierConfig {
    type Error = Error;
    fn try_from(value: CarrierSerde) -> Result<Self> {
        CarrierConfig::new(value.carrier_frequency_hz)
    }
}

impl From<CarrierConfig> for CarrierSerde {
    fn from(value: CarrierConfig) -> Self {
        CarrierSerde {
            carrier_frequency_hz: value.carrier_frequency_hz,
        }
    }
}

/// Dielectric parameters of the waveguide rod.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideMaterial {
    pub loss_tangent: f64,
    pub effective_refractive_index: f64,
}

impl WaveguideMaterial {
    /// PTFE (Teflon) rod: `tan δ = 4e-4`, `n_eff = 1.45`.
    pub const PTFE: WaveguideMaterial = WaveguideMaterial {
        loss_tangent: 4e-4,
        effective_refractive_index: 1.45,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_tangent.is_finite() && self.loss_tangent >= 0.0) {
            return Err(Error::domain(format!(
                "loss tangent must be nonnegative, got {}",
                self.loss_tangent
            )));
        }
        if !(self.effective_refractive_index.is_finite() && self.effective_refractive_index >= 1.0) {
            return Err(Error::domain(format!(
                "effective refractive index must be >= 1, got {}",
                self.effective_refractive_index
            )));
        }
        Ok(())
    }
}

/// Power attenuation coefficient in nepers per meter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttenuationCoefficient(f64);

impl AttenuationCoefficient {
    pub const LOSSLESS: AttenuationCoefficient = AttenuationCoefficient(0.0);

    pub fn from_nepers_per_meter(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::domain(format!(
                "attenuation must be nonnegative and finite, got {alpha} Np/m"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn from_db_per_meter(db: f64) -> Result<Self> {
        Self::from_nepers_per_meter(db / DB_PER_NEPER)
    }

    pub fn nepers_per_meter(self) -> f64 {
        self.0
    }

    pub fn db_per_meter(self) -> f64 {
        self.0 * DB_PER_NEPER
    }

    /// Power ratio `e^{-α z}` after `z` meters of guided propagation.
    pub fn power_ratio(self, z_m: f64) -> f64 {
        (-self.0 * z_m).exp()
    }
}

/// Dielectric-loss attenuation `α = 2π n_eff tan δ / λ0`, in nepers per meter.
///
/// A zero loss tangent is accepted and yields the lossless waveguide.
pub fn dielectric_attenuation(material: WaveguideMaterial, carrier: CarrierConfig) -> Result<AttenuationCoefficient> {
    material.validate()?;
    let alpha = 2.0 * PI * material.effective_refractive_index * material.loss_tangent / carrier.wavelength_m();
    AttenuationCoefficient::from_nepers_per_meter(alpha)
}

/// Guided power after `z_m` meters: `P_in e^{-α z}`.
pub fn propagated_power(p_in_w: f64, alpha: AttenuationCoefficient, z_m: f64) -> Result<f64> {
    if !(p_in_w.is_finite() && p_in_w > 0.0) {
        return Err(Error::domain(format!("input power must be positive, got {p_in_w}")));
    }
    if !(z_m.is_finite() && z_m >= 0.0) {
        return Err(Error::domain(format!(
            "propagation distance must be nonnegative, got {z_m}"
        )));
    }
    Ok(p_in_w * alpha.power_ratio(z_m))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl Point3 {
    pub const fn new(x_m: f64, y_m: f64, z_m: f64) -> Self {
        Self { x_m, y_m, z_m }
    }

    /// A point on the ground plane.
    pub const fn ground(x_m: f64, y_m: f64) -> Self {
        Self::new(x_m, y_m, 0.0)
    }

    pub fn distance_to(&self, other: &Point3) -> f64 {
        euclidean_distance(*self, *other)
    }
}

pub fn euclidean_distance(a: Point3, b: Point3) -> f64 {
    let dx = a.x_m - b.x_m;
    let dy = a.y_m - b.y_m;
    let dz = a.z_m - b.z_m;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Rectangular service area and the parallel waveguides above it.
///
/// Waveguide `n` (zero-based) runs along x at `y = (2n+1) L_y / (2N)` and
/// height `d`; its length equals the service length `L_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGeometry {
    pub service_length_m: f64,
    pub service_width_m: f64,
    pub waveguide_height_m: f64,
    pub num_waveguides: usize,
}

impl SystemGeometry {
    pub fn new(
        service_length_m: f64,
        service_width_m: f64,
        waveguide_height_m: f64,
        num_waveguides: usize,
    ) -> Result<Self> {
        let g = Self {
            service_length_m,
            service_width_m,
            waveguide_height_m,
            num_waveguides,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("service length", self.service_length_m),
            ("service width", self.service_width_m),
            ("waveguide height", self.waveguide_height_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_waveguides == 0 {
            return Err(Error::domain("at least one waveguide is required"));
        }
        Ok(())
    }

    pub fn waveguide_length_m(&self) -> f64 {
        self.service_length_m
    }

    pub fn waveguide_y(&self, n: usize) -> f64 {
        (2 * n + 1) as f64 * self.service_width_m / (2 * self.num_waveguides) as f64
    }

    pub fn waveguide_y_coords(&self) -> Vec<f64> {
        (0..self.num_waveguides).map(|n| self.waveguide_y(n)).collect()
    }

    /// Location of the PA on waveguide `n` at coordinate `x_pin`.
    pub fn pa_point(&self, n: usize, x_pin: f64) -> Point3 {
        Point3::new(x_pin, self.waveguide_y(n), self.waveguide_height_m)
    }

    pub fn contains_ground_point(&self, p: &Point3) -> bool {
        (0.0..=self.service_length_m).contains(&p.x_m) && (0.0..=self.service_width_m).contains(&p.y_m)
    }
}
