//! Scenario parameters with the reference defaults, and seeded builders for
//! single- and multi-waveguide scenarios.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ScattererField, StatisticalNlosModel, WaveguideSpec};
use crate::error::{Error, Result};
use crate::multi_wg::MultiWgScenario;
use crate::phys::{
    dbm_to_watts, dielectric_attenuation, AttenuationCoefficient, CarrierConfig, Point3, SystemGeometry,
    WaveguideMaterial,
};
use crate::single_wg::SingleWgScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub carrier_frequency_hz: f64,
    pub service_length_m: f64,
    pub service_width_m: f64,
    pub waveguide_height_m: f64,
    pub num_waveguides: usize,
    pub num_users: usize,
    pub transmit_power_dbm: f64,
    /// Noise density; the noise power is this times `bandwidth_hz`.
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub loss_tangent: f64,
    pub effective_refractive_index: f64,
    /// Overrides the attenuation derived from the material when set.
    pub attenuation_db_per_m: Option<f64>,
    pub num_scatterers: usize,
    pub reflection_coefficient: f64,
    /// Statistical NLoS power as a fraction of `η` (single waveguide).
    pub nlos_kappa: f64,
    pub nlos_paths: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 28e9,
            service_length_m: 10.0,
            service_width_m: 6.0,
            waveguide_height_m: 1.5,
            num_waveguides: 4,
            num_users: 4,
            transmit_power_dbm: 30.0,
            noise_psd_dbm_per_hz: -90.0,
            bandwidth_hz: 1.0,
            loss_tangent: WaveguideMaterial::PTFE.loss_tangent,
            effective_refractive_index: WaveguideMaterial::PTFE.effective_refractive_index,
            attenuation_db_per_m: None,
            num_scatterers: 10,
            reflection_coefficient: 0.5,
            nlos_kappa: 0.1,
            nlos_paths: 10,
        }
    }
}

/// Parameters a sweep axis may vary.
pub const SWEEPABLE: &[&str] = &[
    "carrier_frequency_hz",
    "service_length_m",
    "service_width_m",
    "waveguide_height_m",
    "num_waveguides",
    "num_users",
    "transmit_power_dbm",
    "noise_psd_dbm_per_hz",
    "bandwidth_hz",
    "loss_tangent",
    "effective_refractive_index",
    "attenuation_db_per_m",
    "num_scatterers",
    "reflection_coefficient",
    "nlos_kappa",
    "nlos_paths",
];

fn as_count(field: &str, value: f64) -> Result<usize> {
    if value.is_finite() && value >= 0.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(Error::config(
            field,
            format!("expects a non-negative integer, got {value}"),
        ))
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("service_length_m", self.service_length_m),
            ("service_width_m", self.service_width_m),
            ("waveguide_height_m", self.waveguide_height_m),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [
            ("transmit_power_dbm", self.transmit_power_dbm),
            ("noise_psd_dbm_per_hz", self.noise_psd_dbm_per_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::config(field, format!("must be finite, got {v}")));
            }
        }
        if self.num_waveguides == 0 {
            return Err(Error::config("num_waveguides", "must be at least 1"));
        }
        if !(self.loss_tangent.is_finite() && self.loss_tangent >= 0.0) {
            return Err(Error::config(
                "loss_tangent",
                format!("must be non-negative, got {}", self.loss_tangent),
            ));
        }
        if !(self.effective_refractive_index.is_finite() && self.effective_refractive_index >= 1.0) {
            return Err(Error::config(
                "effective_refractive_index",
                format!("must be at least 1, got {}", self.effective_refractive_index),
            ));
        }
        if let Some(db) = self.attenuation_db_per_m {
            if !(db.is_finite() && db >= 0.0) {
                return Err(Error::config(
                    "attenuation_db_per_m",
                    format!("must be non-negative, got {db}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.reflection_coefficient) {
            return Err(Error::config(
                "reflection_coefficient",
                format!("magnitude must lie in [0, 1], got {}", self.reflection_coefficient),
            ));
        }
        if !(self.nlos_kappa.is_finite() && self.nlos_kappa >= 0.0) {
            return Err(Error::config(
                "nlos_kappa",
                format!("must be non-negative, got {}", self.nlos_kappa),
            ));
        }
        Ok(())
    }

    /// Sets the parameter named by a sweep axis.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "carrier_frequency_hz" => self.carrier_frequency_hz = value,
            "service_length_m" => self.service_length_m = value,
            "service_width_m" => self.service_width_m = value,
            "waveguide_height_m" => self.waveguide_height_m = value,
            "num_waveguides" => self.num_waveguides = as_count(name, value)?,
            "num_users" => self.num_users = as_count(name, value)?,
            "transmit_power_dbm" => self.transmit_power_dbm = value,
            "noise_psd_dbm_per_hz" => self.noise_psd_dbm_per_hz = value,
            "bandwidth_hz" => self.bandwidth_hz = value,
            "loss_tangent" => self.loss_tangent = value,
            "effective_refractive_index" => self.effective_refractive_index = value,
            "attenuation_db_per_m" => self.attenuation_db_per_m = Some(value),
            "num_scatterers" => self.num_scatterers = as_count(name, value)?,
            "reflection_coefficient" => self.reflection_coefficient = value,
            "nlos_kappa" => self.nlos_kappa = value,
            "nlos_paths" => self.nlos_paths = as_count(name, value)?,
            other => {
                return Err(Error::config(
                    "sweep.parameter",
                    format!("unknown parameter `{other}`; expected one of {}", SWEEPABLE.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn carrier(&self) -> Result<CarrierConfig> {
        CarrierConfig::new(self.carrier_frequency_hz)
    }

    pub fn alpha(&self) -> Result<AttenuationCoefficient> {
        match self.attenuation_db_per_m {
            Some(db) => AttenuationCoefficient::from_db_per_meter(db),
            None => dielectric_attenuation(
                WaveguideMaterial {
                    loss_tangent: self.loss_tangent,
                    effective_refractive_index: self.effective_refractive_index,
                },
                self.carrier()?,
            ),
        }
    }

    pub fn transmit_power_w(&self) -> f64 {
        dbm_to_watts(self.transmit_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz) * self.bandwidth_hz
    }

    pub fn geometry(&self) -> Result<SystemGeometry> {
        SystemGeometry::new(
            self.service_length_m,
            self.service_width_m,
            self.waveguide_height_m,
            self.num_waveguides,
        )
    }

    fn draw_users(&self, rng: &mut ChaCha8Rng) -> Vec<Point3> {
        (0..self.num_users)
            .map(|_| {
                Point3::ground(
                    rng.random_range(0.0..=self.service_length_m),
                    rng.random_range(0.0..=self.service_width_m),
                )
            })
            .collect()
    }

    /// Single waveguide (at `y = 0`) with users drawn uniformly over the
    /// service area and the statistical NLoS model.
    pub fn single_scenario(&self, seed: u64) -> Result<SingleWgScenario> {
        self.validate()?;
        let carrier = self.carrier()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nlos = if self.nlos_paths == 0 || self.nlos_kappa == 0.0 {
            StatisticalNlosModel::none()
        } else {
            StatisticalNlosModel::equal_weights(self.nlos_paths, self.nlos_kappa * carrier.los_constant())?
        };
        let scenario = SingleWgScenario {
            geometry: SystemGeometry::new(self.service_length_m, self.service_width_m, self.waveguide_height_m, 1)?,
            carrier,
            alpha: self.alpha()?,
            injected_power_w: self.transmit_power_w(),
            noise_power_w: self.noise_power_w(),
            users: self.draw_users(&mut rng),
            nlos,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Multi-waveguide scenario with users and then scatterers drawn
    /// uniformly over the service area from one seeded stream.
    pub fn multi_scenario(&self, seed: u64) -> Result<MultiWgScenario> {
        self.validate()?;
        let geometry = self.geometry()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = self.draw_users(&mut rng);
        let scatterers = ScattererField::uniform(
            &geometry,
            self.num_scatterers,
            Complex64::new(self.reflection_coefficient, 0.0),
            &mut rng,
        )?;
        let scenario = MultiWgScenario {
            waveguide: WaveguideSpec::new(self.alpha()?, self.effective_refractive_index, self.service_length_m)?,
            geometry,
            carrier: self.carrier()?,
            total_power_w: self.transmit_power_w(),
            noise_power_w: self.noise_power_w(),
            users,
            scatterers,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
