//! Complex channel coefficients between a pinching antenna (PA) and a user.
//!
//! The free-space part is a spherical-wave LoS term. Two NLoS models are
//! provided and are never mixed in one experiment:
//!
//! * [`StatisticalNlosModel`]: a sum of independent circularly-symmetric
//!   complex Gaussian paths whose variance decays with the PA–user distance.
//!   Used by the single-waveguide analysis.
//! * [`ScattererField`]: deterministic double-bounce paths through point
//!   scatterers on the ground. Used by the multi-waveguide optimizer, which
//!   differentiates through the fixed scatterer geometry.
//!
//! The guided part is the in-waveguide response `ν`, the complex factor
//! picked up between the active feed and the PA.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::{AttenuationCoefficient, CarrierConfig, Point3, SystemGeometry};

/// Smallest separation treated as distinct in `1/r` terms.
pub const MIN_SEPARATION_M: f64 = 1e-9;

/// Which end of a waveguide injects the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feed {
    /// Feed at `x = 0`; indicator `ξ = 1`.
    Left,
    /// Feed at `x = L_x`; indicator `ξ = 0`.
    Right,
}

impl Feed {
    pub fn indicator(self) -> u8 {
        match self {
            Feed::Left => 1,
            Feed::Right => 0,
        }
    }

    pub fn from_indicator(xi: u8) -> Result<Self> {
        match xi {
            1 => Ok(Feed::Left),
            0 => Ok(Feed::Right),
            other => Err(Error::domain(format!("feed indicator must be 0 or 1, got {other}"))),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Feed::Left => Feed::Right,
            Feed::Right => Feed::Left,
        }
    }

    /// Guided distance from this feed to a PA at `x_pin` on a waveguide of
    /// length `length_m`.
    pub fn guided_distance(self, x_pin: f64, length_m: f64) -> f64 {
        match self {
            Feed::Left => x_pin,
            Feed::Right => length_m - x_pin,
        }
    }

    /// The PA coordinate at which this feed sits.
    pub fn position(self, length_m: f64) -> f64 {
        match self {
            Feed::Left => 0.0,
            Feed::Right => length_m,
        }
    }
}

/// One dielectric waveguide: loss, guided wavelength and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub alpha: AttenuationCoefficient,
    pub effective_refractive_index: f64,
    pub length_m: f64,
}

impl WaveguideSpec {
    pub fn new(alpha: AttenuationCoefficient, effective_refractive_index: f64, length_m: f64) -> Result<Self> {
        if !(effective_refractive_index.is_finite() && effective_refractive_index >= 1.0) {
            return Err(Error::domain(format!(
                "effective refractive index must be >= 1, got {effective_refractive_index}"
            )));
        }
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(Error::domain(format!(
                "waveguide length must be positive, got {length_m}"
            )));
        }
        Ok(Self {
            alpha,
            effective_refractive_index,
            length_m,
        })
    }

    /// `λ_g = λ / n_eff`.
    pub fn guided_wavelength_m(&self, carrier: &CarrierConfig) -> f64 {
        carrier.wavelength_m() / self.effective_refractive_index
    }

    /// Complex guided propagation constant `α/2 + j 2π/λ_g`.
    pub fn propagation_constant(&self, carrier: &CarrierConfig) -> Complex64 {
        Complex64::new(
            0.5 * self.alpha.nepers_per_meter(),
            2.0 * PI / self.guided_wavelength_m(carrier),
        )
    }

    fn check_position(&self, x_pin: f64) -> Result<()> {
        if !(x_pin.is_finite() && (0.0..=self.length_m).contains(&x_pin)) {
            return Err(Error::domain(format!(
                "PA position {x_pin} outside waveguide [0, {}]",
                self.length_m
            )));
        }
        Ok(())
    }
}

/// Spherical-wave LoS coefficient `√η e^{-j 2π r/λ} / r`.
pub fn los_gain(pa_pos: Point3, user_pos: Point3, carrier: &CarrierConfig) -> Result<Complex64> {
    let r = pa_pos.distance_to(&user_pos);
    if r < MIN_SEPARATION_M {
        return Err(Error::Singularity(format!(
            "PA at {pa_pos:?} coincides with user at {user_pos:?}"
        )));
    }
    Ok(los_from_distance(r, carrier))
}

fn los_from_distance(r: f64, carrier: &CarrierConfig) -> Complex64 {
    Complex64::from_polar(carrier.los_constant().sqrt() / r, -carrier.wavenumber() * r)
}

/// Cluster-based statistical NLoS model with per-path power weights `μ²_k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatisticalNlosModel {
    pub path_power_weights: Vec<f64>,
}

impl StatisticalNlosModel {
    pub fn new(path_power_weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = path_power_weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::domain(format!("NLoS path weight must be nonnegative, got {w}")));
        }
        Ok(Self { path_power_weights })
    }

    /// No scattering paths.
    pub fn none() -> Self {
        Self::default()
    }

    /// `num_paths` paths of equal weight summing to `aggregate`.
    pub fn equal_weights(num_paths: usize, aggregate: f64) -> Result<Self> {
        if num_paths == 0 {
            return Ok(Self::none());
        }
        Self::new(vec![aggregate / num_paths as f64; num_paths])
    }

    pub fn num_paths(&self) -> usize {
        self.path_power_weights.len()
    }

    /// Aggregate NLoS power `μ = Σ_k μ²_k`.
    pub fn aggregate(&self) -> f64 {
        self.path_power_weights.iter().sum()
    }

    /// Scale every path weight by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.path_power_weights.iter().map(|w| w * c).collect())
    }

    /// Draw one realization `Σ_k g_k`, `g_k ~ CN(0, μ²_k / r²)`.
    pub fn sample<R: Rng + ?Sized>(&self, r_m: f64, rng: &mut R) -> Result<Complex64> {
        if !(r_m.is_finite() && r_m > 0.0) {
            return Err(Error::domain(format!("PA-user distance must be positive, got {r_m}")));
        }
        let inv_r2 = 1.0 / (r_m * r_m);
        let mut acc = Complex64::new(0.0, 0.0);
        for &w in &self.path_power_weights {
            let sd = (0.5 * w * inv_r2).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            acc += Complex64::new(sd * re, sd * im);
        }
        Ok(acc)
    }
}

/// A point scatterer on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Point3,
    pub reflection: Complex64,
}

/// The fixed set of ground scatterers shared by every PA–user pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScattererField {
    pub scatterers: Vec<Scatterer>,
}

impl ScattererField {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(scatterers: Vec<Scatterer>) -> Result<Self> {
        for s in &scatterers {
            if s.reflection.norm() > 1.0 + 1e-12 {
                return Err(Error::domain(format!(
                    "reflection coefficient magnitude {} exceeds 1",
                    s.reflection.norm()
                )));
            }
            if s.position.z_m != 0.0 {
                return Err(Error::domain("scatterers must lie on the ground plane (z = 0)"));
            }
        }
        Ok(Self { scatterers })
    }

    /// `count` scatterers drawn i.i.d. uniformly over the service rectangle.
    pub fn uniform<R: Rng + ?Sized>(
        geometry: &SystemGeometry,
        count: usize,
        reflection: Complex64,
        rng: &mut R,
    ) -> Result<Self> {
        let scatterers = (0..count)
            .map(|_| Scatterer {
                position: Point3::ground(
                    rng.random_range(0.0..=geometry.service_length_m),
                    rng.random_range(0.0..=geometry.service_width_m),
                ),
                reflection,
            })
            .collect();
        Self::new(scatterers)
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn within(&self, geometry: &SystemGeometry) -> bool {
        self.scatterers
            .iter()
            .all(|s| geometry.contains_ground_point(&s.position))
    }
}

/// Double-bounce NLoS sum
/// `Σ_k Γ_k e^{-jk d¹_k}/d¹_k · e^{-jk d²_k}/d²_k`.
pub fn geometric_nlos(
    pa_pos: Point3,
    user_pos: Point3,
    field: &ScattererField,
    carrier: &CarrierConfig,
) -> Result<Complex64> {
    Ok(geometric_nlos_with_derivative(pa_pos, user_pos, field, carrier)?.value)
}

/// A channel coefficient together with its derivative in the PA x-coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WithDerivative {
    pub value: Complex64,
    pub d_dx: Complex64,
}

impl std::ops::Add for WithDerivative {
    type Output = WithDerivative;
    fn add(self, rhs: Self) -> Self {
        WithDerivative {
            value: self.value + rhs.value,
            d_dx: self.d_dx + rhs.d_dx,
        }
    }
}

impl WithDerivative {
    /// Product rule.
    pub fn mul(self, rhs: Self) -> Self {
        WithDerivative {
            value: self.value * rhs.value,
            d_dx: self.d_dx * rhs.value + self.value * rhs.d_dx,
        }
    }
}

/// LoS gain and `∂h/∂x_pin = -h (jk + 1/r)(x_pin - x_m)/r`.
pub fn los_gain_with_derivative(pa_pos: Point3, user_pos: Point3, carrier: &CarrierConfig) -> Result<WithDerivative> {
    let h = los_gain(pa_pos, user_pos, carrier)?;
    let r = pa_pos.distance_to(&user_pos);
    let dr_dx = (pa_pos.x_m - user_pos.x_m) / r;
    let d_dx = -h * Complex64::new(1.0 / r, carrier.wavenumber()) * dr_dx;
    Ok(WithDerivative { value: h, d_dx })
}

pub fn geometric_nlos_with_derivative(
    pa_pos: Point3,
    user_pos: Point3,
    field: &ScattererField,
    carrier: &CarrierConfig,
) -> Result<WithDerivative> {
    let k = carrier.wavenumber();
    let mut out = WithDerivative {
        value: Complex64::new(0.0, 0.0),
        d_dx: Complex64::new(0.0, 0.0),
    };
    for (idx, s) in field.scatterers.iter().enumerate() {
        let d1 = pa_pos.distance_to(&s.position);
        let d2 = user_pos.distance_to(&s.position);
        if d1 < MIN_SEPARATION_M || d2 < MIN_SEPARATION_M {
            return Err(Error::Singularity(format!(
                "scatterer {idx} at {:?} coincides with PA or user",
                s.position
            )));
        }
        let term = s.reflection * Complex64::from_polar(1.0 / (d1 * d2), -k * (d1 + d2));
        let dd1_dx = (pa_pos.x_m - s.position.x_m) / d1;
        out.value += term;
        out.d_dx += -term * Complex64::new(1.0 / d1, k) * dd1_dx;
    }
    Ok(out)
}

/// Equivalent in-waveguide response `ν = e^{-(α/2 + j2π/λ_g) z_eff}` where
/// `z_eff` is the guided distance from the active feed to the PA.
pub fn in_waveguide_response(feed: Feed, x_pin: f64, wg: &WaveguideSpec, carrier: &CarrierConfig) -> Result<Complex64> {
    Ok(in_waveguide_response_with_derivative(feed, x_pin, wg, carrier)?.value)
}

pub fn in_waveguide_response_with_derivative(
    feed: Feed,
    x_pin: f64,
    wg: &WaveguideSpec,
    carrier: &CarrierConfig,
) -> Result<WithDerivative> {
    wg.check_position(x_pin)?;
    let gamma = wg.propagation_constant(carrier);
    let z = feed.guided_distance(x_pin, wg.length_m);
    let nu = (-gamma * z).exp();
    let d_dx = match feed {
        Feed::Left => -gamma * nu,
        Feed::Right => gamma * nu,
    };
    Ok(WithDerivative { value: nu, d_dx })
}

/// Source of the NLoS term in [`effective_channel`].
#[derive(Debug, Clone, Copy)]
pub enum Nlos<'a> {
    /// LoS only.
    Off,
    /// Deterministic scatterer paths.
    Scatterers(&'a ScattererField),
    /// A previously drawn statistical realization.
    Realization(Complex64),
}

/// Composite feed-to-user coefficient `ν · (h^LoS + h^NLoS)`.
pub fn effective_channel(
    pa_pos: Point3,
    user_pos: Point3,
    feed: Feed,
    nlos: Nlos<'_>,
    carrier: &CarrierConfig,
    wg: &WaveguideSpec,
) -> Result<Complex64> {
    let nu = in_waveguide_response(feed, pa_pos.x_m, wg, carrier)?;
    let los = los_gain(pa_pos, user_pos, carrier)?;
    let scatter = match nlos {
        Nlos::Off => Complex64::new(0.0, 0.0),
        Nlos::Scatterers(field) => geometric_nlos(pa_pos, user_pos, field, carrier)?,
        Nlos::Realization(h) => h,
    };
    Ok(nu * (los + scatter))
}
