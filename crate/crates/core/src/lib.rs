//! Dual-fed pinching-antenna systems under in-waveguide attenuation.

pub mod bench;
pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod multi_wg;
pub mod optimizer;
pub mod phys;
pub mod scenario;
pub mod single_wg;
pub mod validation;

pub use error::{Error, Result};
