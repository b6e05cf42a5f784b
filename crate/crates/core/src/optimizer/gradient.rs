use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_wg::{channel_matrix_with_derivative, CMatrix, MultiWgScenario, NetworkState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    /// `∂R_sum/∂x_n`
    pub g: Vec<f64>,
    /// `max_n |g_n|`
    pub g_max: f64,
}

impl GradientVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient {g:?}")));
        }
        let g_max = g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(Self { g, g_max })
    }

    pub fn is_stationary(&self) -> bool {
        self.g_max == 0.0
    }
}

/// Analytic `∂R_sum/∂x_n` with beams and feeds held fixed.
///
/// With `a_{m,i} = h̃_mᴴ p_i`, only row `n` of the channel depends on `x_n`,
/// so `∂|a_{m,i}|²/∂x_n = 2 Re{a_{m,i} ∂h̃_{n,m} conj(p_{n,i})}`. Each rate
/// is `log2(T_m) − log2(T_m − S_m)` where `S_m` is the useful power and
/// `T_m` the total received power plus noise.
pub fn sum_rate_gradient(scenario: &MultiWgScenario, state: &NetworkState) -> Result<GradientVector> {
    let (h, dh) = channel_matrix_with_derivative(scenario, &state.feeds, &state.positions)?;
    gradient_from_channel(&h, &dh, &state.beamforming, scenario.noise_power_w)
}

pub(crate) fn gradient_from_channel(
    h: &CMatrix,
    dh: &CMatrix,
    beams: &CMatrix,
    noise_power_w: f64,
) -> Result<GradientVector> {
    let n_wg = h.nrows();
    let m_users = h.ncols();
    let received = h.adjoint() * beams;
    let mut g = vec![0.0; n_wg];
    for m in 0..m_users {
        let total: f64 = received.row(m).iter().map(|a| a.norm_sqr()).sum::<f64>() + noise_power_w;
        let rest = total - received[(m, m)].norm_sqr();
        for (n, g_n) in g.iter_mut().enumerate() {
            let mut d_total = 0.0;
            let mut d_signal = 0.0;
            for i in 0..m_users {
                let d = 2.0 * (received[(m, i)] * dh[(n, m)] * beams[(n, i)].conj()).re;
                d_total += d;
                if i == m {
                    d_signal = d;
                }
            }
            *g_n += (d_total / total - (d_total - d_signal) / rest) / LN_2;
        }
    }
    GradientVector::new(g)
}
