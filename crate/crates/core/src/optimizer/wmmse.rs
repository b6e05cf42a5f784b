use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_wg::{rate_report, CMatrix};

use super::OptimizerConfig;

const MAX_BISECTION_STEPS: usize = 400;
const DROPPED_USER_RATIO: f64 = 1e-100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseSettings {
    pub tolerance: f64,
    pub max_iters: usize,
    pub bisection_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmmseAuxiliaries {
    pub receiver_coeffs: Vec<Complex64>,
    pub mse_weights: Vec<f64>,
    pub lagrange_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutcome {
    pub beams: CMatrix,
    pub sum_rate: f64,
    pub auxiliaries: WmmseAuxiliaries,
    pub iterations: usize,
    pub converged: bool,
    /// Sum rate of the starting beams followed by one entry per iteration.
    pub rate_trace: Vec<f64>,
    /// Weighted-MSE objective, same indexing as `rate_trace`.
    pub objective_trace: Vec<f64>,
}

/// Matched-filter beams `p_m ∝ h_m`, with the budget split equally across
/// users whose channel is not identically zero.
pub fn mrt_beams(channel: &CMatrix, total_power_w: f64) -> CMatrix {
    let norms: Vec<f64> = channel.column_iter().map(|c| c.norm()).collect();
    let active = norms.iter().filter(|&&n| n > 0.0).count();
    let mut beams = CMatrix::zeros(channel.nrows(), channel.ncols());
    if active == 0 {
        return beams;
    }
    let amp = (total_power_w / active as f64).sqrt();
    for (m, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            beams.set_column(m, &(channel.column(m) * Complex64::from(amp / norm)));
        }
    }
    beams
}

/// WMMSE from MRT initial beams with the Phase-II settings of `cfg`.
pub fn wmmse_beamforming(
    channel: &CMatrix,
    total_power_w: f64,
    noise_power_w: f64,
    cfg: &OptimizerConfig,
) -> Result<WmmseOutcome> {
    let init = mrt_beams(channel, total_power_w);
    wmmse_from(channel, total_power_w, noise_power_w, &init, cfg.phase_two_wmmse())
}

/// WMMSE block-coordinate descent started from `init`. An all-zero `init`
/// is replaced by MRT beams.
pub fn wmmse_from(
    channel: &CMatrix,
    total_power_w: f64,
    noise_power_w: f64,
    init: &CMatrix,
    settings: WmmseSettings,
) -> Result<WmmseOutcome> {
    if channel.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
        return Err(Error::Numerical("channel matrix has non-finite entries".into()));
    }
    if !(total_power_w.is_finite() && total_power_w > 0.0) {
        return Err(Error::domain(format!(
            "power budget must be positive, got {total_power_w}"
        )));
    }
    if init.shape() != channel.shape() {
        return Err(Error::Dimension(format!(
            "initial beams {:?} do not match channel {:?}",
            init.shape(),
            channel.shape()
        )));
    }
    let m_users = channel.ncols() as f64;
    let mut beams = if init.iter().all(|p| *p == Complex64::from(0.0)) {
        mrt_beams(channel, total_power_w)
    } else {
        init.clone()
    };
    let mut rate = rate_report(channel, &beams, noise_power_w)?.sum_rate;
    let mut objective = m_users - LN_2 * rate;
    let mut rate_trace = vec![rate];
    let mut objective_trace = vec![objective];
    let mut auxiliaries = WmmseAuxiliaries {
        receiver_coeffs: vec![],
        mse_weights: vec![],
        lagrange_multiplier: 0.0,
    };
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        iterations += 1;
        let (u, w) = receivers_and_weights(channel, &beams, noise_power_w);
        let (next, mu) = beam_update(channel, &u, &w, total_power_w, settings.bisection_tolerance)?;
        let next_rate = rate_report(channel, &next, noise_power_w)?.sum_rate;
        auxiliaries = WmmseAuxiliaries {
            receiver_coeffs: u,
            mse_weights: w,
            lagrange_multiplier: mu,
        };
        // Each sweep cannot lower the rate in exact arithmetic; a decrease
        // means the iteration has reached rounding level.
        if next_rate < rate {
            converged = true;
            break;
        }
        beams = next;
        rate = next_rate;
        // At the optimal receivers and weights the objective equals M - ln2·R,
        // which avoids the cancellation in evaluating the MSEs directly.
        let next_objective = m_users - LN_2 * rate;
        rate_trace.push(rate);
        objective_trace.push(next_objective);
        let change = objective - next_objective;
        objective = next_objective;
        if change < settings.tolerance {
            converged = true;
            break;
        }
    }

    Ok(WmmseOutcome {
        beams,
        sum_rate: rate,
        auxiliaries,
        iterations,
        converged,
        rate_trace,
        objective_trace,
    })
}

fn receivers_and_weights(channel: &CMatrix, beams: &CMatrix, noise_power_w: f64) -> (Vec<Complex64>, Vec<f64>) {
    let received = channel.adjoint() * beams;
    let mut u = Vec::with_capacity(channel.ncols());
    let mut w = Vec::with_capacity(channel.ncols());
    for m in 0..channel.ncols() {
        let z = received[(m, m)];
        let interference: f64 = (0..beams.ncols())
            .filter(|&i| i != m)
            .map(|i| received[(m, i)].norm_sqr())
            .sum::<f64>()
            + noise_power_w;
        let total = interference + z.norm_sqr();
        u.push(z / total);
        // e_m(u*) = (interference + σ²) / total, computed without cancellation.
        w.push(total / interference);
    }
    (u, w)
}

/// `p_m = (Σ_k w_k |u_k|² h_k h_kᴴ + μ I)⁻¹ w_m u_m h_m` with `μ` from
/// bisection on the total beam power.
fn beam_update(
    channel: &CMatrix,
    u: &[Complex64],
    w: &[f64],
    total_power_w: f64,
    bisection_tolerance: f64,
) -> Result<(CMatrix, f64)> {
    let m = channel.ncols();
    let mut weighted = channel.clone();
    // rhs = W D with D = diag(√w_k u_k / |u_k|).
    let mut d = vec![Complex64::from(0.0); m];
    for k in 0..m {
        weighted.column_mut(k).scale_mut(w[k].sqrt() * u[k].norm());
        if u[k].norm() > 0.0 {
            d[k] = u[k] / u[k].norm() * w[k].sqrt();
        }
    }
    // A user WMMSE has switched off decays towards subnormal magnitudes,
    // which the SVD does not tolerate. Drop such users exactly.
    let largest = weighted.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for k in 0..m {
        if weighted.column(k).norm() <= DROPPED_USER_RATIO * largest {
            weighted.column_mut(k).fill(Complex64::from(0.0));
            d[k] = Complex64::from(0.0);
        }
    }
    // With W = U S Vᴴ the update is p = U S (S² + μ)⁻¹ Vᴴ D, so directions
    // outside the column space of W carry exactly no power.
    let svd = weighted.svd(true, true);
    let basis = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD returned no left basis".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no right basis".into()))?;
    let sigma = svd.singular_values;
    let dirs = sigma.len();
    let s_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = s_max * f64::EPSILON * channel.nrows().max(m) as f64;
    let mut c = v_t;
    for (k, dk) in d.iter().enumerate() {
        c.column_mut(k).iter_mut().for_each(|x| *x *= dk);
    }
    let sigma: Vec<f64> = sigma.iter().map(|&x| if x > cutoff { x } else { 0.0 }).collect();
    let energy: Vec<f64> = (0..dirs).map(|r| c.row(r).iter().map(|x| x.norm_sqr()).sum()).collect();
    // Power of the beams as a function of μ; `gain(r, μ) = s_r / (s_r² + μ)`.
    let gain = |r: usize, mu: f64| -> f64 {
        if sigma[r] == 0.0 {
            0.0
        } else {
            sigma[r] / (sigma[r] * sigma[r] + mu)
        }
    };
    let power = |mu: f64| -> f64 { (0..dirs).map(|r| energy[r] * gain(r, mu).powi(2)).sum() };

    let mu = if power(0.0) <= total_power_w {
        0.0
    } else {
        let mut hi = 1.0;
        while power(hi) > total_power_w {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("power bisection bracket diverged".into()));
            }
        }
        let mut lo = 0.0;
        let mut mid = hi;
        for _ in 0..MAX_BISECTION_STEPS {
            mid = 0.5 * (lo + hi);
            let p = power(mid);
            if (p - total_power_w).abs() <= bisection_tolerance * total_power_w {
                break;
            }
            if p > total_power_w {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                mid = hi;
                break;
            }
        }
        mid
    };

    let scale = DMatrix::from_fn(dirs, m, |r, k| c[(r, k)] * gain(r, mu));
    let mut beams = basis * scale;
    let used: f64 = beams.iter().map(|p| p.norm_sqr()).sum();
    if used > total_power_w {
        beams *= Complex64::from((total_power_w / used).sqrt());
    }
    if beams.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
        return Err(Error::Numerical("beam update produced non-finite entries".into()));
    }
    Ok((beams, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(n, m, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    }

    fn power(p: &CMatrix) -> f64 {
        p.iter().map(|c| c.norm_sqr()).sum()
    }

    #[test]
    fn single_user_is_full_power_mrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = OptimizerConfig::default();
        for n in 1..6 {
            let h = random_channel(&mut rng, n, 1, 1e-4);
            let noise = 1e-12;
            let out = wmmse_beamforming(&h, 1.0, noise, &cfg).unwrap();
            let expected = (1.0 + h.norm_squared() / noise).log2();
            assert!((out.sum_rate - expected).abs() < 1e-8, "{} vs {expected}", out.sum_rate);
            let cos = h.column(0).dotc(&out.beams.column(0)).norm() / (h.norm() * out.beams.norm());
            assert!((cos - 1.0).abs() < 1e-10);
            assert!((power(&out.beams) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_channel_user_gets_no_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut h = random_channel(&mut rng, 3, 3, 1e-4);
        h.set_column(1, &DVector::from_element(3, Complex64::from(0.0)));
        let out = wmmse_beamforming(&h, 1.0, 1e-12, &OptimizerConfig::default()).unwrap();
        assert!(out.beams.column(1).norm() < 1e-12);
        let report = rate_report(&h, &out.beams, 1e-12).unwrap();
        assert_eq!(report.per_user_rate[1], 0.0);
    }

    #[test]
    fn all_zero_channel_gives_zero_beams() {
        let h = CMatrix::zeros(2, 2);
        let out = wmmse_beamforming(&h, 1.0, 1e-12, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.sum_rate, 0.0);
        assert_eq!(power(&out.beams), 0.0);
    }

    #[test]
    fn non_finite_channel_is_rejected() {
        let mut h = CMatrix::zeros(2, 1);
        h[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            wmmse_beamforming(&h, 1.0, 1e-12, &OptimizerConfig::default()),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn orthogonal_two_user_split_matches_power_grid() {
        // Orthogonal channels decouple: rate = Σ log2(1 + q_m |h_m|²/σ²).
        let g = [2e-4, 5e-5];
        let h = CMatrix::from_column_slice(
            2,
            2,
            &[
                Complex64::new(g[0], 0.0),
                Complex64::from(0.0),
                Complex64::from(0.0),
                Complex64::new(0.0, g[1]),
            ],
        );
        let noise = 1e-9;
        let p0 = 1.0;
        let out = wmmse_beamforming(&h, p0, noise, &OptimizerConfig::default()).unwrap();
        let split = |q: f64| (1.0 + q * g[0] * g[0] / noise).log2() + (1.0 + (p0 - q) * g[1] * g[1] / noise).log2();
        let best = (0..=1000).map(|i| split(i as f64 * 1e-3)).fold(f64::MIN, f64::max);
        assert!(out.sum_rate >= best - 1e-6, "{} vs grid {best}", out.sum_rate);
        let tdma = 0.5 * (1.0 + p0 * g[0] * g[0] / noise).log2() + 0.5 * (1.0 + p0 * g[1] * g[1] / noise).log2();
        assert!(out.sum_rate >= tdma);
    }

    #[test]
    fn traces_are_monotone_and_power_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = OptimizerConfig::default();
        for trial in 0..200 {
            let n = rng.random_range(1..6);
            let m = rng.random_range(1..7);
            let scale = 10f64.powf(rng.random_range(-5.0..-3.0));
            let h = random_channel(&mut rng, n, m, scale);
            let p0 = 10f64.powf(rng.random_range(-1.0..1.0));
            let out = wmmse_beamforming(&h, p0, 1e-12, &cfg).unwrap();
            for pair in out.rate_trace.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-9 * pair[0].abs().max(1.0),
                    "trial {trial}: {pair:?}"
                );
            }
            for pair in out.objective_trace.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0),
                    "trial {trial}: {pair:?}"
                );
            }
            let used = power(&out.beams);
            assert!(used <= p0 * (1.0 + 1e-9));
            if out.auxiliaries.lagrange_multiplier > 0.0 {
                assert!((used - p0).abs() / p0 <= 1e-6, "trial {trial}: {used} vs {p0}");
            }
        }
    }

    #[test]
    fn warm_start_never_loses_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_channel(&mut rng, 3, 4, 1e-4);
        let cfg = OptimizerConfig::default();
        let first = wmmse_beamforming(&h, 1.0, 1e-12, &cfg).unwrap();
        let again = wmmse_from(&h, 1.0, 1e-12, &first.beams, cfg.phase_two_wmmse()).unwrap();
        assert!(again.sum_rate >= first.sum_rate - 1e-9);
        assert_eq!(
            again.rate_trace[0],
            rate_report(&h, &first.beams, 1e-12).unwrap().sum_rate
        );
    }
}
