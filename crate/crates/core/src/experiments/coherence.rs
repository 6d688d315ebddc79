use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fit::{curve_fit, dominant_frequency};
use crate::noise::{synthesize_uniform, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoherenceKind {
    /// Free-induction decay, Gaussian envelope.
    Ramsey,
    /// Driven oscillation at `f_rabi_mhz` with the quasi-static envelope
    /// for the given T2*.
    RabiDecay { f_rabi_mhz: f64, t2_star_us: f64 },
    /// Exponential decay under a locking drive of `f_rabi_mhz`.
    SpinLock { f_rabi_mhz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceFit {
    pub kind: CoherenceKind,
    /// T2*, T2 Rabi or T1 rho (µs).
    pub time_us: f64,
    pub sigma_us: f64,
    /// 2 f_R T for driven kinds.
    pub quality: Option<f64>,
    pub params: Vec<f64>,
    pub rss: f64,
}

/// Quasi-static envelope of a driven oscillation.
pub fn rabi_decay_envelope(t_us: f64, f_rabi_mhz: f64, t2_star_us: f64) -> f64 {
    let x = t_us / (f_rabi_mhz * t2_star_us * t2_star_us);
    (1.0 + x * x).powf(-0.25)
}

fn spread(y: &[f64]) -> (f64, f64) {
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Fit a coherence trace (`t` in µs).
pub fn fit_coherence(kind: CoherenceKind, t: &[f64], y: &[f64]) -> Result<CoherenceFit> {
    if t.len() < 20 || t.len() != y.len() {
        return Err(invalid(format!("coherence fit needs at least 20 points, got {}", t.len())));
    }
    let (lo, hi) = spread(y);
    let last = y[y.len() - 1];
    let t_mid = t[t.len() / 2].max(1e-9);
    let (fit, idx, f_rabi) = match kind {
        CoherenceKind::Ramsey => {
            let a0 = y[0] - last;
            let r = curve_fit(|x, p| p[0] * (-(x / p[1]).powi(2)).exp() + p[2], t, y, None, &[a0, t_mid, last])?;
            (r, 1, None)
        }
        CoherenceKind::SpinLock { f_rabi_mhz } => {
            let r = curve_fit(|x, p| p[0] * (-x / p[1]).exp() + p[2], t, y, None, &[y[0] - last, t_mid, last])?;
            (r, 1, Some(f_rabi_mhz))
        }
        CoherenceKind::RabiDecay { f_rabi_mhz, t2_star_us } => {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let f0 = dominant_frequency(t, y, 2.0 * f_rabi_mhz, 2000);
            let model = |x: f64, p: &[f64]| {
                p[0] * (-x / p[1]).exp() * rabi_decay_envelope(x, p[3], t2_star_us) * (2.0 * PI * p[3] * x + p[4]).cos() + p[2]
            };
            let t_end = t[t.len() - 1];
            let r = curve_fit(model, t, y, None, &[0.5 * (hi - lo), t_end, mean, f0, 0.0])
                .or_else(|_| curve_fit(model, t, y, None, &[-0.5 * (hi - lo), t_end, mean, f0, 0.0]))?;
            (r, 1, Some(f_rabi_mhz))
        }
    };
    let time = fit.params[idx].abs();
    Ok(CoherenceFit {
        kind,
        time_us: time,
        sigma_us: fit.stderr(idx),
        quality: f_rabi.map(|f| 2.0 * f * time),
        params: fit.params.clone(),
        rss: fit.rss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    pub taus_us: Vec<f64>,
    /// Wall-clock span covered by one realization (s).
    pub span_s: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        RamseyConfig {
            taus_us: (0..40).map(|k| k as f64).collect(),
            span_s: 36_000.0,
            realizations: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyTrace {
    pub taus_us: Vec<f64>,
    pub p_up: Vec<f64>,
    pub fit: CoherenceFit,
}

/// Ramsey return probability averaged over quasi-static detunings drawn
/// from synthesized wall-clock noise, followed by a Gaussian decay fit.
pub fn ramsey_monte_carlo(model: &NoiseModel, cfg: &RamseyConfig) -> Result<RamseyTrace> {
    if cfg.taus_us.len() < 20 || cfg.realizations == 0 || !(cfg.span_s > 0.0) {
        return Err(invalid("Ramsey needs 20 delays, one realization and a positive span"));
    }
    let n = model.max_coarse_points / 2 - 8;
    let dt = cfg.span_s / n as f64;
    let m = model.clone().with_seed(cfg.seed);
    let mut acc = vec![0.0; cfg.taus_us.len()];
    let mut count = 0usize;
    for r in 0..cfg.realizations {
        let x = synthesize_uniform(&m, dt, n, r as u64)?;
        for &beta in &x {
            for (a, &tau) in acc.iter_mut().zip(&cfg.taus_us) {
                *a += (2.0 * PI * beta * tau).cos();
            }
        }
        count += x.len();
    }
    let p_up: Vec<f64> = acc.iter().map(|a| 0.5 * (1.0 + a / count as f64)).collect();
    let fit = fit_coherence(CoherenceKind::Ramsey, &cfg.taus_us, &p_up)?;
    Ok(RamseyTrace {
        taus_us: cfg.taus_us.clone(),
        p_up,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_starts_at_one() {
        assert_eq!(rabi_decay_envelope(0.0, 2.0, 10.0), 1.0);
    }

    #[test]
    fn gaussian_decay_recovered() {
        let t: Vec<f64> = (0..40).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| 0.5 * (-(x / 10.0f64).powi(2)).exp() + 0.5).collect();
        let f = fit_coherence(CoherenceKind::Ramsey, &t, &y).unwrap();
        assert!((f.time_us - 10.0).abs() < 1e-6);
    }
}
