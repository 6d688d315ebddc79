//! Randomized benchmarking campaigns, sweeps and coherence fits.

mod coherence;
pub mod engine;
mod rb;

pub use coherence::{fit_coherence, rabi_decay_envelope, ramsey_monte_carlo, CoherenceFit, CoherenceKind, RamseyConfig, RamseyTrace};
pub use rb::{
    detuning_sweep, play_timetable, prepare_drive, run_interleaved, run_rb, run_srb, tg_sweep, DriveSetup, InterleavedResult, SrbResult,
    SweepRow, SweepTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::line_fit;
use crate::noise::{DEFAULT_AWG_LOADING_S, DEFAULT_CYCLE_TIME_S};
use crate::pulse::{Shape, DEFAULT_SAMPLE_STEP_NS};

/// Mean primitive gates per Clifford.
pub const PRIMITIVES_PER_CLIFFORD: f64 = 3.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// Populations read directly from the final state.
    Direct,
    /// Pairs (1,2) and (4,5) reconstructed from ZZ/ZI parity runs, Q3 by QND.
    Tomographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RBConfig {
    pub lengths: Vec<usize>,
    pub randomizations: usize,
    pub shots: usize,
    pub gate_time_ns: f64,
    pub shape: Shape,
    /// Shape parameter; `None` takes the shape default.
    pub shape_param: Option<f64>,
    /// Overrides the noise model's scale factor.
    pub chi: Option<f64>,
    pub qubits: Vec<usize>,
    pub simultaneous: bool,
    pub idle_ns: f64,
    pub sample_step_ns: f64,
    pub cycle_time_s: f64,
    /// Dead time before every randomization after the first; 0 disables it.
    pub awg_loading_s: f64,
    pub edge_jitter: bool,
    /// Carrier minus calibrated frequency.
    pub carrier_offset_mhz: f64,
    /// Apply crosstalk phase compensation in simultaneous runs.
    pub compensate: bool,
    pub readout: ReadoutMode,
    /// Replace the physics by a depolarizing channel with this parameter per
    /// Clifford.
    pub depolarizing: Option<f64>,
    pub seed: u64,
}

impl Default for RBConfig {
    fn default() -> Self {
        RBConfig {
            lengths: (0..=11).map(|k| 1usize << k).collect(),
            randomizations: 35,
            shots: 350,
            gate_time_ns: 83.0,
            shape: Shape::Kaiser,
            shape_param: None,
            chi: None,
            qubits: vec![3],
            simultaneous: false,
            idle_ns: 2.0,
            sample_step_ns: DEFAULT_SAMPLE_STEP_NS,
            cycle_time_s: DEFAULT_CYCLE_TIME_S,
            awg_loading_s: DEFAULT_AWG_LOADING_S,
            edge_jitter: false,
            carrier_offset_mhz: 0.0,
            compensate: true,
            readout: ReadoutMode::Direct,
            depolarizing: None,
            seed: 0,
        }
    }
}

impl RBConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(invalid("lengths must be non-empty and at least 1"));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("lengths must be strictly ascending"));
        }
        if self.shots == 0 || self.randomizations == 0 {
            return Err(invalid("shots and randomizations must be at least 1"));
        }
        if !(self.gate_time_ns > 0.0) || self.idle_ns < 0.0 {
            return Err(invalid("gate time must be positive and idle non-negative"));
        }
        if self.qubits.is_empty() {
            return Err(invalid("no qubits selected"));
        }
        if let Some(p) = self.depolarizing {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("depolarizing parameter must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn shape_param(&self) -> f64 {
        self.shape_param.unwrap_or_else(|| self.shape.default_param())
    }
}

/// Sequence fidelity F(n) at one length, aggregated over randomizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub length: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    /// Half width of the 95% interval of the mean.
    pub ci95: f64,
    pub samples: Vec<f64>,
}

impl DecayPoint {
    pub fn from_samples(length: usize, samples: Vec<f64>) -> Self {
        let r = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / r;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        let stderr = std / r.sqrt();
        DecayPoint {
            length,
            mean,
            std,
            stderr,
            ci95: 1.96 * stderr,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub p: f64,
    /// Covariance of (A, p).
    pub covariance: [[f64; 2]; 2],
    pub sigma_p: f64,
    pub f_clifford: f64,
    pub f_primitive: f64,
    pub sigma_f_primitive: f64,
    pub points_used: usize,
}

pub fn clifford_fidelity(p: f64) -> f64 {
    (1.0 + p) / 2.0
}

pub fn primitive_fidelity(p: f64) -> f64 {
    1.0 - (1.0 - clifford_fidelity(p)) / PRIMITIVES_PER_CLIFFORD
}

/// Fit F(n) = A p^n as a weighted line in ln F. Points not clearly above
/// zero (mean within three standard errors) are dropped. The standard error
/// is floored at the shot-noise level of a single randomization so that
/// noiseless data still carries a finite weight.
pub fn fit_decay(points: &[DecayPoint], shots: usize) -> Result<DecayFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut var = Vec::new();
    for pt in points {
        let floor = 1.0 / (shots.max(1) as f64 * (pt.samples.len().max(1) as f64).sqrt());
        let se = pt.stderr.max(floor);
        if pt.mean > 3.0 * se {
            x.push(pt.length as f64);
            y.push(pt.mean.ln());
            var.push((se / pt.mean).powi(2));
        }
    }
    if x.len() < 2 {
        return Err(Error::FitFailure {
            reason: format!("only {} lengths lie above the noise floor", x.len()),
            points: points.to_vec(),
        });
    }
    let l = line_fit(&x, &y, Some(&var))?;
    let sigma_slope = l.var_slope.max(0.0).sqrt();
    if l.slope > 3.0 * sigma_slope && l.slope > 1e-12 {
        return Err(Error::FitFailure {
            reason: format!("decay grows with length (slope {:.3e} +- {:.1e})", l.slope, sigma_slope),
            points: points.to_vec(),
        });
    }
    let p = l.slope.exp().min(1.0);
    let a = l.intercept.exp();
    let sigma_p = p * sigma_slope;
    let covariance = [[a * a * l.var_intercept, a * p * l.cov], [a * p * l.cov, p * p * l.var_slope]];
    Ok(DecayFit {
        a,
        p,
        covariance,
        sigma_p,
        f_clifford: clifford_fidelity(p),
        f_primitive: primitive_fidelity(p),
        sigma_f_primitive: sigma_p / (2.0 * PRIMITIVES_PER_CLIFFORD),
        points_used: x.len(),
    })
}

/// Fidelity of an interleaved word from the two decay parameters, single
/// qubit (d = 2) form: (1 + p_inter / p_ref) / 2.
pub fn interleaved_fidelity(p_ref: f64, sigma_ref: f64, p_inter: f64, sigma_inter: f64) -> (f64, f64) {
    let r = p_inter / p_ref;
    let sr = r * ((sigma_ref / p_ref).powi(2) + (sigma_inter / p_inter).powi(2)).sqrt();
    ((1.0 + r) / 2.0, sr / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBResult {
    pub qubit: usize,
    pub gate_time_ns: f64,
    pub points: Vec<DecayPoint>,
    pub fit: DecayFit,
}

impl RBResult {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fit.f_primitive
    }

    /// CSV decay table: length, mean, std, ci95.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "length,mean,std,ci95")?;
        for p in &self.points {
            writeln!(out, "{},{:.10},{:.10},{:.10}", p.length, p.mean, p.std, p.ci95)?;
        }
        Ok(())
    }
}
