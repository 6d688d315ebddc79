//! Single-qubit calibration ladder, pairwise Stark-phase measurements and the
//! simultaneous amplitude search.

mod state;

pub use state::{compile_compensation, ideal_amplitude, CalibrationState, Compensation, PairCalibration, QubitCalibration, StarkScaling};

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::clifford::{Axis, Timetable};
use crate::device::{RegisterModel, SpinState};
use crate::error::{invalid, Error, Result};
use crate::experiments::engine::{par_points, Executor, PointNoise, PreparedPulse, Pulse};
use crate::experiments::{prepare_drive, DriveSetup, RBConfig};
use crate::fit::{curve_fit, dominant_frequency, line_fit};
use crate::noise::{NoiseModel, DEFAULT_CYCLE_TIME_S};
use crate::optimize::{nelder_mead, NelderMeadOptions, OptimizeResult};
use crate::pulse::{make_shape, normalize_area, Shape, DEFAULT_SAMPLE_STEP_NS};
use crate::rng::{stream, tag};

/// Carrier offset used by the fine frequency step (MHz).
pub const RAMSEY_OFFSET_MHZ: f64 = 0.7;
/// Half width of the spectroscopy sweep (MHz).
pub const SPECTROSCOPY_SPAN_MHZ: f64 = 10.0;
/// Relative amplitude range of the fine amplitude sweep.
pub const FINE_AMPLITUDE_SPAN: f64 = 0.05;
const MIN_CONTRAST: f64 = 0.1;

/// Shared settings of every simulated calibration measurement.
#[derive(Debug, Clone)]
pub struct CalContext<'a> {
    pub register: &'a RegisterModel,
    /// `None` measures without dephasing noise.
    pub noise: Option<NoiseModel>,
    /// Shots per point; 0 returns exact probabilities.
    pub shots: usize,
    pub shape: Shape,
    pub shape_param: f64,
    pub sample_step_ns: f64,
    pub idle_ns: f64,
    pub cycle_time_s: f64,
    pub seed: u64,
}

impl<'a> CalContext<'a> {
    pub fn new(register: &'a RegisterModel) -> Self {
        CalContext {
            register,
            noise: None,
            shots: 0,
            shape: Shape::Kaiser,
            shape_param: Shape::Kaiser.default_param(),
            sample_step_ns: DEFAULT_SAMPLE_STEP_NS,
            idle_ns: 2.0,
            cycle_time_s: DEFAULT_CYCLE_TIME_S,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, noise: Option<NoiseModel>) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Gate pulse with rectangular-equivalent `amplitude`.
    pub fn gate_pulse(&self, cal: &CalibrationState, amplitude: f64) -> Result<PreparedPulse> {
        let unit = make_shape(self.shape, cal.gate_time_ns, self.shape_param, self.sample_step_ns)?;
        let env = normalize_area(&unit, amplitude, cal.gate_time_ns)?;
        Ok(PreparedPulse::from_envelope(&env, false))
    }

    /// Up-populations of `labels` after `body` for every point. The noise of
    /// a measurement is keyed by `key`, so repeating it repeats the noise.
    pub fn measure<F>(&self, key: [u64; 3], labels: &[usize], cycles: &[usize], slot_ns: f64, body: F) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(usize, &mut Executor, &mut SpinState) -> Result<()> + Sync + Send,
    {
        let noise = self.noise.as_ref().map(|m| {
            let seed = stream(self.seed, &[tag::CAL, key[0], key[1], key[2]]).random::<u64>();
            m.clone().with_seed(seed)
        });
        let pn = PointNoise::new(noise.as_ref(), labels, cycles, slot_ns, self.cycle_time_s, self.shots.max(1), &[])?;
        par_points(cycles.len(), |k| {
            let mut state = SpinState::new(self.register, labels)?;
            let mut ex = Executor::new(self.register, pn.binding(k), None);
            body(k, &mut ex, &mut state)?;
            labels
                .iter()
                .map(|&l| {
                    let p = state.prob_up(l)?.clamp(0.0, 1.0);
                    if self.shots == 0 {
                        return Ok(p);
                    }
                    let mut rng = stream(self.seed, &[tag::SHOTS, key[0], key[1], key[2], k as u64, l as u64]);
                    let b = Binomial::new(self.shots as u64, p).map_err(|e| invalid(e.to_string()))?;
                    Ok(b.sample(&mut rng) as f64 / self.shots as f64)
                })
                .collect()
        })
    }
}

fn column(v: &[Vec<f64>], c: usize) -> Vec<f64> {
    v.iter().map(|r| r[c]).collect()
}

fn contrast(y: &[f64]) -> f64 {
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn flat_failure(what: &str) -> Error {
    Error::FitFailure {
        reason: format!("{what}: flat response"),
        points: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub qubit: usize,
    pub f_res_mhz: f64,
    pub stderr_mhz: f64,
    pub f_rabi_mhz: f64,
}

/// Spectroscopy with a rectangular pi burst swept over `guess` +- 10 MHz.
pub fn calibrate_frequency_coarse(ctx: &CalContext, cal: &CalibrationState, qubit: usize, guess_mhz: f64) -> Result<FrequencyEstimate> {
    let amp = cal.qubit(qubit)?.amplitude;
    let dt = ctx.sample_step_ns;
    let duration = 2.0 * cal.gate_time_ns;
    let burst = PreparedPulse::burst(amp, duration, dt);
    let t_us = burst.duration_ns() * 1e-3;
    let n = 161;
    let freqs: Vec<f64> = (0..n)
        .map(|k| guess_mhz - SPECTROSCOPY_SPAN_MHZ + 2.0 * SPECTROSCOPY_SPAN_MHZ * k as f64 / (n - 1) as f64)
        .collect();
    let p = ctx.measure([1, qubit as u64, 0], &[qubit], &vec![1; n], duration, |k, ex, st| {
        let pulse = Pulse {
            qubit,
            shape: &burst,
            phase: 0.0,
            carrier_mhz: freqs[k],
        };
        ex.play(st, &[pulse], burst.duration_ns())
    })?;
    let y = column(&p, 0);
    if contrast(&y) < MIN_CONTRAST {
        return Err(flat_failure("spectroscopy"));
    }
    let k_max = (0..n).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let line = |f: f64, q: &[f64]| {
        let d = q[1] - f;
        let w = (d * d + q[2] * q[2]).sqrt();
        q[0] * q[2] * q[2] / (w * w) * (PI * t_us * w).sin().powi(2) + q[3]
    };
    let f_r0 = 0.25 / (cal.gate_time_ns * 1e-3);
    let r = curve_fit(line, &freqs, &y, None, &[1.0, freqs[k_max], f_r0, 0.0])?;
    Ok(FrequencyEstimate {
        qubit,
        f_res_mhz: r.params[1],
        stderr_mhz: r.stderr(1),
        f_rabi_mhz: r.params[2].abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimate {
    pub qubit: usize,
    pub amplitude: f64,
    pub f_rabi_measured_mhz: f64,
    pub gate_time_ns: f64,
}

/// pi/2 gate time for a target Rabi frequency.
pub fn gate_time_for(f_rabi_target_mhz: f64) -> f64 {
    250.0 / f_rabi_target_mhz
}

/// Rabi oscillation at the current amplitude, rescaled to the target Rabi
/// frequency.
pub fn calibrate_amplitude_coarse(
    ctx: &CalContext,
    cal: &CalibrationState,
    qubit: usize,
    f_rabi_target_mhz: f64,
) -> Result<AmplitudeEstimate> {
    if !(f_rabi_target_mhz > 0.0) {
        return Err(invalid("target Rabi frequency must be positive"));
    }
    let q = cal.qubit(qubit)?;
    let amp = q.amplitude;
    let expected = 0.25 / (cal.gate_time_ns * 1e-3);
    let n = 81;
    let t_max = 4.0 / expected;
    let dt = ctx.sample_step_ns;
    let times: Vec<f64> = (0..n)
        .map(|k| ((t_max * 1e3 * k as f64 / (n - 1) as f64) / dt).round() * dt)
        .collect();
    let bursts: Vec<PreparedPulse> = times.iter().map(|&t| PreparedPulse::burst(amp, t, dt)).collect();
    let carrier = q.f_mw_mhz;
    let p = ctx.measure([2, qubit as u64, 0], &[qubit], &vec![1; n], t_max * 1e3, |k, ex, st| {
        if bursts[k].values.is_empty() {
            return Ok(());
        }
        let pulse = Pulse {
            qubit,
            shape: &bursts[k],
            phase: 0.0,
            carrier_mhz: carrier,
        };
        ex.play(st, &[pulse], bursts[k].duration_ns())
    })?;
    let y = column(&p, 0);
    if contrast(&y) < MIN_CONTRAST {
        return Err(flat_failure("Rabi oscillation"));
    }
    let t_us: Vec<f64> = times.iter().map(|t| t * 1e-3).collect();
    let f0 = dominant_frequency(&t_us, &y, 3.0 * expected, 3000);
    let r = curve_fit(|t, q| q[0] * (2.0 * PI * q[1] * t).cos() + q[2], &t_us, &y, None, &[-0.5, f0, 0.5])?;
    let f_r = r.params[1].abs();
    Ok(AmplitudeEstimate {
        qubit,
        amplitude: amp * f_rabi_target_mhz / f_r,
        f_rabi_measured_mhz: f_r,
        gate_time_ns: gate_time_for(f_rabi_target_mhz),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineFrequency {
    pub qubit: usize,
    pub f_mw_mhz: f64,
    /// Fitted fringe frequency (MHz).
    pub f_det_mhz: f64,
    pub contrast: f64,
}

/// Ramsey fringes with the carrier deliberately 0.7 MHz below the current
/// estimate; the fringe frequency gives the correction.
pub fn calibrate_frequency_fine(ctx: &CalContext, cal: &CalibrationState, qubit: usize) -> Result<FineFrequency> {
    let q = cal.qubit(qubit)?;
    let pulse = ctx.gate_pulse(cal, q.amplitude)?;
    let carrier = q.f_mw_mhz - RAMSEY_OFFSET_MHZ;
    let n = 61;
    let step_ns = 100.0;
    let waits: Vec<f64> = (0..n).map(|k| k as f64 * step_ns).collect();
    let slot = cal.gate_time_ns + ctx.idle_ns;
    let p = ctx.measure([3, qubit as u64, 0], &[qubit], &vec![3; n], slot, |k, ex, st| {
        let x = Pulse {
            qubit,
            shape: &pulse,
            phase: 0.0,
            carrier_mhz: carrier,
        };
        ex.play(st, &[x], slot)?;
        ex.idle(st, waits[k])?;
        ex.play(st, &[x], slot)
    })?;
    let y = column(&p, 0);
    let t_us: Vec<f64> = waits.iter().map(|w| w * 1e-3).collect();
    let f0 = dominant_frequency(&t_us, &y, 2.0, 4000);
    let model = |t: f64, q: &[f64]| q[0] * (2.0 * PI * q[1] * t + q[2]).cos() * (-(t / q[3]).powi(2)).exp() + q[4];
    let r = curve_fit(model, &t_us, &y, None, &[0.5, f0, 0.0, 20.0, 0.5])?;
    let c = 2.0 * r.params[0].abs();
    if c < MIN_CONTRAST {
        return Err(Error::FringeContrastTooLow {
            contrast: c,
            min: MIN_CONTRAST,
        });
    }
    let f_det = r.params[1].abs();
    Ok(FineFrequency {
        qubit,
        f_mw_mhz: carrier + f_det,
        f_det_mhz: f_det,
        contrast: c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineAmplitude {
    pub qubit: usize,
    pub amplitude: f64,
    pub sweep: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
    /// Fitted 17-pulse population at the returned amplitude.
    pub check: f64,
}

fn train(n: usize, ex: &mut Executor, st: &mut SpinState, pulses: &[Pulse], slot: f64) -> Result<()> {
    for _ in 0..n {
        ex.play(st, pulses, slot)?;
    }
    Ok(())
}

/// Crossing of the 16+1 and 16+3 pulse-train populations over +-5 % of the
/// current amplitude.
pub fn calibrate_amplitude_fine(ctx: &CalContext, cal: &CalibrationState, qubit: usize) -> Result<FineAmplitude> {
    let q = cal.qubit(qubit)?;
    let a0 = q.amplitude;
    let carrier = q.f_mw_mhz;
    let n = 21;
    let sweep: Vec<f64> = (0..n)
        .map(|k| a0 * (1.0 - FINE_AMPLITUDE_SPAN + 2.0 * FINE_AMPLITUDE_SPAN * k as f64 / (n - 1) as f64))
        .collect();
    let pulses: Vec<PreparedPulse> = sweep.iter().map(|&a| ctx.gate_pulse(cal, a)).collect::<Result<_>>()?;
    let slot = cal.gate_time_ns + ctx.idle_ns;
    let run = |reps: usize, key: u64| {
        ctx.measure([4, qubit as u64, key], &[qubit], &vec![reps; n], slot, |k, ex, st| {
            let p = Pulse {
                qubit,
                shape: &pulses[k],
                phase: 0.0,
                carrier_mhz: carrier,
            };
            train(reps, ex, st, &[p], slot)
        })
        .map(|v| column(&v, 0))
    };
    let p_plus = run(17, 17)?;
    let p_minus = run(19, 19)?;
    let fit = |y: &[f64], reps: usize| {
        let k0 = reps as f64 * FRAC_PI_2 / a0;
        curve_fit(|v, p| p[0] * (p[1] * v + p[2]).cos() + p[3], &sweep, y, None, &[-0.5, k0, 0.0, 0.5])
    };
    let fp = fit(&p_plus, 17)?;
    let fm = fit(&p_minus, 19)?;
    let eval = |p: &[f64], v: f64| p[0] * (p[1] * v + p[2]).cos() + p[3];
    let diff = |v: f64| eval(&fp.params, v) - eval(&fm.params, v);
    let (lo, hi) = (sweep[0], sweep[n - 1]);
    // scan for sign changes and keep the one closest to the start value
    let grid = 400;
    let mut best: Option<f64> = None;
    let mut prev = (lo, diff(lo));
    for k in 1..=grid {
        let v = lo + (hi - lo) * k as f64 / grid as f64;
        let d = diff(v);
        if prev.1 == 0.0 || prev.1.signum() != d.signum() {
            let (mut a, mut b) = (prev.0, v);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if diff(a).signum() == diff(m).signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            let root = 0.5 * (a + b);
            if best.is_none_or(|r| (root - a0).abs() < (r - a0).abs()) {
                best = Some(root);
            }
        }
        prev = (v, d);
    }
    let amplitude = best.ok_or(Error::NoIntersection { lo, hi })?;
    Ok(FineAmplitude {
        qubit,
        amplitude,
        check: eval(&fp.params, amplitude),
        sweep,
        p_plus,
        p_minus,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub qubit: usize,
    pub coarse: FrequencyEstimate,
    pub amplitude: AmplitudeEstimate,
    pub fine_frequency: FineFrequency,
    pub fine_amplitude: FineAmplitude,
}

/// Coarse frequency, coarse amplitude, fine frequency and fine amplitude for
/// each qubit, writing the results into `cal`.
pub fn run_ladder(ctx: &CalContext, cal: &mut CalibrationState, qubits: &[usize], f_rabi_target_mhz: f64) -> Result<Vec<LadderStep>> {
    let tg = gate_time_for(f_rabi_target_mhz);
    let mut out = Vec::new();
    for &q in qubits {
        let guess = cal.qubit(q)?.f_mw_mhz;
        let coarse = calibrate_frequency_coarse(ctx, cal, q, guess)?;
        cal.qubit_mut(q)?.f_mw_mhz = coarse.f_res_mhz;
        let amplitude = calibrate_amplitude_coarse(ctx, cal, q, f_rabi_target_mhz)?;
        // the amplitude rescale also fixes the gate time
        let k = cal.gate_time_ns / tg;
        for other in cal.qubits.iter_mut().filter(|c| c.label != q) {
            other.amplitude *= k;
        }
        cal.gate_time_ns = tg;
        cal.qubit_mut(q)?.amplitude = amplitude.amplitude;
        let fine_frequency = calibrate_frequency_fine(ctx, cal, q)?;
        cal.qubit_mut(q)?.f_mw_mhz = fine_frequency.f_mw_mhz;
        let fine_amplitude = calibrate_amplitude_fine(ctx, cal, q)?;
        cal.qubit_mut(q)?.amplitude = fine_amplitude.amplitude;
        out.push(LadderStep {
            qubit: q,
            coarse,
            amplitude,
            fine_frequency,
            fine_amplitude,
        });
    }
    cal.touch();
    Ok(out)
}

/// Sign that maps the echo quadrature angle onto the frame advance that
/// cancels it.
const ECHO_SIGN: f64 = 1.0;
const MAX_BLOCKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMeasurement {
    pub target: usize,
    pub drivers: Vec<usize>,
    pub delta_phi: f64,
    pub stderr: f64,
    pub n_blocks: usize,
    /// (driver gates, accumulated phase) per echo.
    pub phases: Vec<(usize, f64)>,
}

/// Accumulated target phase after echoes with `4 n` gates on every driver
/// in the first arm.
fn echo_phases(
    ctx: &CalContext,
    cal: &CalibrationState,
    target: usize,
    drivers: &[usize],
    driver_scale: f64,
    blocks: &[usize],
    key: u64,
) -> Result<Vec<f64>> {
    let tq = cal.qubit(target)?;
    let tp = ctx.gate_pulse(cal, tq.amplitude)?;
    let dps: Vec<(usize, f64, PreparedPulse)> = drivers
        .iter()
        .map(|&d| {
            let c = cal.qubit(d)?;
            Ok((d, c.f_mw_mhz, ctx.gate_pulse(cal, c.amplitude * driver_scale)?))
        })
        .collect::<Result<_>>()?;
    let slot = cal.gate_time_ns + ctx.idle_ns;
    let cycles: Vec<usize> = blocks.iter().flat_map(|&n| [8 * n + 4; 2]).collect();
    let p = ctx.measure([5, target as u64, key], &[target], &cycles, slot, |k, ex, st| {
        let n = blocks[k / 2];
        let last_phase = if k % 2 == 0 { 0.0 } else { FRAC_PI_2 };
        let x = Pulse {
            qubit: target,
            shape: &tp,
            phase: 0.0,
            carrier_mhz: tq.f_mw_mhz,
        };
        let drive: SmallVec<[Pulse; 4]> = dps
            .iter()
            .map(|(d, f, s)| Pulse {
                qubit: *d,
                shape: s,
                phase: 0.0,
                carrier_mhz: *f,
            })
            .collect();
        ex.play(st, &[x], slot)?;
        train(4 * n, ex, st, &drive, slot)?;
        ex.play(st, &[x], slot)?;
        ex.play(st, &[x], slot)?;
        for _ in 0..4 * n {
            ex.idle(st, slot)?;
        }
        let last = Pulse { phase: last_phase, ..x };
        ex.play(st, &[last], slot)
    })?;
    let angles: Vec<f64> = p
        .chunks(2)
        .map(|c| ECHO_SIGN * (2.0 * c[1][0] - 1.0).atan2(1.0 - 2.0 * c[0][0]))
        .collect();
    Ok(angles)
}

fn block_grid(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=4).map(|k| (n * k + 2) / 4).collect();
    v.dedup();
    v
}

/// Echo-based phase per driver gate on `target` with all `drivers` played
/// together. `n_blocks = None` picks N from a single-block probe so that the
/// largest echo stays within pi/2.
pub fn measure_crosstalk_multi(
    ctx: &CalContext,
    cal: &CalibrationState,
    target: usize,
    drivers: &[usize],
    n_blocks: Option<usize>,
    driver_scale: f64,
) -> Result<CrosstalkMeasurement> {
    if drivers.is_empty() || drivers.contains(&target) {
        return Err(invalid("drivers must be non-empty and exclude the target"));
    }
    let key = drivers.iter().fold(driver_scale.to_bits(), |h, &d| h.rotate_left(7) ^ d as u64);
    let probe = echo_phases(ctx, cal, target, drivers, driver_scale, &[0, 1], key ^ 0x5eed)?;
    let est = (probe[1] - probe[0]) / 4.0;
    let n = match n_blocks {
        Some(n) => {
            if (4.0 * n as f64 * est).abs() > PI {
                return Err(Error::PhaseWrap {
                    phase: 4.0 * n as f64 * est,
                    n_blocks: n,
                });
            }
            n.max(1)
        }
        None => {
            if est.abs() < 1e-12 {
                MAX_BLOCKS
            } else {
                ((FRAC_PI_2 / (4.0 * est.abs())).floor() as usize).clamp(1, MAX_BLOCKS)
            }
        }
    };
    let blocks = block_grid(n);
    let angles = echo_phases(ctx, cal, target, drivers, driver_scale, &blocks, key)?;
    let x: Vec<f64> = blocks.iter().map(|&b| 4.0 * b as f64).collect();
    let y: Vec<f64> = angles.iter().map(|a| a - angles[0]).collect();
    let l = line_fit(&x, &y, None)?;
    Ok(CrosstalkMeasurement {
        target,
        drivers: drivers.to_vec(),
        delta_phi: l.slope,
        stderr: l.var_slope.max(0.0).sqrt(),
        n_blocks: n,
        phases: blocks.iter().map(|&b| 4 * b).zip(y).collect(),
    })
}

/// Phase per gate of `driver` picked up by `target`.
pub fn measure_crosstalk_phase(
    ctx: &CalContext,
    cal: &CalibrationState,
    target: usize,
    driver: usize,
    n_blocks: Option<usize>,
) -> Result<CrosstalkMeasurement> {
    measure_crosstalk_multi(ctx, cal, target, &[driver], n_blocks, 1.0)
}

/// Every ordered (target, driver) pair of `qubits`.
pub fn pairwise_plan(qubits: &[usize]) -> Vec<(usize, usize)> {
    qubits
        .iter()
        .flat_map(|&t| qubits.iter().filter(move |&&d| d != t).map(move |&d| (t, d)))
        .collect()
}

/// Measure every pair of `qubits` and store the phases in `cal`.
pub fn calibrate_crosstalk(ctx: &CalContext, cal: &mut CalibrationState, qubits: &[usize]) -> Result<Vec<CrosstalkMeasurement>> {
    let mut out = Vec::new();
    for (t, d) in pairwise_plan(qubits) {
        let m = measure_crosstalk_phase(ctx, cal, t, d, None)?;
        cal.set_pair(PairCalibration {
            target: t,
            driver: d,
            delta_phi: m.delta_phi,
            stderr: m.stderr,
            n_blocks: m.n_blocks,
            scaling: None,
        });
        out.push(m);
    }
    cal.touch();
    Ok(out)
}

/// `A V^alpha` from a log-log line fit.
pub fn fit_stark_scaling(amplitudes: &[f64], phases: &[f64]) -> Result<StarkScaling> {
    if amplitudes.len() < 5 || amplitudes.len() != phases.len() {
        return Err(invalid("power-law fit needs at least five amplitude/phase pairs"));
    }
    if amplitudes.iter().chain(phases).any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveData);
    }
    let x: Vec<f64> = amplitudes.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = phases.iter().map(|v| v.ln()).collect();
    let l = line_fit(&x, &y, None)?;
    Ok(StarkScaling {
        a: l.intercept.exp(),
        alpha: l.slope,
        sigma_alpha: l.var_slope.max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkSweep {
    pub target: usize,
    pub driver: usize,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub scaling: StarkScaling,
}

/// Phase per gate against driver amplitude, fitted with a power law.
pub fn stark_sweep(ctx: &CalContext, cal: &CalibrationState, target: usize, driver: usize, scales: &[f64]) -> Result<StarkSweep> {
    let a0 = cal.qubit(driver)?.amplitude;
    let mut amplitudes = Vec::new();
    let mut phases = Vec::new();
    for &s in scales {
        let m = measure_crosstalk_multi(ctx, cal, target, &[driver], None, s)?;
        amplitudes.push(a0 * s);
        phases.push(m.delta_phi.abs());
    }
    let scaling = fit_stark_scaling(&amplitudes, &phases)?;
    Ok(StarkSweep {
        target,
        driver,
        amplitudes,
        phases,
        scaling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumCheck {
    pub target: usize,
    pub drivers: Vec<usize>,
    pub individual: Vec<f64>,
    pub sum: f64,
    pub simultaneous: f64,
    pub deviation: f64,
}

/// Compare the phase under all drivers at once with the sum of the pairwise
/// phases stored in `cal`.
pub fn pairwise_sum_check(ctx: &CalContext, cal: &CalibrationState, target: usize, drivers: &[usize]) -> Result<SumCheck> {
    let individual: Vec<f64> = drivers
        .iter()
        .map(|&d| cal.delta_phi(target, d).ok_or(Error::MissingPairCalibration { target, driver: d }))
        .collect::<Result<_>>()?;
    let sum: f64 = individual.iter().sum();
    let simultaneous = if drivers.len() == 1 {
        sum
    } else {
        measure_crosstalk_multi(ctx, cal, target, drivers, None, 1.0)?.delta_phi
    };
    let deviation = if sum == 0.0 && simultaneous == 0.0 {
        0.0
    } else {
        ((simultaneous - sum) / sum).abs()
    };
    Ok(SumCheck {
        target,
        drivers: drivers.to_vec(),
        individual,
        sum,
        simultaneous,
        deviation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOptimization {
    pub qubits: Vec<usize>,
    pub initial: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub result: OptimizeResult,
}

pub fn default_optimizer_options(n: usize) -> NelderMeadOptions {
    NelderMeadOptions {
        step: vec![0.02; n],
        threshold: 0.01,
        max_iterations: 50,
        restart_size: 0.02,
    }
}

/// Summed |P(16+1) - P(16+3)| with every qubit driven in every cycle and
/// the calibrated frame compensation applied.
pub fn simultaneous_objective(ctx: &CalContext, cal: &CalibrationState, qubits: &[usize], amplitudes: &[f64], key: u64) -> Result<f64> {
    let mut trial = cal.clone();
    for (&q, &a) in qubits.iter().zip(amplitudes) {
        if !(a > 0.0) {
            return Ok(qubits.len() as f64);
        }
        trial.qubit_mut(q)?.simultaneous_amplitude = Some(a);
    }
    let cfg = RBConfig {
        gate_time_ns: cal.gate_time_ns,
        shape: ctx.shape,
        shape_param: Some(ctx.shape_param),
        sample_step_ns: ctx.sample_step_ns,
        ..RBConfig::default()
    };
    let setups: Vec<DriveSetup> = prepare_drive(ctx.register, &trial, &cfg, qubits)?;
    let slot = cal.gate_time_ns + ctx.idle_ns;
    let table = |n: usize| Timetable {
        gate_time_ns: cal.gate_time_ns,
        qubits: qubits.to_vec(),
        cycles: vec![qubits.iter().map(|&q| (q, Axis::X)).collect(); n],
    };
    let t17 = table(17);
    let t19 = table(19);
    let comp = if qubits.len() > 1 {
        Some(Compensation::new(&trial, &t17)?)
    } else {
        None
    };
    let p = ctx.measure([6, key, 0], qubits, &[17, 19], slot, |k, ex, st| {
        let t = if k == 0 { &t17 } else { &t19 };
        crate::experiments::play_timetable(ex, st, &setups, t, comp.as_ref(), slot)
    })?;
    Ok(p[0].iter().zip(&p[1]).map(|(a, b)| (a - b).abs()).sum())
}

/// Simplex search over the simultaneous amplitudes of `qubits`, starting
/// from their current values. The result is stored in `cal`.
pub fn optimize_simultaneous_amplitudes(
    ctx: &CalContext,
    cal: &mut CalibrationState,
    qubits: &[usize],
    opts: &NelderMeadOptions,
) -> Result<AmplitudeOptimization> {
    let initial: Vec<f64> = qubits
        .iter()
        .map(|&q| cal.qubit(q).map(|c| c.simultaneous_amplitude.unwrap_or(c.amplitude)))
        .collect::<Result<_>>()?;
    let snapshot = cal.clone();
    let mut evals = 0u64;
    let mut failure = None;
    let result = nelder_mead(
        |x| {
            evals += 1;
            let amps: Vec<f64> = initial.iter().zip(x).map(|(a, r)| a * (1.0 + r)).collect();
            match simultaneous_objective(ctx, &snapshot, qubits, &amps, evals) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        &vec![0.0; qubits.len()],
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let amplitudes: Vec<f64> = initial.iter().zip(&result.best).map(|(a, r)| a * (1.0 + r)).collect();
    for (&q, &a) in qubits.iter().zip(&amplitudes) {
        cal.qubit_mut(q)?.simultaneous_amplitude = Some(a);
    }
    cal.touch();
    Ok(AmplitudeOptimization {
        qubits: qubits.to_vec(),
        initial,
        amplitudes,
        result,
    })
}
