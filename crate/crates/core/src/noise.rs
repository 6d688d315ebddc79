//! Dephasing noise with a `f^-1.3 + f^-1` spectrum.
//!
//! One wall-clock process is drawn on a coarse grid covering the whole
//! experiment, including dead time. Each sequence takes its mean as the LF
//! value. The IF value of each gate slot is the coarse deviation at a
//! representative shot plus a finer band drawn per sequence on the gate-slot
//! grid, so the two bands come from one spectrum split at the coarse Nyquist
//! frequency. Above the slot Nyquist frequency the noise is treated as white.
//!
//! The PSD is in Hz^2/Hz (one-sided) for a detuning in Hz. Traces are returned
//! in MHz.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub lf: bool,
    pub if_: bool,
    pub hf: bool,
}

impl Default for BandSelection {
    fn default() -> Self {
        BandSelection {
            lf: true,
            if_: true,
            hf: true,
        }
    }
}

impl BandSelection {
    pub const LF_ONLY: BandSelection = BandSelection {
        lf: true,
        if_: false,
        hf: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub psd_coeff_a: f64,
    pub exponent_a: f64,
    pub psd_coeff_b: f64,
    pub exponent_b: f64,
    pub overall_scale: f64,
    pub chi: f64,
    pub hf_update_step_ns: f64,
    pub seed: u64,
    pub bands: BandSelection,
    /// Upper bound on the coarse grid length, padding included.
    pub max_coarse_points: usize,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            psd_coeff_a: 0.25,
            exponent_a: 1.3,
            psd_coeff_b: 1.0,
            exponent_b: 1.0,
            overall_scale: 1e7,
            chi: 1.0,
            hf_update_step_ns: 10.0,
            seed: 0,
            bands: BandSelection::default(),
            max_coarse_points: 1 << 22,
        }
    }
}

impl NoiseModel {
    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_bands(mut self, bands: BandSelection) -> Self {
        self.bands = bands;
        self
    }

    /// One-sided PSD in Hz^2/Hz at `f` Hz, including `chi`.
    pub fn psd(&self, f: f64) -> f64 {
        self.chi * self.overall_scale * (self.psd_coeff_a * f.powf(-self.exponent_a) + self.psd_coeff_b * f.powf(-self.exponent_b))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0) || !self.chi.is_finite() {
            return Err(invalid(format!("chi must be >= 0, got {}", self.chi)));
        }
        if !(self.hf_update_step_ns > 0.0) {
            return Err(invalid("hf_update_step_ns must be positive"));
        }
        let base = self.clone().with_chi(1.0);
        for f in [1e-6, 1.0, 1e8] {
            let s = base.psd(f);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::PsdNonPositive(f));
            }
        }
        Ok(())
    }

    /// RMS detuning (Hz) from integrating the PSD over `[f_lo, f_hi]`.
    pub fn band_rms(&self, f_lo: f64, f_hi: f64) -> f64 {
        let mut s = 0.0;
        let n = 4000;
        let (a, b) = (f_lo.ln(), f_hi.ln());
        for k in 0..n {
            let x0 = a + (b - a) * k as f64 / n as f64;
            let x1 = a + (b - a) * (k + 1) as f64 / n as f64;
            let xm = 0.5 * (x0 + x1);
            let f = xm.exp();
            s += self.psd(f) * f * (x1 - x0);
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledSequence {
    pub slots: usize,
    pub dead_time_before_s: f64,
}

/// Wall-clock layout of an experiment: every sequence is repeated `shots`
/// times back to back, one shot per `cycle_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSchedule {
    pub gate_time_ns: f64,
    pub idle_ns: f64,
    pub cycle_time_s: f64,
    pub shots: usize,
    pub sequences: Vec<ScheduledSequence>,
}

pub const DEFAULT_CYCLE_TIME_S: f64 = 1.75e-3;
pub const DEFAULT_AWG_LOADING_S: f64 = 300.0;

impl ExperimentSchedule {
    pub fn slot_ns(&self) -> f64 {
        self.gate_time_ns + self.idle_ns
    }

    /// Start time (s) of each sequence and the total span.
    pub fn timeline(&self) -> (Vec<f64>, f64) {
        let span = self.shots as f64 * self.cycle_time_s;
        let mut t = 0.0;
        let mut starts = Vec::with_capacity(self.sequences.len());
        for s in &self.sequences {
            t += s.dead_time_before_s;
            starts.push(t);
            t += span;
        }
        (starts, t)
    }

    fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() || self.shots == 0 {
            return Err(Error::ScheduleEmpty);
        }
        if !(self.slot_ns() > 0.0) || !(self.cycle_time_s > 0.0) {
            return Err(invalid("schedule durations must be positive"));
        }
        Ok(())
    }
}

/// Frequencies (Hz) separating the bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    /// Lowest synthesized frequency, one over the total span.
    pub f_cut: f64,
    /// Upper edge of the coarse wall-clock process.
    pub f_lf_max: f64,
    /// Nyquist frequency of the gate-slot grid.
    pub f_if_max: f64,
    /// Nyquist frequency of the HF update grid.
    pub f_hf_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceNoise {
    pub start_s: f64,
    pub lf: f64,
    pub if_values: Vec<f64>,
    pub hf_samples: Vec<f64>,
    pub hf_step_ns: f64,
}

impl SequenceNoise {
    pub fn quiet(slots: usize) -> Self {
        SequenceNoise {
            start_s: 0.0,
            lf: 0.0,
            if_values: vec![0.0; slots],
            hf_samples: Vec::new(),
            hf_step_ns: 10.0,
        }
    }

    /// Detuning (MHz) during slot `slot` at time `t_ns` from sequence start.
    #[inline]
    pub fn at(&self, slot: usize, t_ns: f64) -> f64 {
        let mut b = self.lf + self.if_values.get(slot).copied().unwrap_or(0.0);
        if !self.hf_samples.is_empty() {
            let k = ((t_ns / self.hf_step_ns) as usize).min(self.hf_samples.len() - 1);
            b += self.hf_samples[k];
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrace {
    pub edges: BandEdges,
    pub total_span_s: f64,
    pub sequences: Vec<SequenceNoise>,
}

impl NoiseTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sequence,slot,start_s,lf_mhz,if_mhz")?;
        for (k, s) in self.sequences.iter().enumerate() {
            for (j, v) in s.if_values.iter().enumerate() {
                writeln!(out, "{k},{j},{},{},{}", s.start_s, s.lf, v)?;
            }
        }
        Ok(())
    }
}

/// Real Gaussian process on a uniform grid with one-sided PSD `psd` (units^2/Hz)
/// restricted to `[f_lo, f_hi]`. `fft_len` must be at least `n`; samples beyond
/// `n` are discarded, which breaks the periodic wrap of the transform.
pub fn spectral_synthesis<R: Rng>(
    psd: impl Fn(f64) -> f64,
    dt_s: f64,
    n: usize,
    fft_len: usize,
    f_lo: f64,
    f_hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let len = fft_len.max(n).max(2);
    let df = 1.0 / (len as f64 * dt_s);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for k in 1..len.div_ceil(2) {
        let f = k as f64 * df;
        // the two normals are always drawn so the stream does not depend on the band
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if f < f_lo || f > f_hi {
            continue;
        }
        let amp = 0.5 * len as f64 * (psd(f) * df).sqrt();
        let x = Complex64::new(amp * a, amp * b);
        buf[k] = x;
        buf[len - k] = x.conj();
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let norm = 1.0 / len as f64;
    buf[..n].iter().map(|c| c.re * norm).collect()
}

/// Continuous trace of `n` samples spaced `dt_s`, in MHz, with the full
/// spectrum from `1/(n dt)` up to Nyquist.
pub fn synthesize_uniform(model: &NoiseModel, dt_s: f64, n: usize, stream_id: u64) -> Result<Vec<f64>> {
    model.validate()?;
    if n < 2 || !(dt_s > 0.0) {
        return Err(invalid("uniform trace needs n >= 2 and dt > 0"));
    }
    if model.chi == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = stream(model.seed, &[tag::COARSE, stream_id, 0xf00d]);
    let f_lo = 1.0 / (n as f64 * dt_s);
    let psd = |f: f64| model.psd(f) * 1e-12;
    Ok(spectral_synthesis(psd, dt_s, n, n, f_lo, 0.5 / dt_s, &mut rng))
}

/// Generator of per-sequence noise for one qubit (`stream_id`). The coarse
/// wall-clock process is drawn once on construction; finer bands are drawn on
/// demand per sequence, so any subset of sequences can be produced in any
/// order with identical results.
#[derive(Debug, Clone)]
pub struct NoiseSynthesizer {
    model: NoiseModel,
    schedule: ExperimentSchedule,
    stream_id: u64,
    edges: BandEdges,
    starts: Vec<f64>,
    total: f64,
    lf: Vec<f64>,
    residual: Vec<f64>,
}

impl NoiseSynthesizer {
    pub fn new(model: &NoiseModel, schedule: &ExperimentSchedule, stream_id: u64) -> Result<Self> {
        model.validate()?;
        schedule.validate()?;
        let (starts, total) = schedule.timeline();
        let max_pts = model.max_coarse_points.max(1024);
        let at_cycle = (total / schedule.cycle_time_s).ceil() as usize + 2;
        let dt_c = if 2 * at_cycle <= max_pts {
            schedule.cycle_time_s
        } else {
            2.0 * total / (max_pts - 8) as f64
        };
        let slot_s = schedule.slot_ns() * 1e-9;
        let edges = BandEdges {
            f_cut: 1.0 / total,
            f_lf_max: 0.5 / dt_c,
            f_if_max: 0.5 / slot_s,
            f_hf_max: 0.5e9 / model.hf_update_step_ns,
        };
        let n_seq = schedule.sequences.len();
        let mut lf = vec![0.0; n_seq];
        let mut residual = vec![0.0; n_seq];
        if model.chi > 0.0 {
            let n = (total / dt_c).ceil() as usize + 2;
            let fft_len = (2 * n).next_power_of_two();
            let mut rng = stream(model.seed, &[tag::COARSE, stream_id]);
            let psd = |f: f64| model.psd(f) * 1e-12;
            let x = spectral_synthesis(psd, dt_c, n, fft_len, edges.f_cut, edges.f_lf_max, &mut rng);
            let span = schedule.shots as f64 * schedule.cycle_time_s;
            let interp = |t: f64| {
                let u = t / dt_c;
                let i = (u.floor() as usize).min(n - 2);
                let w = u - i as f64;
                x[i] * (1.0 - w) + x[i + 1] * w
            };
            for (k, &t0) in starts.iter().enumerate() {
                let i0 = (t0 / dt_c).ceil() as usize;
                let i1 = ((t0 + span) / dt_c).floor() as usize;
                let mean = if i1 > i0 {
                    x[i0..i1.min(n)].iter().sum::<f64>() / (i1.min(n) - i0) as f64
                } else {
                    interp(t0 + 0.5 * span)
                };
                lf[k] = mean;
                // representative shot halfway through the sequence
                residual[k] = interp(t0 + 0.5 * span) - mean;
            }
        }
        Ok(NoiseSynthesizer {
            model: model.clone(),
            schedule: schedule.clone(),
            stream_id,
            edges,
            starts,
            total,
            lf,
            residual,
        })
    }

    pub fn edges(&self) -> BandEdges {
        self.edges
    }

    pub fn total_span_s(&self) -> f64 {
        self.total
    }

    pub fn n_sequences(&self) -> usize {
        self.schedule.sequences.len()
    }

    /// Noise for sequence `k`, in MHz.
    pub fn sequence(&self, k: usize) -> SequenceNoise {
        let m = &self.model;
        let slots = self.schedule.sequences[k].slots;
        let slot_ns = self.schedule.slot_ns();
        let hf_step = m.hf_update_step_ns;
        let mut out = SequenceNoise {
            start_s: self.starts[k],
            lf: 0.0,
            if_values: vec![0.0; slots],
            hf_samples: Vec::new(),
            hf_step_ns: hf_step,
        };
        if m.chi == 0.0 {
            return out;
        }
        if m.bands.lf {
            out.lf = self.lf[k];
        }
        if m.bands.if_ && slots > 0 {
            let slot_s = slot_ns * 1e-9;
            let f_lo = self.edges.f_lf_max;
            let f_hi = self.edges.f_if_max;
            let need = (2.0 / (f_lo * slot_s)).ceil() as usize;
            let fft_len = need.max(2 * slots).next_power_of_two();
            let mut rng = stream(m.seed, &[tag::FINE, self.stream_id, k as u64]);
            let psd = |f: f64| m.psd(f) * 1e-12;
            let fine = spectral_synthesis(psd, slot_s, slots, fft_len, f_lo, f_hi, &mut rng);
            let r = self.residual[k];
            for (v, f) in out.if_values.iter_mut().zip(fine) {
                *v = r + f;
            }
        }
        if m.bands.hf && slots > 0 && self.edges.f_hf_max > self.edges.f_if_max {
            let n_hf = ((slots as f64 * slot_ns) / hf_step).ceil() as usize;
            let level = m.psd(self.edges.f_if_max) * 1e-12;
            let sigma = (level * (self.edges.f_hf_max - self.edges.f_if_max)).sqrt();
            let mut rng = stream(m.seed, &[tag::HF, self.stream_id, k as u64]);
            out.hf_samples = (0..n_hf).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        }
        out
    }
}

/// Full trace for every sequence of the schedule.
pub fn synthesize(model: &NoiseModel, schedule: &ExperimentSchedule) -> Result<NoiseTrace> {
    let syn = NoiseSynthesizer::new(model, schedule, 0)?;
    Ok(NoiseTrace {
        edges: syn.edges(),
        total_span_s: syn.total_span_s(),
        sequences: (0..syn.n_sequences()).map(|k| syn.sequence(k)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodogramTable {
    pub freq_hz: Vec<f64>,
    /// One-sided PSD in squared trace units per Hz.
    pub psd: Vec<f64>,
    /// Set when the input carries no power; dB levels are then -inf.
    pub degenerate: bool,
}

pub const MIN_WELCH_SAMPLES: usize = 1 << 16;

/// Welch estimate with Hann windows, 50% overlap and per-segment mean removal.
/// Segments hold `len/8` samples rounded down to a power of two.
pub fn verify_psd(trace: &[f64], dt_s: f64) -> Result<PeriodogramTable> {
    if trace.len() < MIN_WELCH_SAMPLES {
        return Err(Error::TooShort {
            len: trace.len(),
            min: MIN_WELCH_SAMPLES,
        });
    }
    let seg = 1usize << ((trace.len() / 8).ilog2());
    welch(trace, dt_s, seg)
}

pub fn welch(trace: &[f64], dt_s: f64, seg: usize) -> Result<PeriodogramTable> {
    if seg < 16 || seg > trace.len() {
        return Err(invalid(format!("bad Welch segment length {seg}")));
    }
    let hop = seg / 2;
    let win: Vec<f64> = (0..seg)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / seg as f64).sin();
            s * s
        })
        .collect();
    let u: f64 = win.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut acc = vec![0.0; seg / 2 + 1];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= trace.len() {
        let chunk = &trace[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for i in 0..seg {
            buf[i] = Complex64::new((chunk[i] - mean) * win[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let fs = 1.0 / dt_s;
    let mut psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let two = if k == 0 || k == seg / 2 { 1.0 } else { 2.0 };
            two * a / (count as f64 * fs * u)
        })
        .collect();
    let degenerate = !psd.iter().any(|&p| p > 0.0);
    if degenerate {
        psd.iter_mut().for_each(|p| *p = 0.0);
    }
    Ok(PeriodogramTable {
        freq_hz: (0..=seg / 2).map(|k| k as f64 * fs / seg as f64).collect(),
        psd,
        degenerate,
    })
}

impl PeriodogramTable {
    pub fn db(&self) -> Vec<f64> {
        self.psd.iter().map(|&p| 10.0 * p.log10()).collect()
    }

    /// Mean PSD inside logarithmic bands between `f_lo` and `f_hi`. Returns
    /// `(geometric band centre, mean psd, bins averaged)` for non-empty bands.
    pub fn log_band_average(&self, f_lo: f64, f_hi: f64, per_decade: usize) -> Vec<(f64, f64, usize)> {
        let decades = (f_hi / f_lo).log10();
        let nb = (decades * per_decade as f64).round().max(1.0) as usize;
        let mut out = Vec::new();
        for b in 0..nb {
            let lo = f_lo * 10f64.powf(b as f64 / per_decade as f64);
            let hi = f_lo * 10f64.powf((b + 1) as f64 / per_decade as f64);
            let mut s = 0.0;
            let mut c = 0;
            for (f, p) in self.freq_hz.iter().zip(&self.psd) {
                if *f >= lo && *f < hi {
                    s += p;
                    c += 1;
                }
            }
            if c > 0 {
                out.push(((lo * hi).sqrt(), s / c as f64, c));
            }
        }
        out
    }
}
