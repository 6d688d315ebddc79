//! Shaped pulse envelopes, area normalization and spectra.
//!
//! Envelopes are baseband. Sample `k` sits at `t_k = k * dt` for `k = 0..=M`,
//! where `M = ceil(gate_time / sample_step)` and `dt = gate_time / M`, so the
//! first and last samples land exactly on the pulse edges.

use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_SAMPLE_STEP_NS: f64 = 0.5;
pub const DEFAULT_KAISER_BETA: f64 = 8.0;
/// sech width as a fraction of the gate time.
pub const DEFAULT_SECH_WIDTH: f64 = 0.1;
/// Gaussian standard deviation as a fraction of the gate time.
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 0.15;
/// Flat-top fraction of a Gaussian-square pulse.
pub const DEFAULT_FLAT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangular,
    Kaiser,
    Sech,
    Gaussian,
    GaussianSquare,
}

impl Shape {
    pub fn default_param(self) -> f64 {
        match self {
            Shape::Rectangular => 0.0,
            Shape::Kaiser => DEFAULT_KAISER_BETA,
            Shape::Sech => DEFAULT_SECH_WIDTH,
            Shape::Gaussian => DEFAULT_GAUSSIAN_SIGMA,
            Shape::GaussianSquare => DEFAULT_FLAT_FRACTION,
        }
    }

    pub fn parse(name: &str) -> Result<Shape> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "rectangular" | "rect" | "square" => Ok(Shape::Rectangular),
            "kaiser" => Ok(Shape::Kaiser),
            "sech" => Ok(Shape::Sech),
            "gaussian" | "gauss" => Ok(Shape::Gaussian),
            "gaussian_square" | "gaussiansquare" => Ok(Shape::GaussianSquare),
            other => Err(invalid(format!("unknown pulse shape '{other}'"))),
        }
    }
}

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < 1e-16 * sum {
            return sum;
        }
    }
}

/// Unit-peak window value at normalized position `u = (t - t_g/2)/(t_g/2)`.
fn window(shape: Shape, param: f64, u: f64) -> f64 {
    if !(-1.0..=1.0).contains(&u) {
        return 0.0;
    }
    match shape {
        Shape::Rectangular => 1.0,
        Shape::Kaiser => {
            let r = (1.0 - u * u).max(0.0).sqrt();
            bessel_i0(param * r) / bessel_i0(param)
        }
        // widths are fractions of t_g, u is in units of t_g/2
        Shape::Sech => 1.0 / (0.5 * u / param).cosh(),
        Shape::Gaussian => {
            let z = 0.5 * u / param;
            (-0.5 * z * z).exp()
        }
        Shape::GaussianSquare => {
            let flat = param;
            let a = u.abs();
            if a <= flat {
                1.0
            } else {
                let sigma = DEFAULT_GAUSSIAN_SIGMA * (1.0 - flat);
                let z = 0.5 * (a - flat) / sigma;
                (-0.5 * z * z).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub shape: Shape,
    pub gate_time_ns: f64,
    pub amplitude: f64,
    pub shape_param: f64,
    pub sample_step_ns: f64,
    pub samples: Vec<f64>,
}

fn check_durations(gate_time: f64, sample_step: f64) -> Result<()> {
    if !(gate_time > 0.0) || !gate_time.is_finite() {
        return Err(invalid(format!("gate time must be positive, got {gate_time}")));
    }
    if !(sample_step > 0.0) || !sample_step.is_finite() {
        return Err(invalid(format!("sample step must be positive, got {sample_step}")));
    }
    if sample_step > gate_time / 16.0 {
        return Err(invalid(format!(
            "sample step {sample_step} ns exceeds gate_time/16 = {} ns",
            gate_time / 16.0
        )));
    }
    Ok(())
}

/// Unit-peak Kaiser window on `[0, gate_time]`.
pub fn make_kaiser(gate_time: f64, beta: f64, sample_step: f64) -> Result<PulseEnvelope> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid(format!("Kaiser beta must be >= 0, got {beta}")));
    }
    make_shape(Shape::Kaiser, gate_time, beta, sample_step)
}

/// Unit-peak envelope of any supported shape.
pub fn make_shape(shape: Shape, gate_time: f64, shape_param: f64, sample_step: f64) -> Result<PulseEnvelope> {
    check_durations(gate_time, sample_step)?;
    let param_ok = match shape {
        Shape::Rectangular => true,
        Shape::Kaiser => shape_param >= 0.0,
        Shape::Sech | Shape::Gaussian => shape_param > 0.0,
        Shape::GaussianSquare => (0.0..1.0).contains(&shape_param),
    };
    if !param_ok || !shape_param.is_finite() {
        return Err(invalid(format!("shape parameter {shape_param} invalid for {shape:?}")));
    }
    let m = (gate_time / sample_step - 1e-9).ceil().max(1.0) as usize;
    let dt = gate_time / m as f64;
    // Symmetric by construction: |2k - M| is the same for k and M - k.
    let samples = (0..=m)
        .map(|k| {
            let u = (2.0 * k as f64 - m as f64) / m as f64;
            window(shape, shape_param, u)
        })
        .collect();
    Ok(PulseEnvelope {
        shape,
        gate_time_ns: gate_time,
        amplitude: 1.0,
        shape_param,
        sample_step_ns: dt,
        samples,
    })
}

/// Rescale a unit-peak envelope so its area matches a rectangular pulse of
/// amplitude `rect_amplitude` and duration `rect_time`.
pub fn normalize_area(env: &PulseEnvelope, rect_amplitude: f64, rect_time: f64) -> Result<PulseEnvelope> {
    if (rect_time - env.gate_time_ns).abs() > 1e-9 * env.gate_time_ns {
        return Err(invalid(format!(
            "rectangular reference time {rect_time} ns differs from gate time {} ns",
            env.gate_time_ns
        )));
    }
    if !rect_amplitude.is_finite() {
        return Err(invalid("rectangular amplitude must be finite"));
    }
    let unit_area = env.area() / env.amplitude;
    if !(unit_area > 0.0) || !unit_area.is_finite() {
        return Err(Error::DegenerateEnvelope(format!("window integral is {unit_area}")));
    }
    let peak = rect_amplitude * env.gate_time_ns / unit_area;
    Ok(env.with_amplitude(peak))
}

impl PulseEnvelope {
    pub fn n_segments(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.sample_step_ns
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.sample_step_ns).collect()
    }

    /// Trapezoidal integral of the samples (a.u. x ns).
    pub fn area(&self) -> f64 {
        let s = &self.samples;
        let inner: f64 = s.iter().sum::<f64>() - 0.5 * (s[0] + s[s.len() - 1]);
        inner * self.sample_step_ns
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().cloned().fold(0.0, f64::max)
    }

    /// Window integral per unit peak, in ns.
    pub fn window_integral(&self) -> f64 {
        self.area() / self.amplitude
    }

    /// Analytic envelope at time `t` (ns), zero outside the gate.
    pub fn value_at(&self, t: f64) -> f64 {
        let half = 0.5 * self.gate_time_ns;
        self.amplitude * window(self.shape, self.shape_param, (t - half) / half)
    }

    /// Piecewise-constant values played over each sample interval. The mean of
    /// neighbouring samples makes the summed area equal the trapezoidal area.
    pub fn segment_values(&self) -> Vec<f64> {
        self.samples.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Same window with a new peak amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> PulseEnvelope {
        let samples = if self.amplitude != 0.0 {
            let scale = amplitude / self.amplitude;
            self.samples.iter().map(|w| w * scale).collect()
        } else {
            let m = self.n_segments() as f64;
            (0..self.samples.len())
                .map(|k| amplitude * window(self.shape, self.shape_param, (2.0 * k as f64 - m) / m))
                .collect()
        };
        PulseEnvelope {
            amplitude,
            samples,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_ns,value")?;
        for (t, v) in self.times().iter().zip(&self.samples) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub carrier_mhz: f64,
    pub freq_mhz: Vec<f64>,
    pub power_db: Vec<f64>,
    /// Set when the envelope has no energy; all levels are then -inf.
    pub degenerate: bool,
}

/// Power spectrum of the envelope modulated onto `carrier` (MHz), in dB
/// relative to the peak, zero-padded so the bin spacing is at most
/// `resolution` (MHz).
pub fn spectrum(env: &PulseEnvelope, carrier: f64, resolution: f64) -> Result<SpectrumTable> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(invalid(format!("resolution must be positive, got {resolution}")));
    }
    let values = env.segment_values();
    let fs = 1e3 / env.sample_step_ns; // MHz
    let wanted = (fs / resolution).ceil() as usize;
    let n = wanted.max(values.len()).next_power_of_two();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let pmax = power.iter().cloned().fold(0.0, f64::max);
    let mut freq = Vec::with_capacity(n);
    let mut db = Vec::with_capacity(n);
    for i in 0..n {
        // fftshift: bin index i maps to signed frequency index i - n/2
        let k = (i + n / 2) % n;
        freq.push(carrier + (i as f64 - (n / 2) as f64) * fs / n as f64);
        db.push(if pmax > 0.0 {
            10.0 * (power[k] / pmax).log10()
        } else {
            f64::NEG_INFINITY
        });
    }
    Ok(SpectrumTable {
        carrier_mhz: carrier,
        freq_mhz: freq,
        power_db: db,
        degenerate: !(pmax > 0.0),
    })
}

impl SpectrumTable {
    fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.power_db.iter().enumerate() {
            if p > self.power_db[best] {
                best = i;
            }
        }
        best
    }

    /// Bounds of the main lobe: first local minima on either side of the peak.
    fn main_lobe(&self) -> (usize, usize) {
        let p = &self.power_db;
        let c = self.peak_index();
        let mut hi = c;
        while hi + 1 < p.len() && p[hi + 1] <= p[hi] {
            hi += 1;
        }
        let mut lo = c;
        while lo > 0 && p[lo - 1] <= p[lo] {
            lo -= 1;
        }
        (lo, hi)
    }

    /// Offset from the carrier (MHz) and level (dB) of the first upper sidelobe.
    pub fn first_sidelobe(&self) -> Option<(f64, f64)> {
        let p = &self.power_db;
        let (_, mut i) = self.main_lobe();
        while i + 1 < p.len() && p[i + 1] >= p[i] {
            i += 1;
        }
        if i + 1 >= p.len() {
            return None;
        }
        Some((self.freq_mhz[i] - self.carrier_mhz, p[i]))
    }

    /// Highest level outside the main lobe (dB).
    pub fn max_sidelobe_db(&self) -> f64 {
        let (lo, hi) = self.main_lobe();
        self.power_db
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < lo || *i > hi)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "freq_MHz,power_dB")?;
        for (f, p) in self.freq_mhz.iter().zip(&self.power_db) {
            writeln!(out, "{f},{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0_small_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_kaiser(0.0, 8.0, 0.5).is_err());
        assert!(make_kaiser(83.0, -1.0, 0.5).is_err());
        assert!(make_kaiser(83.0, 8.0, 0.0).is_err());
        assert!(make_kaiser(83.0, 8.0, 83.0 / 15.0).is_err());
        assert!(make_shape(Shape::GaussianSquare, 83.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn segment_values_preserve_area() {
        let env = make_kaiser(83.0, 8.0, 0.5).unwrap();
        let seg: f64 = env.segment_values().iter().sum::<f64>() * env.dt();
        assert!((seg - env.area()).abs() < 1e-12);
    }

    #[test]
    fn with_amplitude_from_zero() {
        let env = make_kaiser(83.0, 8.0, 0.5).unwrap().with_amplitude(0.0);
        assert_eq!(env.peak(), 0.0);
        let back = env.with_amplitude(2.0);
        assert!((back.peak() - 2.0).abs() < 1e-15);
    }
}
