//! Cycle-by-cycle pulse player shared by benchmarking and calibration.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::device::{propagate_in_place, DetuningTrace, DriveSegment, RegisterModel, SpinState, Tone};
use crate::error::{invalid, Result};
use crate::noise::{ExperimentSchedule, NoiseModel, NoiseSynthesizer, ScheduledSequence, SequenceNoise};
use crate::pulse::{PulseEnvelope, Shape};

/// Piecewise-constant drive values of one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPulse {
    pub values: Vec<f64>,
    pub dt_ns: f64,
    /// Randomize the carrier phase of the first and last segment.
    pub edge_jitter: bool,
}

impl PreparedPulse {
    pub fn from_envelope(env: &PulseEnvelope, edge_jitter: bool) -> Self {
        PreparedPulse {
            values: env.segment_values(),
            dt_ns: env.sample_step_ns,
            edge_jitter: edge_jitter && env.shape == Shape::Rectangular,
        }
    }

    /// Constant burst of `duration` ns (rounded to whole steps).
    pub fn burst(amplitude: f64, duration: f64, dt_ns: f64) -> Self {
        let n = (duration / dt_ns).round() as usize;
        PreparedPulse {
            values: vec![amplitude; n],
            dt_ns,
            edge_jitter: false,
        }
    }

    pub fn duration_ns(&self) -> f64 {
        self.values.len() as f64 * self.dt_ns
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pulse<'a> {
    pub qubit: usize,
    pub shape: &'a PreparedPulse,
    pub phase: f64,
    pub carrier_mhz: f64,
}

/// Plays cycles on a [`SpinState`], keeping the sequence clock and the slot
/// index used to look up noise.
pub struct Executor<'a> {
    register: &'a RegisterModel,
    noise: Vec<Option<SequenceNoise>>,
    jitter: Option<ChaCha8Rng>,
    segs: Vec<DriveSegment>,
    trace: DetuningTrace,
    clock_ns: f64,
    cycle: usize,
}

impl<'a> Executor<'a> {
    /// `noise[s]` belongs to the qubit in slot `s` of the state it will drive.
    pub fn new(register: &'a RegisterModel, noise: Vec<Option<SequenceNoise>>, jitter: Option<ChaCha8Rng>) -> Self {
        let n = noise.len();
        Executor {
            register,
            noise,
            jitter,
            segs: Vec::new(),
            trace: DetuningTrace { beta: vec![Vec::new(); n] },
            clock_ns: 0.0,
            cycle: 0,
        }
    }

    pub fn quiet(register: &'a RegisterModel, n_qubits: usize) -> Self {
        Executor::new(register, vec![None; n_qubits], None)
    }

    pub fn clock_ns(&self) -> f64 {
        self.clock_ns
    }

    fn beta(&self, s: usize, t: f64) -> f64 {
        match &self.noise[s] {
            Some(n) => n.at(self.cycle, t),
            None => 0.0,
        }
    }

    /// Play `pulses` starting together, then idle until `duration_ns`.
    pub fn play(&mut self, state: &mut SpinState, pulses: &[Pulse], duration_ns: f64) -> Result<()> {
        let nq = state.labels.len();
        if self.noise.len() != nq {
            return Err(invalid("noise binding does not match the state"));
        }
        let dt = pulses.first().map_or(0.5, |p| p.shape.dt_ns);
        if pulses.iter().any(|p| (p.shape.dt_ns - dt).abs() > 1e-12) {
            return Err(invalid("pulses in one cycle must share a sample step"));
        }
        let n_p = pulses.iter().map(|p| p.shape.values.len()).max().unwrap_or(0);
        let drive_ns = n_p as f64 * dt;
        if duration_ns + 1e-9 < drive_ns {
            return Err(invalid(format!(
                "cycle of {duration_ns} ns shorter than its pulses ({drive_ns} ns)"
            )));
        }
        self.segs.clear();
        for b in self.trace.beta.iter_mut() {
            b.clear();
        }
        let mut edge: SmallVec<[(f64, f64); 5]> = SmallVec::new();
        for p in pulses {
            if p.shape.edge_jitter {
                let rng = self.jitter.as_mut().ok_or_else(|| invalid("edge jitter needs a random stream"))?;
                edge.push((rng.random::<f64>() * TAU, rng.random::<f64>() * TAU));
            } else {
                edge.push((0.0, 0.0));
            }
        }
        for k in 0..n_p {
            let mut tones: SmallVec<[Tone; 5]> = SmallVec::new();
            for (p, e) in pulses.iter().zip(&edge) {
                let len = p.shape.values.len();
                if k < len {
                    let mut phase = p.phase;
                    if k == 0 {
                        phase += e.0;
                    } else if k + 1 == len {
                        phase += e.1;
                    }
                    tones.push(Tone {
                        qubit: p.qubit,
                        amplitude: p.shape.values[k],
                        phase,
                        carrier_mhz: p.carrier_mhz,
                    });
                }
            }
            self.segs.push(DriveSegment { dt_ns: dt, tones });
            let t = self.clock_ns + (k as f64 + 0.5) * dt;
            for s in 0..nq {
                let b = self.beta(s, t);
                self.trace.beta[s].push(b);
            }
        }
        // Drive-free remainder, cut at HF update boundaries only.
        let hf_step = self.noise.iter().flatten().find(|n| !n.hf_samples.is_empty()).map(|n| n.hf_step_ns);
        let mut t = self.clock_ns + drive_ns;
        let end = self.clock_ns + duration_ns;
        while end - t > 1e-9 {
            let stop = match hf_step {
                Some(h) => (((t / h).floor() + 1.0) * h).min(end),
                None => end,
            };
            let len = if stop - t < 1e-9 {
                (end - t).min(hf_step.unwrap_or(end - t))
            } else {
                stop - t
            };
            self.segs.push(DriveSegment::idle(len));
            let mid = t + 0.5 * len;
            for s in 0..nq {
                let b = self.beta(s, mid);
                self.trace.beta[s].push(b);
            }
            t += len;
        }
        propagate_in_place(state, &self.segs, self.register, Some(&self.trace))?;
        self.clock_ns = end;
        self.cycle += 1;
        Ok(())
    }

    /// Drive-free wait.
    pub fn idle(&mut self, state: &mut SpinState, duration_ns: f64) -> Result<()> {
        self.play(state, &[], duration_ns)
    }
}

/// Noise sources for a block of independent measurement points.
pub struct PointNoise {
    synths: Vec<Option<NoiseSynthesizer>>,
}

impl PointNoise {
    /// One synthesizer per qubit in `labels`; `slots[k]` cycles in point `k`.
    pub fn new(
        model: Option<&NoiseModel>,
        labels: &[usize],
        slots: &[usize],
        slot_ns: f64,
        cycle_time_s: f64,
        shots: usize,
        dead_time_s: &[f64],
    ) -> Result<Self> {
        let synths = match model {
            Some(m) if m.chi > 0.0 => {
                let schedule = ExperimentSchedule {
                    gate_time_ns: slot_ns,
                    idle_ns: 0.0,
                    cycle_time_s,
                    shots: shots.max(1),
                    sequences: slots
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| ScheduledSequence {
                            slots: s.max(1),
                            dead_time_before_s: dead_time_s.get(k).copied().unwrap_or(0.0),
                        })
                        .collect(),
                };
                labels
                    .iter()
                    .map(|&l| NoiseSynthesizer::new(m, &schedule, l as u64).map(Some))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => vec![None; labels.len()],
        };
        Ok(PointNoise { synths })
    }

    pub fn binding(&self, point: usize) -> Vec<Option<SequenceNoise>> {
        self.synths.iter().map(|s| s.as_ref().map(|s| s.sequence(point))).collect()
    }
}

/// Run `body` for every point in parallel and collect its output in order.
pub fn par_points<T: Send, F>(n_points: usize, body: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n_points).into_par_iter().map(body).collect()
}
