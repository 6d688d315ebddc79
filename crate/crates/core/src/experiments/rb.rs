use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::engine::{par_points, Executor, PointNoise, PreparedPulse, Pulse};
use super::{fit_decay, interleaved_fidelity, DecayPoint, RBConfig, RBResult, ReadoutMode};
use crate::calibration::{CalibrationState, Compensation};
use crate::clifford::{gate_set, interleave, random_sequence, schedule_simultaneous, Axis, CliffordSequence, Outcome, Timetable};
use crate::device::{RegisterModel, SpinState, UP};
use crate::error::{invalid, Error, Result};
use crate::noise::NoiseModel;
use crate::pulse::{make_shape, normalize_area};
use crate::readout::{measure_five, sequence_fidelity, ReadoutModel};
use crate::rng::{stream, tag};

/// Pulses and carrier for one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSetup {
    pub label: usize,
    pub carrier_mhz: f64,
    pub solo: PreparedPulse,
    /// Used in cycles that drive every qubit of the experiment.
    pub simultaneous: PreparedPulse,
}

pub fn prepare_drive(register: &RegisterModel, cal: &CalibrationState, cfg: &RBConfig, labels: &[usize]) -> Result<Vec<DriveSetup>> {
    if (cal.gate_time_ns - cfg.gate_time_ns).abs() > 1e-9 {
        return Err(invalid(format!(
            "calibration is for {} ns gates, experiment uses {} ns",
            cal.gate_time_ns, cfg.gate_time_ns
        )));
    }
    let unit = make_shape(cfg.shape, cfg.gate_time_ns, cfg.shape_param(), cfg.sample_step_ns)?;
    labels
        .iter()
        .map(|&l| {
            register.qubit(l)?;
            let q = cal.qubit(l)?;
            let solo = normalize_area(&unit, q.amplitude, cfg.gate_time_ns)?;
            let sim = normalize_area(&unit, q.simultaneous_amplitude.unwrap_or(q.amplitude), cfg.gate_time_ns)?;
            Ok(DriveSetup {
                label: l,
                carrier_mhz: q.f_mw_mhz + cfg.carrier_offset_mhz,
                solo: PreparedPulse::from_envelope(&solo, cfg.edge_jitter),
                simultaneous: PreparedPulse::from_envelope(&sim, cfg.edge_jitter),
            })
        })
        .collect()
}

/// Play a timetable; frame compensation is split evenly around each cycle.
pub fn play_timetable(
    ex: &mut Executor,
    state: &mut SpinState,
    setups: &[DriveSetup],
    timetable: &Timetable,
    comp: Option<&Compensation>,
    slot_ns: f64,
) -> Result<()> {
    let all = setups.len();
    for cycle in &timetable.cycles {
        let shared = all > 1 && cycle.len() == all;
        let mut pulses: SmallVec<[Pulse; 5]> = SmallVec::new();
        for &(q, axis) in cycle.iter() {
            let s = setups.iter().find(|s| s.label == q).ok_or(Error::UnknownQubit(q))?;
            pulses.push(Pulse {
                qubit: q,
                shape: if shared { &s.simultaneous } else { &s.solo },
                phase: axis.phase(),
                carrier_mhz: s.carrier_mhz,
            });
        }
        let inc = comp.map(|c| (c.qubits.clone(), c.increments(cycle)));
        if let Some((qs, d)) = &inc {
            for (&q, &v) in qs.iter().zip(d) {
                state.shift_frame(q, 0.5 * v)?;
            }
        }
        ex.play(state, &pulses, slot_ns)?;
        if let Some((qs, d)) = &inc {
            for (&q, &v) in qs.iter().zip(d) {
                state.shift_frame(q, 0.5 * v)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Job {
    rand: usize,
    length: usize,
    outcome: Outcome,
}

fn jobs(cfg: &RBConfig) -> Vec<Job> {
    let mut v = Vec::with_capacity(cfg.randomizations * cfg.lengths.len() * 2);
    for r in 0..cfg.randomizations {
        for li in 0..cfg.lengths.len() {
            for outcome in [Outcome::Identity, Outcome::Flip] {
                v.push(Job {
                    rand: r,
                    length: li,
                    outcome,
                });
            }
        }
    }
    v
}

fn sequences(cfg: &RBConfig, labels: &[usize], job: Job, word: Option<&[Axis]>) -> Result<Vec<CliffordSequence>> {
    let set = gate_set();
    let n = cfg.lengths[job.length];
    labels
        .iter()
        .map(|&l| {
            // flip and no-flip runs of one randomization share their draws
            let mut rng = stream(cfg.seed, &[tag::SEQUENCE, job.rand as u64, job.length as u64, l as u64]);
            let s = random_sequence(set, l, n, job.outcome, &mut rng)?;
            match word {
                Some(w) => interleave(set, &s, w),
                None => Ok(s),
            }
        })
        .collect()
}

fn initial_up(cfg: &RBConfig, label: usize) -> bool {
    cfg.readout == ReadoutMode::Tomographic && (label == 1 || label == 4)
}

/// Measured up-population per qubit for every job.
fn run_jobs(
    cfg: &RBConfig,
    register: &RegisterModel,
    noise: &NoiseModel,
    cal: &CalibrationState,
    readout: &ReadoutModel,
    labels: &[usize],
    word: Option<&[Axis]>,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let jobs = jobs(cfg);
    let slot_ns = cfg.gate_time_ns + cfg.idle_ns;
    let setups = prepare_drive(register, cal, cfg, labels)?;
    let mut model = noise.clone().with_seed(cfg.seed);
    if let Some(chi) = cfg.chi {
        model = model.with_chi(chi);
    }
    let physics = cfg.depolarizing.is_none();
    let point_noise = if physics {
        let mut slots = Vec::with_capacity(jobs.len());
        for &j in &jobs {
            let seqs = sequences(cfg, labels, j, word)?;
            slots.push(seqs.iter().map(|s| s.primitives.len()).max().unwrap_or(1));
        }
        let dead: Vec<f64> = jobs
            .iter()
            .map(|j| {
                if j.rand > 0 && j.length == 0 && j.outcome == Outcome::Identity {
                    cfg.awg_loading_s
                } else {
                    0.0
                }
            })
            .collect();
        Some(PointNoise::new(
            Some(&model),
            labels,
            &slots,
            slot_ns,
            cfg.cycle_time_s,
            cfg.shots,
            &dead,
        )?)
    } else {
        None
    };
    let tomographic = cfg.readout == ReadoutMode::Tomographic;
    if tomographic && labels.iter().any(|&l| !(1..=5).contains(&l)) {
        return Err(invalid("tomographic readout covers qubits 1..5 only"));
    }

    par_points(jobs.len(), |k| {
        let job = jobs[k];
        let p_up: Vec<f64> = if let Some(p0) = cfg.depolarizing {
            let n = cfg.lengths[job.length] as i32;
            let decay = p0.powi(n + 1);
            let sign = if job.outcome == Outcome::Flip { 1.0 } else { -1.0 };
            labels.iter().map(|_| 0.5 * (1.0 + sign * decay)).collect()
        } else {
            let seqs = sequences(cfg, labels, job, word)?;
            let tgs = vec![cfg.gate_time_ns; seqs.len()];
            let tt = schedule_simultaneous(&seqs, &tgs)?;
            let comp = if cfg.compensate && labels.len() > 1 {
                Some(Compensation::new(cal, &tt)?)
            } else {
                None
            };
            let mut state = SpinState::new(register, labels)?;
            for (s, &l) in labels.iter().enumerate() {
                if initial_up(cfg, l) {
                    state.amps[s] = UP;
                }
            }
            let binding = point_noise.as_ref().map_or_else(|| vec![None; labels.len()], |p| p.binding(k));
            let jitter = cfg.edge_jitter.then(|| stream(cfg.seed, &[tag::JITTER, k as u64]));
            let mut ex = Executor::new(register, binding, jitter);
            play_timetable(&mut ex, &mut state, &setups, &tt, comp.as_ref(), slot_ns)?;
            labels.iter().map(|&l| state.prob_up(l)).collect::<Result<_>>()?
        };
        if tomographic {
            let mut full = [0.0; 5];
            for q in 1..=5 {
                full[q - 1] = if initial_up(cfg, q) { 1.0 } else { 0.0 };
            }
            for (&l, &p) in labels.iter().zip(&p_up) {
                full[l - 1] = p;
            }
            let mut rng = stream(cfg.seed, &[tag::READOUT, k as u64]);
            let m = measure_five(&full, readout, cfg.shots, &mut rng)?;
            Ok(labels.iter().map(|&l| m[l - 1]).collect())
        } else {
            labels
                .iter()
                .zip(&p_up)
                .map(|(&l, &p)| {
                    let mut rng = stream(cfg.seed, &[tag::SHOTS, k as u64, l as u64]);
                    let b = Binomial::new(cfg.shots as u64, p.clamp(0.0, 1.0)).map_err(|e| invalid(e.to_string()))?;
                    Ok(b.sample(&mut rng) as f64 / cfg.shots as f64)
                })
                .collect()
        }
    })
}

fn aggregate(cfg: &RBConfig, labels: &[usize], measured: &[Vec<f64>]) -> Result<Vec<RBResult>> {
    let nl = cfg.lengths.len();
    let signed = cfg.readout == ReadoutMode::Direct;
    labels
        .iter()
        .enumerate()
        .map(|(s, &l)| {
            let points: Vec<DecayPoint> = (0..nl)
                .map(|li| {
                    let samples = (0..cfg.randomizations)
                        .map(|r| {
                            let base = (r * nl + li) * 2;
                            let noflip = measured[base][s];
                            let flip = measured[base + 1][s];
                            if signed {
                                flip - noflip
                            } else {
                                sequence_fidelity(flip, noflip)
                            }
                        })
                        .collect();
                    DecayPoint::from_samples(cfg.lengths[li], samples)
                })
                .collect();
            let fit = fit_decay(&points, cfg.shots)?;
            Ok(RBResult {
                qubit: l,
                gate_time_ns: cfg.gate_time_ns,
                points,
                fit,
            })
        })
        .collect()
}

/// Single-qubit RB for every qubit in the config, one after the other.
pub fn run_rb(cfg: &RBConfig, register: &RegisterModel, noise: &NoiseModel, cal: &CalibrationState) -> Result<Vec<RBResult>> {
    let readout = ReadoutModel::default();
    let mut out = Vec::new();
    for &q in &cfg.qubits {
        let measured = run_jobs(cfg, register, noise, cal, &readout, &[q], None)?;
        out.extend(aggregate(cfg, &[q], &measured)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrbResult {
    pub per_qubit: Vec<RBResult>,
    /// Product of the primitive fidelities.
    pub joint_fidelity: f64,
    pub compensated: bool,
}

/// Independent random sequences on every qubit of the config, played in
/// lock step.
pub fn run_srb(
    cfg: &RBConfig,
    register: &RegisterModel,
    noise: &NoiseModel,
    cal: &CalibrationState,
    readout: &ReadoutModel,
) -> Result<SrbResult> {
    if cfg.qubits.len() < 2 {
        return Err(invalid("simultaneous benchmarking needs at least two qubits"));
    }
    readout.validate()?;
    let measured = run_jobs(cfg, register, noise, cal, readout, &cfg.qubits, None)?;
    let per_qubit = aggregate(cfg, &cfg.qubits, &measured)?;
    let joint_fidelity = per_qubit.iter().map(|r| r.fit.f_primitive).product();
    Ok(SrbResult {
        per_qubit,
        joint_fidelity,
        compensated: cfg.compensate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedResult {
    pub word: String,
    pub reference: RBResult,
    pub interleaved: RBResult,
    pub fidelity: f64,
    pub sigma: f64,
}

/// Reference and interleaved runs on the first configured qubit.
pub fn run_interleaved(
    cfg: &RBConfig,
    register: &RegisterModel,
    noise: &NoiseModel,
    cal: &CalibrationState,
    word: &[Axis],
) -> Result<InterleavedResult> {
    if word.is_empty() {
        return Err(invalid("interleaved word is empty"));
    }
    let q = [cfg.qubits[0]];
    let readout = ReadoutModel::default();
    let reference = aggregate(cfg, &q, &run_jobs(cfg, register, noise, cal, &readout, &q, None)?)?.remove(0);
    let interleaved = aggregate(cfg, &q, &run_jobs(cfg, register, noise, cal, &readout, &q, Some(word))?)?.remove(0);
    let (fidelity, sigma) = interleaved_fidelity(reference.fit.p, reference.fit.sigma_p, interleaved.fit.p, interleaved.fit.sigma_p);
    Ok(InterleavedResult {
        word: crate::clifford::word_string(word),
        reference,
        interleaved,
        fidelity,
        sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub f_primitive: f64,
    pub sigma: f64,
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub qubit: usize,
    pub rows: Vec<SweepRow>,
    /// Abscissa of the lowest infidelity.
    pub argmin: f64,
}

impl SweepTable {
    fn from_rows(qubit: usize, rows: Vec<SweepRow>) -> Self {
        let argmin = rows
            .iter()
            .min_by(|a, b| a.infidelity.total_cmp(&b.infidelity))
            .map_or(f64::NAN, |r| r.x);
        SweepTable { qubit, rows, argmin }
    }

    /// CSV plot data: x, y, yerr.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,infidelity,sigma")?;
        for r in &self.rows {
            writeln!(out, "{},{:.10e},{:.10e}", r.x, r.infidelity, r.sigma)?;
        }
        Ok(())
    }
}

fn row(x: f64, r: &RBResult) -> SweepRow {
    SweepRow {
        x,
        f_primitive: r.fit.f_primitive,
        sigma: r.fit.sigma_f_primitive,
        infidelity: 1.0 - r.fit.f_primitive,
    }
}

/// RB of the first configured qubit with the carrier shifted by each
/// detuning (MHz).
pub fn detuning_sweep(
    cfg: &RBConfig,
    register: &RegisterModel,
    noise: &NoiseModel,
    cal: &CalibrationState,
    detunings: &[f64],
) -> Result<SweepTable> {
    let q = cfg.qubits[0];
    let mut rows = Vec::with_capacity(detunings.len());
    for &d in detunings {
        let c = RBConfig {
            carrier_offset_mhz: d,
            qubits: vec![q],
            ..cfg.clone()
        };
        rows.push(row(d, &run_rb(&c, register, noise, cal)?[0]));
    }
    Ok(SweepTable::from_rows(q, rows))
}

/// RB of the first configured qubit at each gate time (ns), with the
/// calibration rescaled to keep pi/2 rotations.
pub fn tg_sweep(
    cfg: &RBConfig,
    register: &RegisterModel,
    noise: &NoiseModel,
    cal: &CalibrationState,
    gate_times: &[f64],
) -> Result<SweepTable> {
    let q = cfg.qubits[0];
    let mut rows = Vec::with_capacity(gate_times.len());
    for &tg in gate_times {
        let c = RBConfig {
            gate_time_ns: tg,
            qubits: vec![q],
            ..cfg.clone()
        };
        rows.push(row(tg, &run_rb(&c, register, noise, &cal.at_gate_time(tg))?[0]));
    }
    Ok(SweepTable::from_rows(q, rows))
}
