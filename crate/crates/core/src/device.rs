//! Register description and piecewise-constant SU(2) propagation.
//!
//! Frequencies are in MHz and durations in ns. The detuning `beta` entering
//! the step Hamiltonian is drive frame minus qubit frequency, so a qubit whose
//! frequency is pushed down by an off-resonant tone sees a positive `beta`.
//! Basis index 0 is spin down, with `sigma_z |down> = +|down>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub label: usize,
    pub f_res_mhz: f64,
    /// Rabi frequency per unit drive amplitude (MHz per a.u.).
    pub drive_efficiency: f64,
    pub t2_star_us: f64,
    pub t2_hahn_us: f64,
    pub rabi_linearity_limit_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    pub delta_f_max_khz: f64,
    pub tau_us: f64,
}

/// Frequency shift (kHz) after `elapsed_us` of accumulated drive.
pub fn heating_detuning(elapsed_us: f64, model: &HeatingModel) -> f64 {
    if elapsed_us <= 0.0 {
        return 0.0;
    }
    model.delta_f_max_khz * (1.0 - (-elapsed_us / model.tau_us).exp())
}

pub const DEFAULT_MIN_DETUNING_MHZ: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterModel {
    pub qubits: Vec<QubitParams>,
    /// `kappa[i][j]`: spectator detuning of qubit i per squared Rabi
    /// frequency of qubit j (1/MHz). Positions, not labels.
    pub kappa: Vec<Vec<f64>>,
    /// `eta[i][j]`: fractional change of qubit i's Rabi frequency per MHz of
    /// simultaneous Rabi drive on qubit j.
    pub eta: Vec<Vec<f64>>,
    pub heating: Vec<Option<HeatingModel>>,
    pub min_detuning_mhz: f64,
}

fn default_kappa(f_target: f64, f_driver: f64, min_detuning: f64) -> f64 {
    let d = f_driver - f_target;
    let d = d.signum() * d.abs().max(min_detuning);
    1.0 / (2.0 * d)
}

impl RegisterModel {
    /// Labels must run 1..=N in order.
    pub fn new(qubits: Vec<QubitParams>, min_detuning_mhz: f64) -> Result<Self> {
        let n = qubits.len();
        if n == 0 {
            return Err(Error::Config("register has no qubits".into()));
        }
        for (i, q) in qubits.iter().enumerate() {
            if q.label != i + 1 {
                return Err(Error::Config(format!(
                    "qubit labels must be 1..={n} in order, found {} at position {}",
                    q.label,
                    i + 1
                )));
            }
            if !(q.f_res_mhz > 0.0) {
                return Err(Error::Config(format!("qubit {}: f_res_mhz must be positive", q.label)));
            }
            if !(q.drive_efficiency > 0.0) {
                return Err(Error::Config(format!("qubit {}: drive_efficiency must be positive", q.label)));
            }
            if q.t2_star_us > q.t2_hahn_us {
                return Err(Error::Config(format!("qubit {}: t2_star_us exceeds t2_hahn_us", q.label)));
            }
        }
        if !(min_detuning_mhz > 0.0) {
            return Err(Error::Config("min_detuning_mhz must be positive".into()));
        }
        let mut kappa = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    kappa[i][j] = default_kappa(qubits[i].f_res_mhz, qubits[j].f_res_mhz, min_detuning_mhz);
                }
            }
        }
        Ok(RegisterModel {
            qubits,
            kappa,
            eta: vec![vec![0.0; n]; n],
            heating: vec![None; n],
            min_detuning_mhz,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.qubits.iter().map(|q| q.label).collect()
    }

    pub fn index(&self, label: usize) -> Result<usize> {
        if label >= 1 && label <= self.qubits.len() {
            Ok(label - 1)
        } else {
            Err(Error::UnknownQubit(label))
        }
    }

    pub fn qubit(&self, label: usize) -> Result<&QubitParams> {
        Ok(&self.qubits[self.index(label)?])
    }

    pub fn kappa(&self, target: usize, driver: usize) -> Result<f64> {
        Ok(self.kappa[self.index(target)?][self.index(driver)?])
    }

    /// Override a Stark coefficient. The sign must follow the frequency order.
    pub fn set_kappa(&mut self, target: usize, driver: usize, value: f64) -> Result<()> {
        let (i, j) = (self.index(target)?, self.index(driver)?);
        if i == j {
            return Err(Error::Config(format!("stark coefficient of qubit {target} on itself")));
        }
        let order = self.qubits[j].f_res_mhz - self.qubits[i].f_res_mhz;
        if !value.is_finite() || (value != 0.0 && value.signum() != order.signum()) {
            return Err(Error::Config(format!(
                "stark coefficient ({target},{driver}) = {value} must be finite with the sign of f_res,{driver} - f_res,{target}"
            )));
        }
        self.kappa[i][j] = value;
        Ok(())
    }

    pub fn set_eta(&mut self, target: usize, driver: usize, value: f64) -> Result<()> {
        let (i, j) = (self.index(target)?, self.index(driver)?);
        if i == j || !value.is_finite() {
            return Err(Error::Config(format!("invalid drive crosstalk ({target},{driver})")));
        }
        self.eta[i][j] = value;
        Ok(())
    }

    pub fn set_heating(&mut self, label: usize, model: Option<HeatingModel>) -> Result<()> {
        let i = self.index(label)?;
        self.heating[i] = model;
        Ok(())
    }

    /// Copy with all pairwise couplings removed.
    pub fn without_crosstalk(&self) -> RegisterModel {
        let n = self.n_qubits();
        RegisterModel {
            kappa: vec![vec![0.0; n]; n],
            eta: vec![vec![0.0; n]; n],
            ..self.clone()
        }
    }
}

/// Element of SU(2) stored as `[[a, b], [-conj(b), conj(a)]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2 {
    pub a: C64,
    pub b: C64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 {
        a: C64 { re: 1.0, im: 0.0 },
        b: C64 { re: 0.0, im: 0.0 },
    };

    /// `exp(-i angle/2 n.sigma)` for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Su2 {
        let (s, c) = (0.5 * angle).sin_cos();
        Su2 {
            a: C64::new(c, -s * axis[2]),
            b: C64::new(-s * axis[1], -s * axis[0]),
        }
    }

    /// Rotation about the equatorial axis at azimuth `phase`.
    pub fn equatorial(phase: f64, angle: f64) -> Su2 {
        Su2::rotation([phase.cos(), phase.sin(), 0.0], angle)
    }

    pub fn rz(angle: f64) -> Su2 {
        Su2::rotation([0.0, 0.0, 1.0], angle)
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.a, self.b], [-self.b.conj(), self.a.conj()]]
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Su2) -> Su2 {
        Su2 {
            a: self.a * rhs.a - self.b * rhs.b.conj(),
            b: self.a * rhs.b + self.b * rhs.a.conj(),
        }
    }

    pub fn dagger(&self) -> Su2 {
        Su2 {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn apply(&self, psi: &[C64; 2]) -> [C64; 2] {
        [self.a * psi[0] + self.b * psi[1], -self.b.conj() * psi[0] + self.a.conj() * psi[1]]
    }

    pub fn det(&self) -> C64 {
        self.a * self.a.conj() + self.b * self.b.conj()
    }

    /// `|Tr(A^dagger B)| / 2`, insensitive to global phase.
    pub fn trace_fidelity(&self, other: &Su2) -> f64 {
        // Tr(A^dagger B) = 2 Re(a* a' + b* b') for SU(2) elements
        let z = self.a.conj() * other.a + self.b.conj() * other.b;
        z.re.abs().min(1.0)
    }

    /// Equality up to a sign, the only global phase left inside SU(2).
    pub fn approx_eq_phase(&self, other: &Su2, tol: f64) -> bool {
        1.0 - self.trace_fidelity(other) < tol
    }
}

/// Exact propagator over `dt` (ns) of
/// `H = 2 pi (beta/2 sigma_z + f_R/2 (cos(phi) sigma_x + sin(phi) sigma_y))`.
pub fn step_unitary(f_rabi: f64, phase: f64, beta: f64, dt: f64) -> Su2 {
    let omega = (f_rabi * f_rabi + beta * beta).sqrt();
    if omega == 0.0 {
        return Su2::IDENTITY;
    }
    let half = PI * omega * dt * 1e-3;
    let (s, c) = half.sin_cos();
    let k = s / omega;
    let (sp, cp) = phase.sin_cos();
    Su2 {
        a: C64::new(c, -k * beta),
        b: C64::new(-k * f_rabi * sp, -k * f_rabi * cp),
    }
}

/// Overlap-based trace distance between two pure single-qubit states.
pub fn trace_distance(psi: &[C64; 2], phi: &[C64; 2]) -> f64 {
    let ov = psi[0].conj() * phi[0] + psi[1].conj() * phi[1];
    let n1 = psi[0].norm_sqr() + psi[1].norm_sqr();
    let n2 = phi[0].norm_sqr() + phi[1].norm_sqr();
    (1.0 - ov.norm_sqr() / (n1 * n2)).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub qubit: usize,
    /// Envelope value (a.u.); Rabi frequency is this times drive efficiency.
    pub amplitude: f64,
    pub phase: f64,
    pub carrier_mhz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveSegment {
    pub dt_ns: f64,
    pub tones: SmallVec<[Tone; 5]>,
}

impl DriveSegment {
    pub fn idle(dt_ns: f64) -> Self {
        DriveSegment {
            dt_ns,
            tones: SmallVec::new(),
        }
    }
}

/// Product state of a subset of the register plus rotating-frame bookkeeping.
///
/// The effective phase of a tone on a qubit is `tone.phase + frame_phase`.
/// A physical `Rz(theta)` picked up by the qubit is therefore absorbed by
/// `shift_frame(theta)`, and a virtual `Z(theta)` gate is `shift_frame(-theta)`.
/// The logical state is `Rz(-frame_phase)` applied to the stored amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub labels: Vec<usize>,
    pub amps: Vec<[C64; 2]>,
    pub frame_phase: Vec<f64>,
    pub frame_mhz: Vec<f64>,
    pub drive_time_ns: f64,
}

pub const DOWN: [C64; 2] = [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }];
pub const UP: [C64; 2] = [C64 { re: 0.0, im: 0.0 }, C64 { re: 1.0, im: 0.0 }];

impl SpinState {
    /// All listed qubits spin down, frames on resonance.
    pub fn new(register: &RegisterModel, labels: &[usize]) -> Result<Self> {
        let mut frame = Vec::with_capacity(labels.len());
        for &l in labels {
            frame.push(register.qubit(l)?.f_res_mhz);
        }
        Ok(SpinState {
            labels: labels.to_vec(),
            amps: vec![DOWN; labels.len()],
            frame_phase: vec![0.0; labels.len()],
            frame_mhz: frame,
            drive_time_ns: 0.0,
        })
    }

    pub fn slot(&self, label: usize) -> Result<usize> {
        self.labels.iter().position(|&l| l == label).ok_or(Error::UnknownQubit(label))
    }

    pub fn prob_up(&self, label: usize) -> Result<f64> {
        let a = self.amps[self.slot(label)?];
        Ok(a[1].norm_sqr() / (a[0].norm_sqr() + a[1].norm_sqr()))
    }

    pub fn shift_frame(&mut self, label: usize, theta: f64) -> Result<()> {
        let s = self.slot(label)?;
        self.frame_phase[s] += theta;
        Ok(())
    }

    pub fn set_frame_frequency(&mut self, label: usize, f_mhz: f64) -> Result<()> {
        let s = self.slot(label)?;
        self.frame_mhz[s] = f_mhz;
        Ok(())
    }

    pub fn logical(&self, label: usize) -> Result<[C64; 2]> {
        let s = self.slot(label)?;
        Ok(Su2::rz(-self.frame_phase[s]).apply(&self.amps[s]))
    }

    pub fn norm_error(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| (a[0].norm_sqr() + a[1].norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-qubit noise detuning (MHz) for each segment, aligned with the state's
/// qubit order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetuningTrace {
    pub beta: Vec<Vec<f64>>,
}

impl DetuningTrace {
    pub fn zeros(n_qubits: usize, n_segments: usize) -> Self {
        DetuningTrace {
            beta: vec![vec![0.0; n_segments]; n_qubits],
        }
    }
}

/// Pure form of [`propagate_in_place`].
pub fn propagate(
    state: &SpinState,
    segments: &[DriveSegment],
    register: &RegisterModel,
    noise: Option<&DetuningTrace>,
) -> Result<SpinState> {
    let mut out = state.clone();
    propagate_in_place(&mut out, segments, register, noise)?;
    Ok(out)
}

/// Evolve every tracked qubit through `segments`. Spectators pick up the
/// Stark detuning `kappa_ij * Omega_j^2` from each tone on another qubit.
pub fn propagate_in_place(
    state: &mut SpinState,
    segments: &[DriveSegment],
    register: &RegisterModel,
    noise: Option<&DetuningTrace>,
) -> Result<()> {
    let nq = state.labels.len();
    let mut idx = Vec::with_capacity(nq);
    for &l in &state.labels {
        idx.push(register.index(l)?);
    }
    for seg in segments {
        for t in &seg.tones {
            register.index(t.qubit)?;
        }
    }
    if let Some(tr) = noise {
        for s in 0..nq {
            let have = tr.beta.get(s).map_or(0, |v| v.len());
            if have < segments.len() {
                return Err(Error::TraceTooShort {
                    qubit: state.labels[s],
                    needed: segments.len(),
                    available: have,
                });
            }
        }
    }
    let mut rabi: SmallVec<[(usize, f64); 5]> = SmallVec::new();
    for (k, seg) in segments.iter().enumerate() {
        rabi.clear();
        for t in &seg.tones {
            let j = t.qubit - 1;
            rabi.push((j, t.amplitude * register.qubits[j].drive_efficiency));
        }
        let driven = rabi.iter().any(|r| r.1 != 0.0);
        for (s, &i) in idx.iter().enumerate() {
            let mut beta = noise.map_or(0.0, |tr| tr.beta[s][k]);
            let mut own: Option<&Tone> = None;
            let mut scale = 1.0;
            for (t, &(j, om)) in seg.tones.iter().zip(rabi.iter()) {
                if j == i {
                    own = Some(t);
                } else {
                    beta += register.kappa[i][j] * om * om;
                    scale += register.eta[i][j] * om;
                }
            }
            if let Some(h) = &register.heating[i] {
                beta -= 1e-3 * heating_detuning(state.drive_time_ns * 1e-3, h);
            }
            let (f_rabi, phase) = match own {
                Some(t) => {
                    state.frame_mhz[s] = t.carrier_mhz;
                    (
                        t.amplitude * register.qubits[i].drive_efficiency * scale,
                        t.phase + state.frame_phase[s],
                    )
                }
                None => (0.0, 0.0),
            };
            beta += state.frame_mhz[s] - register.qubits[i].f_res_mhz;
            let u = step_unitary(f_rabi, phase, beta, seg.dt_ns);
            state.amps[s] = u.apply(&state.amps[s]);
        }
        if driven {
            state.drive_time_ns += seg.dt_ns;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn rotation_matches_step_unitary() {
        let u = step_unitary(2.0, 0.3, 0.0, 125.0);
        let r = Su2::equatorial(0.3, 2.0 * PI * 2.0 * 0.125);
        assert!(close(u.a, r.a) && close(u.b, r.b));
    }

    #[test]
    fn mul_matches_dense_product() {
        let x = step_unitary(1.3, 0.2, 0.7, 40.0);
        let y = step_unitary(0.4, -1.1, 2.0, 33.0);
        let (mx, my, mp) = (x.matrix(), y.matrix(), x.mul(&y).matrix());
        for r in 0..2 {
            for c in 0..2 {
                let d = mx[r][0] * my[0][c] + mx[r][1] * my[1][c];
                assert!(close(d, mp[r][c]));
            }
        }
    }

    #[test]
    fn default_kappa_respects_floor() {
        assert!((default_kappa(100.0, 101.0, 10.0) - 0.05).abs() < 1e-15);
        assert!((default_kappa(101.0, 100.0, 10.0) + 0.05).abs() < 1e-15);
        assert!((default_kappa(100.0, 250.0, 10.0) - 1.0 / 300.0).abs() < 1e-15);
    }
}
