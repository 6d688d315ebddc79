use std::path::Path;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::clifford::{Axis, Timetable};
use crate::device::RegisterModel;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub label: usize,
    pub f_mw_mhz: f64,
    /// Rectangular-equivalent amplitude of a pi/2 gate (a.u.).
    pub amplitude: f64,
    /// Amplitude used when every calibrated qubit is driven at once.
    #[serde(default)]
    pub simultaneous_amplitude: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkScaling {
    pub a: f64,
    pub alpha: f64,
    pub sigma_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub target: usize,
    pub driver: usize,
    /// Phase picked up by the target per driver gate (rad).
    pub delta_phi: f64,
    pub stderr: f64,
    pub n_blocks: usize,
    #[serde(default)]
    pub scaling: Option<StarkScaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub gate_time_ns: f64,
    pub qubits: Vec<QubitCalibration>,
    #[serde(default)]
    pub pairs: Vec<PairCalibration>,
    /// RFC 3339 time of the last change.
    #[serde(default)]
    pub updated: Option<String>,
}

/// Rectangular amplitude giving a pi/2 rotation in `gate_time_ns`.
pub fn ideal_amplitude(drive_efficiency: f64, gate_time_ns: f64) -> f64 {
    0.25 / (drive_efficiency * gate_time_ns * 1e-3)
}

impl CalibrationState {
    /// Nominal values straight from the register description.
    pub fn ideal(register: &RegisterModel, gate_time_ns: f64) -> Self {
        CalibrationState {
            gate_time_ns,
            qubits: register
                .qubits
                .iter()
                .map(|q| QubitCalibration {
                    label: q.label,
                    f_mw_mhz: q.f_res_mhz,
                    amplitude: ideal_amplitude(q.drive_efficiency, gate_time_ns),
                    simultaneous_amplitude: None,
                })
                .collect(),
            pairs: Vec::new(),
            updated: None,
        }
    }

    pub fn qubit(&self, label: usize) -> Result<&QubitCalibration> {
        self.qubits.iter().find(|q| q.label == label).ok_or(Error::UnknownQubit(label))
    }

    pub fn qubit_mut(&mut self, label: usize) -> Result<&mut QubitCalibration> {
        self.qubits.iter_mut().find(|q| q.label == label).ok_or(Error::UnknownQubit(label))
    }

    pub fn pair(&self, target: usize, driver: usize) -> Option<&PairCalibration> {
        self.pairs.iter().find(|p| p.target == target && p.driver == driver)
    }

    pub fn delta_phi(&self, target: usize, driver: usize) -> Option<f64> {
        if target == driver {
            return Some(0.0);
        }
        self.pair(target, driver).map(|p| p.delta_phi)
    }

    pub fn set_pair(&mut self, pair: PairCalibration) {
        match self.pairs.iter_mut().find(|p| p.target == pair.target && p.driver == pair.driver) {
            Some(p) => *p = pair,
            None => {
                self.pairs.push(pair);
                self.pairs.sort_by_key(|p| (p.target, p.driver));
            }
        }
    }

    /// Same calibration at another gate time: amplitudes scale inversely,
    /// crosstalk phases and simultaneous amplitudes are dropped.
    pub fn at_gate_time(&self, gate_time_ns: f64) -> Self {
        let k = self.gate_time_ns / gate_time_ns;
        CalibrationState {
            gate_time_ns,
            qubits: self
                .qubits
                .iter()
                .map(|q| QubitCalibration {
                    amplitude: q.amplitude * k,
                    simultaneous_amplitude: None,
                    ..q.clone()
                })
                .collect(),
            pairs: Vec::new(),
            updated: self.updated.clone(),
        }
    }

    pub fn touch(&mut self) {
        self.updated = Some(chrono::Utc::now().to_rfc3339());
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: CalibrationState = serde_json::from_str(text)?;
        if s.qubits.iter().any(|q| !(q.amplitude > 0.0)) {
            return Err(invalid("calibrated amplitudes must be positive"));
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-cycle frame corrections for a timetable: after each cycle qubit `i`
/// advances by the sum of its calibrated phases over the other qubits driven
/// in that cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensation {
    pub qubits: Vec<usize>,
    matrix: Vec<Vec<f64>>,
}

impl Compensation {
    pub fn new(state: &CalibrationState, timetable: &Timetable) -> Result<Self> {
        let qubits = timetable.qubits.clone();
        let n = qubits.len();
        let mut matrix = vec![vec![0.0; n]; n];
        let mut needed = vec![vec![false; n]; n];
        for c in &timetable.cycles {
            for &(j, _) in c.iter() {
                for (ii, _) in qubits.iter().enumerate() {
                    if let Some(jj) = qubits.iter().position(|&q| q == j) {
                        needed[ii][jj] = true;
                    }
                }
            }
        }
        for (ii, &i) in qubits.iter().enumerate() {
            for (jj, &j) in qubits.iter().enumerate() {
                if i == j || !needed[ii][jj] {
                    continue;
                }
                matrix[ii][jj] = state
                    .delta_phi(i, j)
                    .ok_or(Error::MissingPairCalibration { target: i, driver: j })?;
            }
        }
        Ok(Compensation { qubits, matrix })
    }

    /// Frame advance of every timetable qubit caused by `cycle`.
    pub fn increments(&self, cycle: &[(usize, Axis)]) -> SmallVec<[f64; 5]> {
        (0..self.qubits.len())
            .map(|ii| {
                cycle
                    .iter()
                    .filter_map(|&(j, _)| self.qubits.iter().position(|&q| q == j))
                    .filter(|&jj| jj != ii)
                    .map(|jj| self.matrix[ii][jj])
                    .sum()
            })
            .collect()
    }
}

/// Cumulative phase offset of every timetable qubit before each cycle, plus
/// the final value after the last cycle.
pub fn compile_compensation(state: &CalibrationState, timetable: &Timetable) -> Result<Vec<Vec<f64>>> {
    let comp = Compensation::new(state, timetable)?;
    let mut acc = vec![0.0; comp.qubits.len()];
    let mut out = Vec::with_capacity(timetable.len() + 1);
    out.push(acc.clone());
    for c in &timetable.cycles {
        for (a, d) in acc.iter_mut().zip(comp.increments(c)) {
            *a += d;
        }
        out.push(acc.clone());
    }
    Ok(out)
}
