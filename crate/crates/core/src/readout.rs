//! Parity readout of the outer pairs, QND readout of the middle qubit and
//! the ZZ/ZI tomographic reconstruction.
//!
//! Signal convention: even pair parity gives a high signal (cluster at 1),
//! odd parity a low one (cluster at 0). In the ZI run the mapped pair reads
//! high exactly when the first qubit of the pair is up.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairErrors {
    pub qubits: [usize; 2],
    pub even_to_odd: f64,
    pub odd_to_even: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadoutModel {
    pub threshold: f64,
    /// Standard deviation of each signal cluster.
    pub signal_width: f64,
    /// Assignment errors used for pairs without their own entry.
    pub even_to_odd: f64,
    pub odd_to_even: f64,
    pub pairs: Vec<PairErrors>,
    /// Probability that an up middle qubit is reported down by one QND read.
    pub qnd_miss: f64,
    /// Depolarizing probability of the mapping CNOT in the ZI run.
    pub cnot_depolarizing: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel {
            threshold: 0.5,
            signal_width: 0.05,
            even_to_odd: 0.0,
            odd_to_even: 0.0,
            pairs: Vec::new(),
            qnd_miss: 0.0,
            cnot_depolarizing: 0.0,
        }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.even_to_odd, self.odd_to_even, self.qnd_miss]
            .into_iter()
            .chain(self.pairs.iter().flat_map(|p| [p.even_to_odd, p.odd_to_even]));
        for p in probs {
            if !(0.0..0.5).contains(&p) {
                return Err(invalid(format!("assignment error {p} outside [0, 0.5)")));
            }
        }
        if !(0.0..=1.0).contains(&self.cnot_depolarizing) {
            return Err(invalid("cnot depolarizing probability outside [0, 1]"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) || self.signal_width < 0.0 {
            return Err(invalid("threshold must lie between the clusters at 0 and 1"));
        }
        Ok(())
    }

    /// (even -> odd, odd -> even) for the pair containing `qubits`.
    pub fn errors(&self, qubits: [usize; 2]) -> (f64, f64) {
        self.pairs
            .iter()
            .find(|p| p.qubits == qubits || p.qubits == [qubits[1], qubits[0]])
            .map_or((self.even_to_odd, self.odd_to_even), |p| (p.even_to_odd, p.odd_to_even))
    }

    fn signal<R: Rng>(&self, high: bool, rng: &mut R) -> f64 {
        let mean = if high { 1.0 } else { 0.0 };
        if self.signal_width > 0.0 {
            mean + self.signal_width * rng.sample::<f64, _>(Normal::new(0.0, 1.0).unwrap())
        } else {
            mean
        }
    }
}

/// Spin configuration of a pair, `true` meaning up.
pub type PairSpins = [bool; 2];

/// Probabilities over (down-down, down-up, up-down, up-up).
pub fn pair_probabilities(p1_up: f64, p2_up: f64) -> [f64; 4] {
    [
        (1.0 - p1_up) * (1.0 - p2_up),
        (1.0 - p1_up) * p2_up,
        p1_up * (1.0 - p2_up),
        p1_up * p2_up,
    ]
}

fn sample_pair<R: Rng>(probs: &[f64; 4], rng: &mut R) -> PairSpins {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return [k & 2 != 0, k & 1 != 0];
        }
    }
    [true, true]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityShot {
    pub signal: f64,
    /// Thresholded result.
    pub even: bool,
}

fn parity_from_spins<R: Rng>(spins: PairSpins, errors: (f64, f64), model: &ReadoutModel, rng: &mut R) -> ParityShot {
    let truth = spins[0] == spins[1];
    let flip = if truth { errors.0 } else { errors.1 };
    let reported = if rng.random::<f64>() < flip { !truth } else { truth };
    let signal = model.signal(reported, rng);
    ParityShot {
        signal,
        even: signal > model.threshold,
    }
}

/// One parity measurement of a pair in the product state given by `probs`.
pub fn psb_parity_shot<R: Rng>(probs: &[f64; 4], pair: [usize; 2], model: &ReadoutModel, rng: &mut R) -> Result<ParityShot> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0) {
        return Err(invalid("pair probabilities must be non-negative and sum to 1"));
    }
    let spins = sample_pair(probs, rng);
    Ok(parity_from_spins(spins, model.errors(pair), model, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub spins: PairSpins,
    /// The verifying parity read reported odd.
    pub success: bool,
}

/// Parity read, conditional flip of the second spin on an even result,
/// verifying read, then the adiabatic map of any odd state to up-down.
pub fn feedback_initialize<R: Rng>(probs: &[f64; 4], pair: [usize; 2], model: &ReadoutModel, rng: &mut R) -> Result<FeedbackOutcome> {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("pair probabilities must sum to 1"));
    }
    let errors = model.errors(pair);
    let mut spins = sample_pair(probs, rng);
    if parity_from_spins(spins, errors, model, rng).even {
        spins[1] = !spins[1];
    }
    let success = !parity_from_spins(spins, errors, model, rng).even;
    if spins[0] != spins[1] {
        spins = [true, false];
    }
    Ok(FeedbackOutcome { spins, success })
}

/// Probability that [`feedback_initialize`] leaves the pair even.
pub fn feedback_failure(probs: &[f64; 4], errors: (f64, f64)) -> f64 {
    let even = probs[0] + probs[3];
    even * errors.0 + (1.0 - even) * errors.1
}

/// Repeated QND read of the middle qubit with a conditional flip after each
/// up result. Returns the first reported bit and the final spin.
pub fn qnd_readout_q3<R: Rng>(up: bool, model: &ReadoutModel, repetitions: usize, rng: &mut R) -> (bool, bool) {
    let mut spin = up;
    let mut first = None;
    for _ in 0..repetitions.max(1) {
        let reported = spin && rng.random::<f64>() >= model.qnd_miss;
        first.get_or_insert(reported);
        if reported {
            spin = false;
        }
    }
    (first.unwrap_or(false), spin)
}

/// Chance that the middle qubit is still up after `repetitions` reads,
/// starting up with probability `p_up`.
pub fn qnd_initialization_error(p_up: f64, miss: f64, repetitions: usize) -> f64 {
    p_up * miss.powi(repetitions as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPopulations {
    pub p_up_up: f64,
    pub p_up_down: f64,
    pub p_down_up: f64,
    pub p_down_down: f64,
    pub p1_up: f64,
    pub p2_up: f64,
}

/// Thresholding of paired (s_ZZ, s_ZI) shots into the four basis
/// populations and the single-qubit marginals.
pub fn tomographic_reconstruct(shots: &[(f64, f64)], threshold: f64) -> Result<PairPopulations> {
    if shots.is_empty() {
        return Err(Error::EmptyShots);
    }
    let mut c = [0usize; 4];
    for &(zz, zi) in shots {
        let k = match (zz > threshold, zi > threshold) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        };
        c[k] += 1;
    }
    let n = shots.len() as f64;
    let uu = c[0] as f64 / n;
    let ud = c[1] as f64 / n;
    let du = c[2] as f64 / n;
    let dd = c[3] as f64 / n;
    Ok(PairPopulations {
        p_up_up: uu,
        p_up_down: ud,
        p_down_up: du,
        p_down_down: dd,
        p1_up: uu + ud,
        p2_up: uu + du,
    })
}

/// Signals of the ZZ run and the ZI run for one pair. Both signals of a shot
/// come from one draw of the pair configuration, so the run pair behaves as
/// a single projective measurement followed by a relabeling.
pub fn simulate_tomographic_shots<R: Rng>(
    p1_up: f64,
    p2_up: f64,
    pair: [usize; 2],
    model: &ReadoutModel,
    shots: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    let probs = pair_probabilities(p1_up, p2_up);
    let errors = model.errors(pair);
    (0..shots)
        .map(|_| {
            let mut s = sample_pair(&probs, rng);
            let zz = parity_from_spins(s, errors, model, rng).signal;
            if model.cnot_depolarizing > 0.0 && rng.random::<f64>() < model.cnot_depolarizing {
                s[0] = rng.random();
            }
            // the mapped pair is even exactly when the first spin is up
            let zi = parity_from_spins([s[0], true], errors, model, rng).signal;
            (zz, zi)
        })
        .collect()
}

/// Measured up-populations of qubits 1..5 from `shots` repetitions: pairs
/// through the tomographic path, the middle qubit through one QND read.
pub fn measure_five<R: Rng>(p_up: &[f64; 5], model: &ReadoutModel, shots: usize, rng: &mut R) -> Result<[f64; 5]> {
    if shots == 0 {
        return Err(Error::EmptyShots);
    }
    let a = tomographic_reconstruct(
        &simulate_tomographic_shots(p_up[0], p_up[1], [1, 2], model, shots, rng),
        model.threshold,
    )?;
    let b = tomographic_reconstruct(
        &simulate_tomographic_shots(p_up[3], p_up[4], [4, 5], model, shots, rng),
        model.threshold,
    )?;
    let seen = p_up[2] * (1.0 - model.qnd_miss);
    let k = Binomial::new(shots as u64, seen.clamp(0.0, 1.0))
        .map_err(|e| invalid(e.to_string()))?
        .sample(rng);
    Ok([a.p1_up, a.p2_up, k as f64 / shots as f64, b.p1_up, b.p2_up])
}

/// F_seq = |P_up(flip) - P_up(no flip)|.
pub fn sequence_fidelity(p_flip: f64, p_noflip: f64) -> f64 {
    (p_flip - p_noflip).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShotRecord {
    Cycle { q12_even: bool, q3_up: bool, q45_even: bool },
    Tomographic { s_zz: f64, s_zi: f64 },
}

/// CSV rows `sequence_id,basis,s_value`.
pub fn write_shots_csv<W: Write>(records: &[(usize, ShotRecord)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "sequence_id,basis,s_value")?;
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    for (id, r) in records {
        match *r {
            ShotRecord::Cycle { q12_even, q3_up, q45_even } => {
                writeln!(out, "{id},q12,{}", b(q12_even))?;
                writeln!(out, "{id},q3,{}", b(q3_up))?;
                writeln!(out, "{id},q45,{}", b(q45_even))?;
            }
            ShotRecord::Tomographic { s_zz, s_zi } => {
                writeln!(out, "{id},zz,{s_zz}")?;
                writeln!(out, "{id},zi,{s_zi}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn table_rows() {
        let r = tomographic_reconstruct(&[(0.9, 0.9); 3], 0.5).unwrap();
        assert_eq!((r.p1_up, r.p2_up), (1.0, 1.0));
        let r = tomographic_reconstruct(&[(0.1, 0.9); 3], 0.5).unwrap();
        assert_eq!((r.p1_up, r.p2_up), (1.0, 0.0));
        assert!(tomographic_reconstruct(&[], 0.5).is_err());
    }

    #[test]
    fn feedback_without_errors_always_up_down() {
        let m = ReadoutModel::default();
        let mut rng = stream(1, &[]);
        for _ in 0..200 {
            let o = feedback_initialize(&[0.25; 4], [1, 2], &m, &mut rng).unwrap();
            assert_eq!(o.spins, [true, false]);
            assert!(o.success);
        }
    }

    #[test]
    fn qnd_error_shrinks() {
        assert!(qnd_initialization_error(0.5, 0.05, 2) < qnd_initialization_error(0.5, 0.05, 1));
    }
}
