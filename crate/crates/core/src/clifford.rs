//! Single-qubit Clifford group built from X and Y pi/2 primitives.
//!
//! Words are written in time order: "YX" plays Y first, then X.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::device::Su2;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn phase(self) -> f64 {
        match self {
            Axis::X => 0.0,
            Axis::Y => FRAC_PI_2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
        }
    }
}

/// A pi/2 rotation about X or Y with an extra microwave phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveGate {
    pub axis: Axis,
    pub phase_offset: f64,
}

impl PrimitiveGate {
    pub const X: PrimitiveGate = PrimitiveGate {
        axis: Axis::X,
        phase_offset: 0.0,
    };
    pub const Y: PrimitiveGate = PrimitiveGate {
        axis: Axis::Y,
        phase_offset: 0.0,
    };

    pub fn ideal(&self) -> Su2 {
        Su2::equatorial(self.axis.phase() + self.phase_offset, FRAC_PI_2)
    }
}

pub fn parse_word(word: &str) -> Result<Vec<Axis>> {
    word.chars()
        .map(|c| match c {
            'X' | 'x' => Ok(Axis::X),
            'Y' | 'y' => Ok(Axis::Y),
            other => Err(invalid(format!("'{other}' is not a primitive"))),
        })
        .collect()
}

pub fn word_string(word: &[Axis]) -> String {
    word.iter().map(|a| a.letter()).collect()
}

/// Ideal unitary of a primitive word.
pub fn word_matrix(word: &[Axis]) -> Su2 {
    word.iter().fold(Su2::IDENTITY, |acc, a| {
        PrimitiveGate {
            axis: *a,
            phase_offset: 0.0,
        }
        .ideal()
        .mul(&acc)
    })
}

pub const CLIFFORD_WORDS: [&str; 24] = [
    "XXXX", "Y", "X", "YX", "XY", "YY", "XX", "YXX", "YYX", "YXY", "YYY", "XXX", "XXY", "XYY", "YXYY", "YYXY", "XXXY", "YXXX", "YYXX",
    "XYYY", "YYYX", "YYYXY", "YXXXY", "YXYYY",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordElement {
    pub index: usize,
    pub word: Vec<Axis>,
    pub matrix: Su2,
}

#[derive(Debug, Clone)]
pub struct GateSet {
    pub elements: Vec<CliffordElement>,
    /// `compose[a][b]`: element equal to playing `a` then `b`.
    compose: Vec<[u8; 24]>,
    inverse: [u8; 24],
    pub identity: usize,
    /// Index of the X^2 (pi about X) element.
    pub flip: usize,
}

fn find(elements: &[CliffordElement], m: &Su2) -> Option<usize> {
    elements.iter().position(|e| e.matrix.approx_eq_phase(m, 1e-10))
}

/// Build the 24-element set with its multiplication and inverse tables.
pub fn build_gate_set() -> GateSet {
    let elements: Vec<CliffordElement> = CLIFFORD_WORDS
        .iter()
        .enumerate()
        .map(|(index, w)| {
            let word = parse_word(w).expect("static word");
            let matrix = word_matrix(&word);
            CliffordElement { index, word, matrix }
        })
        .collect();
    let mut compose = vec![[0u8; 24]; 24];
    let mut inverse = [0u8; 24];
    for a in 0..24 {
        for b in 0..24 {
            let m = elements[b].matrix.mul(&elements[a].matrix);
            compose[a][b] = find(&elements, &m).expect("Clifford set is closed") as u8;
        }
        inverse[a] = find(&elements, &elements[a].matrix.dagger()).expect("inverse exists") as u8;
    }
    let identity = find(&elements, &Su2::IDENTITY).expect("identity present");
    let flip = find(&elements, &Su2::equatorial(0.0, PI)).expect("X^2 present");
    GateSet {
        elements,
        compose,
        inverse,
        identity,
        flip,
    }
}

/// Shared instance.
pub fn gate_set() -> &'static GateSet {
    static SET: OnceLock<GateSet> = OnceLock::new();
    SET.get_or_init(build_gate_set)
}

impl GateSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element equal to `first` followed by `second`.
    pub fn then(&self, first: usize, second: usize) -> usize {
        self.compose[first][second] as usize
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn primitive_count(&self) -> usize {
        self.elements.iter().map(|e| e.word.len()).sum()
    }

    /// Element whose matrix matches a primitive word, if it is a Clifford.
    pub fn lookup_word(&self, word: &[Axis]) -> Option<usize> {
        find(&self.elements, &word_matrix(word))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Identity,
    Flip,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Identity => "identity",
            Outcome::Flip => "flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordSequence {
    pub qubit: usize,
    pub cliffords: Vec<usize>,
    /// Word played after every Clifford (interleaved benchmarking).
    pub interleaved: Vec<Axis>,
    pub recovery: usize,
    pub outcome: Outcome,
    /// Every primitive in play order, recovery included.
    pub primitives: Vec<Axis>,
}

fn finish(set: &GateSet, qubit: usize, cliffords: Vec<usize>, interleaved: Vec<Axis>, outcome: Outcome) -> Result<CliffordSequence> {
    let inter = if interleaved.is_empty() {
        None
    } else {
        Some(
            set.lookup_word(&interleaved)
                .ok_or_else(|| invalid(format!("word {} is not a Clifford", word_string(&interleaved))))?,
        )
    };
    let mut acc = set.identity;
    let mut primitives = Vec::new();
    for &c in &cliffords {
        acc = set.then(acc, c);
        primitives.extend_from_slice(&set.elements[c].word);
        if let Some(g) = inter {
            acc = set.then(acc, g);
            primitives.extend_from_slice(&interleaved);
        }
    }
    let undo = set.inverse(acc);
    let recovery = match outcome {
        Outcome::Identity => undo,
        Outcome::Flip => set.then(undo, set.flip),
    };
    primitives.extend_from_slice(&set.elements[recovery].word);
    Ok(CliffordSequence {
        qubit,
        cliffords,
        interleaved,
        recovery,
        outcome,
        primitives,
    })
}

/// `n` uniform Clifford draws plus the recovery element.
pub fn random_sequence<R: Rng>(set: &GateSet, qubit: usize, n: usize, outcome: Outcome, rng: &mut R) -> Result<CliffordSequence> {
    if n == 0 {
        return Err(invalid("sequence length must be at least 1"));
    }
    let cliffords = (0..n).map(|_| rng.random_range(0..set.len())).collect();
    finish(set, qubit, cliffords, Vec::new(), outcome)
}

/// Sequence from explicit Clifford indices.
pub fn sequence_from_indices(set: &GateSet, qubit: usize, cliffords: Vec<usize>, outcome: Outcome) -> Result<CliffordSequence> {
    if let Some(&bad) = cliffords.iter().find(|&&c| c >= set.len()) {
        return Err(invalid(format!("Clifford index {bad} out of range")));
    }
    finish(set, qubit, cliffords, Vec::new(), outcome)
}

/// Insert `word` after every Clifford and recompute the recovery.
pub fn interleave(set: &GateSet, seq: &CliffordSequence, word: &[Axis]) -> Result<CliffordSequence> {
    let mut w = seq.interleaved.clone();
    w.extend_from_slice(word);
    finish(set, seq.qubit, seq.cliffords.clone(), w, seq.outcome)
}

impl CliffordSequence {
    /// Ideal product of the whole primitive schedule.
    pub fn ideal_unitary(&self) -> Su2 {
        word_matrix(&self.primitives)
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "q{} {} r{} i{}:",
            self.qubit,
            self.outcome.as_str(),
            self.recovery,
            if self.interleaved.is_empty() {
                "-".to_string()
            } else {
                word_string(&self.interleaved)
            }
        );
        for c in &self.cliffords {
            let _ = write!(s, " {c}");
        }
        s
    }

    /// Parse a line written by [`to_line`](Self::to_line). The recovery is
    /// recomputed and checked against the stored one.
    pub fn from_line(set: &GateSet, line: &str) -> Result<CliffordSequence> {
        let (head, body) = line.split_once(':').ok_or_else(|| invalid("missing ':' in sequence line"))?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(invalid(format!("malformed header '{head}'")));
        }
        let qubit: usize = parts[0].trim_start_matches('q').parse().map_err(|_| invalid("bad qubit"))?;
        let outcome = match parts[1] {
            "identity" => Outcome::Identity,
            "flip" => Outcome::Flip,
            o => return Err(invalid(format!("bad outcome '{o}'"))),
        };
        let recovery: usize = parts[2].trim_start_matches('r').parse().map_err(|_| invalid("bad recovery"))?;
        let iw = parts[3].trim_start_matches('i');
        let interleaved = if iw == "-" { Vec::new() } else { parse_word(iw)? };
        let cliffords = body
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| invalid(format!("bad index '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        let mut seq = sequence_from_indices(set, qubit, cliffords, outcome)?;
        if !interleaved.is_empty() {
            seq = interleave(set, &seq, &interleaved)?;
        }
        if seq.recovery != recovery {
            return Err(invalid(format!(
                "stored recovery {recovery} disagrees with computed {}",
                seq.recovery
            )));
        }
        Ok(seq)
    }
}

/// Cycle-by-cycle play list for simultaneous sequences. Each cycle lists the
/// qubits driven in it with their primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timetable {
    pub gate_time_ns: f64,
    pub qubits: Vec<usize>,
    pub cycles: Vec<SmallVec<[(usize, Axis); 5]>>,
}

impl Timetable {
    pub fn single(seq: &CliffordSequence, gate_time_ns: f64) -> Timetable {
        Timetable {
            gate_time_ns,
            qubits: vec![seq.qubit],
            cycles: seq
                .primitives
                .iter()
                .map(|&a| {
                    let mut c = SmallVec::new();
                    c.push((seq.qubit, a));
                    c
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Primitives played per qubit.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        self.qubits
            .iter()
            .map(|&q| (q, self.cycles.iter().filter(|c| c.iter().any(|p| p.0 == q)).count()))
            .collect()
    }
}

/// Align sequences primitive by primitive. Shorter sequences simply stop, so
/// trailing cycles drive only the qubits whose sequences are longer.
pub fn schedule_simultaneous(sequences: &[CliffordSequence], gate_times_ns: &[f64]) -> Result<Timetable> {
    if sequences.is_empty() || sequences.len() != gate_times_ns.len() {
        return Err(invalid("need one gate time per sequence"));
    }
    let tg = gate_times_ns[0];
    if gate_times_ns.iter().any(|&t| (t - tg).abs() > 1e-9 * tg.abs().max(1.0)) {
        return Err(Error::MixedGateTimes(gate_times_ns.to_vec()));
    }
    let mut qubits: Vec<usize> = sequences.iter().map(|s| s.qubit).collect();
    qubits.sort_unstable();
    if qubits.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("two sequences target the same qubit"));
    }
    let n = sequences.iter().map(|s| s.primitives.len()).max().unwrap_or(0);
    let cycles = (0..n)
        .map(|k| {
            sequences
                .iter()
                .filter_map(|s| s.primitives.get(k).map(|&a| (s.qubit, a)))
                .collect()
        })
        .collect();
    Ok(Timetable {
        gate_time_ns: tg,
        qubits: sequences.iter().map(|s| s.qubit).collect(),
        cycles,
    })
}
