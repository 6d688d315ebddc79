use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinbench_core::clifford::*;
use spinbench_core::device::{C64, DOWN};

type M = [[C64; 2]; 2];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mul(x: &M, y: &M) -> M {
    let mut r = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

/// (I - i sigma)/sqrt(2) for sigma_x and sigma_y.
fn half_pi(axis: Axis) -> M {
    let s = 1.0 / 2f64.sqrt();
    match axis {
        Axis::X => [[c(s, 0.0), c(0.0, -s)], [c(0.0, -s), c(s, 0.0)]],
        Axis::Y => [[c(s, 0.0), c(-s, 0.0)], [c(s, 0.0), c(s, 0.0)]],
    }
}

fn oracle(word: &[Axis]) -> M {
    let mut m = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    for &a in word {
        m = mul(&half_pi(a), &m);
    }
    m
}

/// |tr(A^dag B)|/2, equal to 1 when A and B agree up to a global phase.
fn overlap(a: &M, b: &M) -> f64 {
    let mut t = c(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            t += a[i][j].conj() * b[i][j];
        }
    }
    t.norm() / 2.0
}

#[test]
fn set_has_24_distinct_elements_and_78_primitives() {
    let set = build_gate_set();
    assert_eq!(set.len(), 24);
    assert_eq!(set.primitive_count(), 78);
    let mean = set.elements.iter().map(|e| e.word.len()).sum::<usize>() as f64 / 24.0;
    assert_eq!(mean, 3.25);
    let ms: Vec<M> = CLIFFORD_WORDS.iter().map(|w| oracle(&parse_word(w).unwrap())).collect();
    for i in 0..24 {
        for j in 0..i {
            assert!(
                overlap(&ms[i], &ms[j]) < 1.0 - 1e-6,
                "{} equals {}",
                CLIFFORD_WORDS[i],
                CLIFFORD_WORDS[j]
            );
        }
    }
}

#[test]
fn library_matrices_agree_with_oracle() {
    let set = build_gate_set();
    for e in &set.elements {
        let o = oracle(&e.word);
        let m = e.matrix.matrix();
        assert!(overlap(&o, &m) > 1.0 - 1e-12, "{}", word_string(&e.word));
    }
}

#[test]
fn set_is_the_group_generated_by_the_primitives() {
    // breadth-first closure from the two generators
    let mut found: Vec<M> = vec![oracle(&[])];
    let mut frontier = found.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in &frontier {
            for a in [Axis::X, Axis::Y] {
                let p = mul(&half_pi(a), m);
                if !found.iter().any(|f| overlap(f, &p) > 1.0 - 1e-9) {
                    found.push(p);
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    assert_eq!(found.len(), 24);
    let ms: Vec<M> = CLIFFORD_WORDS.iter().map(|w| oracle(&parse_word(w).unwrap())).collect();
    for f in &found {
        assert!(ms.iter().any(|m| overlap(m, f) > 1.0 - 1e-9));
    }
}

#[test]
fn identity_and_flip_indices() {
    let set = build_gate_set();
    assert_eq!(CLIFFORD_WORDS[set.identity], "XXXX");
    assert_eq!(CLIFFORD_WORDS[set.flip], "XX");
}

#[test]
fn unknown_words_rejected() {
    assert!(parse_word("XZ").is_err());
    let set = build_gate_set();
    let seq = sequence_from_indices(&set, 3, vec![1, 2], Outcome::Identity).unwrap();
    assert!(interleave(&set, &seq, &[]).is_ok());
    assert!(sequence_from_indices(&set, 3, vec![24], Outcome::Identity).is_err());
}

#[test]
fn sequence_lines_round_trip() {
    let set = build_gate_set();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = random_sequence(&set, 2, 17, Outcome::Flip, &mut rng).unwrap();
    let seq = interleave(&set, &seq, &parse_word("YX").unwrap()).unwrap();
    let back = CliffordSequence::from_line(&set, &seq.to_line()).unwrap();
    assert_eq!(seq, back);
    let tampered = seq
        .to_line()
        .replacen(&format!("r{}", seq.recovery), &format!("r{}", (seq.recovery + 1) % 24), 1);
    assert!(CliffordSequence::from_line(&set, &tampered).is_err());
}

#[test]
fn mixed_gate_times_rejected() {
    let set = build_gate_set();
    let a = sequence_from_indices(&set, 1, vec![3], Outcome::Identity).unwrap();
    let b = sequence_from_indices(&set, 2, vec![4, 5], Outcome::Identity).unwrap();
    assert!(schedule_simultaneous(&[a.clone(), b.clone()], &[125.0, 250.0]).is_err());
    let t = schedule_simultaneous(&[a.clone(), b.clone()], &[125.0, 125.0]).unwrap();
    assert_eq!(t.len(), a.primitives.len().max(b.primitives.len()));
    assert_eq!(t.counts(), vec![(1, a.primitives.len()), (2, b.primitives.len())]);
    assert!(schedule_simultaneous(&[a.clone(), a], &[125.0, 125.0]).is_err());
}

proptest! {
    #[test]
    fn composition_table_matches_products(a in 0usize..24, b in 0usize..24) {
        let set = build_gate_set();
        let ab = set.then(a, b);
        let mut w = set.elements[a].word.clone();
        w.extend_from_slice(&set.elements[b].word);
        prop_assert!(overlap(&oracle(&w), &oracle(&set.elements[ab].word)) > 1.0 - 1e-9);
        let inv = set.inverse(a);
        prop_assert_eq!(set.then(a, inv), set.identity);
    }

    #[test]
    fn recovery_returns_to_target(seed in any::<u64>(), n in 1usize..60, flip in any::<bool>(), inter in 0usize..24) {
        let set = build_gate_set();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outcome = if flip { Outcome::Flip } else { Outcome::Identity };
        let mut seq = random_sequence(&set, 1, n, outcome, &mut rng).unwrap();
        if inter != set.identity {
            seq = interleave(&set, &seq, &set.elements[inter].word).unwrap();
        }
        let total = oracle(&seq.primitives);
        let out = [total[0][0] * DOWN[0] + total[0][1] * DOWN[1], total[1][0] * DOWN[0] + total[1][1] * DOWN[1]];
        let p_down = out[0].norm_sqr();
        if flip {
            prop_assert!(p_down < 1e-9);
        } else {
            prop_assert!((p_down - 1.0).abs() < 1e-9);
        }
    }
}
