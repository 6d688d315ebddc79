use std::path::Path;

use approx::assert_relative_eq;
use spinbench_core::calibration::CalibrationState;
use spinbench_core::clifford::parse_word;
use spinbench_core::config::Config;
use spinbench_core::experiments::*;

fn config() -> Config {
    Config::load(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/five_qubit.toml"))).unwrap()
}

fn point(length: usize, samples: Vec<f64>) -> DecayPoint {
    DecayPoint::from_samples(length, samples)
}

#[test]
fn fit_recovers_exact_exponential() {
    let (a, p): (f64, f64) = (0.97, 0.995);
    let points: Vec<_> = [1usize, 2, 4, 8, 16, 32, 64, 128]
        .iter()
        .map(|&n| point(n, vec![a * p.powi(n as i32); 3]))
        .collect();
    let fit = fit_decay(&points, 1_000_000).unwrap();
    assert_relative_eq!(fit.p, p, max_relative = 1e-12);
    assert_relative_eq!(fit.a, a, max_relative = 1e-10);
    assert_relative_eq!(fit.f_clifford, (1.0 + p) / 2.0, max_relative = 1e-12);
    assert_relative_eq!(fit.f_primitive, 1.0 - (1.0 - p) / 2.0 / 3.25, max_relative = 1e-12);
}

#[test]
fn fit_fails_without_two_usable_lengths() {
    let points = vec![point(1, vec![0.9, 0.91]), point(2, vec![0.0, 0.001])];
    assert!(matches!(fit_decay(&points, 100), Err(spinbench_core::Error::FitFailure { .. })));
}

#[test]
fn interleaved_formula_single_qubit() {
    // r = (d - 1)/d (1 - p_c/p) with d = 2
    let (p, pc) = (0.99, 0.985);
    let r = 0.5 * (1.0 - pc / p);
    let (f, _) = interleaved_fidelity(p, 1e-4, pc, 1e-4);
    assert_relative_eq!(f, 1.0 - r, max_relative = 1e-15);
}

#[test]
fn depolarizing_channel_is_recovered() {
    let cfg = config();
    let p0 = 0.98;
    let rb = RBConfig {
        lengths: vec![1, 2, 4, 8, 16, 32, 64],
        randomizations: 10,
        shots: 100_000,
        depolarizing: Some(p0),
        qubits: vec![2],
        seed: 11,
        ..cfg.rb.clone()
    };
    let cal = CalibrationState::ideal(&cfg.register, rb.gate_time_ns);
    let r = run_rb(&rb, &cfg.register, &cfg.noise, &cal).unwrap().remove(0);
    assert!((r.fit.p - p0).abs() < 3e-4, "p = {}", r.fit.p);
    assert!((r.fit.a - p0).abs() < 5e-3, "A = {}", r.fit.a);
}

#[test]
fn noiseless_single_qubit_rb_is_near_perfect() {
    let cfg = config();
    let rb = RBConfig {
        lengths: vec![1, 4, 16, 64],
        randomizations: 4,
        shots: 1000,
        chi: Some(0.0),
        qubits: vec![1, 5],
        gate_time_ns: 125.0,
        ..cfg.rb.clone()
    };
    let cal = CalibrationState::ideal(&cfg.register, rb.gate_time_ns);
    for r in run_rb(&rb, &cfg.register, &cfg.noise, &cal).unwrap() {
        assert!(r.fit.f_primitive >= 0.999999, "Q{}: {}", r.qubit, r.fit.f_primitive);
    }
}

#[test]
fn same_seed_same_result() {
    let cfg = config();
    let rb = RBConfig {
        lengths: vec![1, 8, 32],
        randomizations: 3,
        shots: 100,
        qubits: vec![3],
        seed: 5,
        ..cfg.rb.clone()
    };
    let cal = CalibrationState::ideal(&cfg.register, rb.gate_time_ns);
    let a = run_rb(&rb, &cfg.register, &cfg.noise, &cal).unwrap();
    let b = run_rb(&rb, &cfg.register, &cfg.noise, &cal).unwrap();
    assert_eq!(a, b);
}

#[test]
fn detuning_response_is_symmetric() {
    let cfg = config();
    let rb = RBConfig {
        lengths: vec![1, 4, 16, 64],
        randomizations: 12,
        shots: 1_000_000,
        chi: Some(0.0),
        qubits: vec![3],
        gate_time_ns: 125.0,
        ..cfg.rb.clone()
    };
    let cal = CalibrationState::ideal(&cfg.register, rb.gate_time_ns);
    let t = detuning_sweep(&rb, &cfg.register, &cfg.noise, &cal, &[-0.3, 0.0, 0.3]).unwrap();
    let (lo, mid, hi) = (t.rows[0].infidelity, t.rows[1].infidelity, t.rows[2].infidelity);
    assert_eq!(t.argmin, 0.0);
    assert!(mid < 1e-5 && lo > 1e-4 && hi > 1e-4);
    assert!((lo - hi).abs() < 0.25 * lo.max(hi), "{lo} vs {hi}");
}

#[test]
fn depolarizing_stand_in_ignores_interleaved_word() {
    let cfg = config();
    let rb = RBConfig {
        lengths: vec![1, 2, 4, 8, 16],
        randomizations: 4,
        shots: 100_000,
        depolarizing: Some(0.99),
        qubits: vec![4],
        ..cfg.rb.clone()
    };
    let cal = CalibrationState::ideal(&cfg.register, rb.gate_time_ns);
    let res = run_interleaved(&rb, &cfg.register, &cfg.noise, &cal, &parse_word("XX").unwrap()).unwrap();
    // the depolarizing stand-in ignores the interleaved word
    assert!((res.fidelity - 1.0).abs() < 1e-3, "{}", res.fidelity);
    assert!(run_interleaved(&rb, &cfg.register, &cfg.noise, &cal, &[]).is_err());
}

#[test]
fn invalid_configs_rejected() {
    let bad = [
        RBConfig {
            lengths: vec![],
            ..Default::default()
        },
        RBConfig {
            lengths: vec![4, 2],
            ..Default::default()
        },
        RBConfig {
            shots: 0,
            ..Default::default()
        },
        RBConfig {
            depolarizing: Some(1.5),
            ..Default::default()
        },
        RBConfig {
            qubits: vec![],
            ..Default::default()
        },
    ];
    for b in bad {
        assert!(b.validate().is_err(), "{b:?}");
    }
}

#[test]
fn coherence_fit_recovers_gaussian_decay() {
    let t: Vec<f64> = (0..40).map(|k| k as f64).collect();
    let y: Vec<f64> = t.iter().map(|&x| 0.5 * (-(x / 10.0f64).powi(2)).exp() + 0.5).collect();
    let f = fit_coherence(CoherenceKind::Ramsey, &t, &y).unwrap();
    assert_relative_eq!(f.time_us, 10.0, max_relative = 1e-6);
}
