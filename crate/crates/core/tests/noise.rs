use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spinbench_core::noise::*;

fn schedule(n_seq: usize, slots: usize, shots: usize) -> ExperimentSchedule {
    ExperimentSchedule {
        gate_time_ns: 125.0,
        idle_ns: 2.0,
        cycle_time_s: DEFAULT_CYCLE_TIME_S,
        shots,
        sequences: (0..n_seq)
            .map(|k| ScheduledSequence {
                slots,
                dead_time_before_s: if k == 0 { 0.0 } else { 1.0 },
            })
            .collect(),
    }
}

#[test]
fn psd_point_values() {
    let m = NoiseModel::default();
    assert_relative_eq!(m.psd(1.0), 1.25e7, max_relative = 1e-15);
    let f: f64 = 1e3;
    let expected = 1e7 * (0.25 * f.powf(-1.3) + 1.0 / f);
    assert_relative_eq!(m.psd(f), expected, max_relative = 1e-15);
    assert_relative_eq!(m.clone().with_chi(3.0).psd(f), 3.0 * expected, max_relative = 1e-15);
}

#[test]
fn band_rms_matches_closed_form() {
    let m = NoiseModel::default();
    let (lo, hi) = (0.01f64, 1e4f64);
    let a = 0.25 * (hi.powf(-0.3) - lo.powf(-0.3)) / -0.3;
    let b = (hi / lo).ln();
    let expected = (1e7 * (a + b)).sqrt();
    assert_relative_eq!(m.band_rms(lo, hi), expected, max_relative = 1e-6);
}

#[test]
fn welch_recovers_white_noise_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma = 0.3;
    let dt = 1e-3;
    let x: Vec<f64> = (0..1 << 17)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let t = verify_psd(&x, dt).unwrap();
    let level = 2.0 * sigma * sigma * dt;
    let inner = &t.psd[4..t.psd.len() - 4];
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    assert_relative_eq!(mean, level, max_relative = 0.02);
}

#[test]
fn synthesized_trace_follows_model_within_3_db() {
    let m = NoiseModel::default().with_seed(4);
    let dt = 1e-4;
    let n = 1 << 18;
    let x = synthesize_uniform(&m, dt, n, 0).unwrap();
    let t = verify_psd(&x, dt).unwrap();
    let f_lo = 20.0 / (n as f64 / 8.0 * dt);
    for (f, p, bins) in t.log_band_average(f_lo, 0.25 / dt, 4) {
        let target = m.psd(f) * 1e-12;
        let err_db = 10.0 * (p / target).log10();
        assert!(err_db.abs() < 3.0, "{f} Hz: {err_db:.2} dB over {bins} bins");
    }
}

#[test]
fn short_trace_rejected() {
    assert!(verify_psd(&vec![0.0; 1000], 1e-3).is_err());
    let t = verify_psd(&vec![0.0; MIN_WELCH_SAMPLES], 1e-3).unwrap();
    assert!(t.degenerate);
}

#[test]
fn same_seed_same_noise() {
    let m = NoiseModel::default().with_seed(77);
    let s = schedule(6, 40, 30);
    let a = synthesize(&m, &s).unwrap();
    let b = synthesize(&m, &s).unwrap();
    assert_eq!(a, b);
    let c = synthesize(&m.clone().with_seed(78), &s).unwrap();
    assert_ne!(a.sequences[0].if_values, c.sequences[0].if_values);
}

#[test]
fn sequences_can_be_drawn_in_any_order() {
    let m = NoiseModel::default().with_seed(5);
    let s = schedule(8, 30, 20);
    let syn = NoiseSynthesizer::new(&m, &s, 2).unwrap();
    let forward: Vec<_> = (0..8).map(|k| syn.sequence(k)).collect();
    let backward: Vec<_> = (0..8).rev().map(|k| syn.sequence(k)).collect();
    for k in 0..8 {
        assert_eq!(forward[k], backward[7 - k]);
    }
}

#[test]
fn amplitude_scales_with_root_chi() {
    let s = schedule(3, 20, 10);
    let base = synthesize(&NoiseModel::default().with_seed(1), &s).unwrap();
    let four = synthesize(&NoiseModel::default().with_seed(1).with_chi(4.0), &s).unwrap();
    for (a, b) in base.sequences.iter().zip(&four.sequences) {
        assert_relative_eq!(b.lf, 2.0 * a.lf, max_relative = 1e-12);
        for (x, y) in a.if_values.iter().zip(&b.if_values) {
            assert_relative_eq!(*y, 2.0 * x, max_relative = 1e-10, epsilon = 1e-15);
        }
    }
    let zero = synthesize(&NoiseModel::default().with_chi(0.0), &s).unwrap();
    assert!(zero.sequences.iter().all(|q| q.lf == 0.0 && q.if_values.iter().all(|&v| v == 0.0)));
}

#[test]
fn band_selection_switches_components() {
    let s = schedule(2, 50, 10);
    let lf = synthesize(&NoiseModel::default().with_bands(BandSelection::LF_ONLY), &s).unwrap();
    for q in &lf.sequences {
        assert!(q.lf != 0.0);
        assert!(q.if_values.iter().all(|&v| v == 0.0));
        assert!(q.hf_samples.is_empty());
        assert_eq!(q.at(3, 100.0), q.lf);
    }
}

#[test]
fn band_edges_are_ordered() {
    let syn = NoiseSynthesizer::new(&NoiseModel::default(), &schedule(4, 10, 50), 0).unwrap();
    let e = syn.edges();
    assert!(e.f_cut < e.f_lf_max && e.f_lf_max < e.f_if_max && e.f_if_max < e.f_hf_max);
    assert_relative_eq!(e.f_if_max, 0.5 / 127e-9, max_relative = 1e-12);
}

#[test]
fn invalid_models_rejected() {
    let s = schedule(1, 1, 1);
    assert!(synthesize(&NoiseModel::default().with_chi(-1.0), &s).is_err());
    let m = NoiseModel {
        psd_coeff_a: -10.0,
        psd_coeff_b: 0.0,
        ..Default::default()
    };
    assert!(synthesize(&m, &s).is_err());
    let mut empty = s.clone();
    empty.sequences.clear();
    assert!(synthesize(&NoiseModel::default(), &empty).is_err());
}
