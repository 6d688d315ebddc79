use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use smallvec::smallvec;
use spinbench_core::device::*;
use spinbench_core::Error;

type M = [[C64; 2]; 2];

fn mat_mul(x: &M, y: &M) -> M {
    let mut r = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

/// exp(-i H t) by scaling and squaring a Taylor series; H in rad/ns.
fn expm_oracle(f_rabi: f64, phase: f64, beta: f64, dt_ns: f64) -> M {
    let w = 2.0 * PI * 1e-3;
    let i = C64::new(0.0, 1.0);
    let hx = w * f_rabi / 2.0 * phase.cos();
    let hy = w * f_rabi / 2.0 * phase.sin();
    let hz = w * beta / 2.0;
    let h: M = [[C64::new(hz, 0.0), C64::new(hx, -hy)], [C64::new(hx, hy), C64::new(-hz, 0.0)]];
    let squarings = 20;
    let s = dt_ns / (1u64 << squarings) as f64;
    let a: M = [[-i * h[0][0] * s, -i * h[0][1] * s], [-i * h[1][0] * s, -i * h[1][1] * s]];
    let mut term: M = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let mut sum = term;
    for k in 1..12 {
        term = mat_mul(&term, &a);
        for r in 0..2 {
            for c in 0..2 {
                term[r][c] /= k as f64;
                sum[r][c] += term[r][c];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

fn register() -> RegisterModel {
    let q = |label, f| QubitParams {
        label,
        f_res_mhz: f,
        drive_efficiency: 4.0,
        t2_star_us: 10.0,
        t2_hahn_us: 60.0,
        rabi_linearity_limit_mhz: 8.0,
    };
    RegisterModel::new(vec![q(1, 16_000.0), q(2, 16_150.0)], 10.0).unwrap()
}

#[test]
fn step_unitary_matches_matrix_exponential() {
    for &(f, p, b, dt) in &[
        (2.0, 0.0, 0.0, 125.0),
        (3.1, 1.2, 0.4, 37.0),
        (0.0, 0.0, 1.7, 90.0),
        (5.0, -2.0, -3.0, 0.5),
    ] {
        let u = step_unitary(f, p, b, dt).matrix();
        let o = expm_oracle(f, p, b, dt);
        for r in 0..2 {
            for c in 0..2 {
                assert!((u[r][c] - o[r][c]).norm() < 1e-9, "({f}, {p}, {b}, {dt}) entry {r}{c}");
            }
        }
    }
}

#[test]
fn pure_detuning_half_cycle_is_z_pi() {
    // beta * dt = 1/2 cycle
    let u = step_unitary(0.0, 0.0, 1.0, 500.0);
    let plus = [C64::new(1.0 / 2f64.sqrt(), 0.0), C64::new(1.0 / 2f64.sqrt(), 0.0)];
    let out = u.apply(&plus);
    let rel = (out[1] / out[0]).arg();
    assert_relative_eq!(rel.abs(), PI, epsilon = 1e-12);
}

#[test]
fn resonant_pi_pulse_flips() {
    // 2 MHz Rabi for 250 ns is half a cycle
    let u = step_unitary(2.0, 0.7, 0.0, 250.0);
    let out = u.apply(&DOWN);
    assert_relative_eq!(out[1].norm_sqr(), 1.0, epsilon = 1e-14);
}

#[test]
fn norm_preserved_over_a_million_steps() {
    let reg = register();
    let mut st = SpinState::new(&reg, &[1, 2]).unwrap();
    let seg = DriveSegment {
        dt_ns: 0.5,
        tones: smallvec![Tone {
            qubit: 1,
            amplitude: 0.61,
            phase: 0.3,
            carrier_mhz: 16_000.2,
        }],
    };
    let segments = vec![seg; 1000];
    for _ in 0..1000 {
        propagate_in_place(&mut st, &segments, &reg, None).unwrap();
    }
    assert!(st.norm_error() < 1e-9, "{}", st.norm_error());
}

#[test]
fn spectator_picks_up_stark_phase() {
    let reg = register();
    let kappa = reg.kappa(1, 2).unwrap();
    assert_relative_eq!(kappa, 1.0 / 300.0, max_relative = 1e-15);
    let mut st = SpinState::new(&reg, &[1, 2]).unwrap();
    let h = 1.0 / 2f64.sqrt();
    st.amps[0] = [C64::new(h, 0.0), C64::new(h, 0.0)];
    let amp = 0.5;
    let omega = amp * 4.0;
    let seg = DriveSegment {
        dt_ns: 1.0,
        tones: smallvec![Tone {
            qubit: 2,
            amplitude: amp,
            phase: 0.0,
            carrier_mhz: 16_150.0,
        }],
    };
    let n = 200;
    propagate_in_place(&mut st, &vec![seg; n], &reg, None).unwrap();
    let expected = 2.0 * PI * kappa * omega * omega * n as f64 * 1e-3;
    let a = st.amps[0];
    assert_relative_eq!((a[1] / a[0]).arg(), expected, epsilon = 1e-12);
    assert_relative_eq!(a[1].norm_sqr(), 0.5, epsilon = 1e-14);
}

#[test]
fn heating_follows_exponential_approach() {
    let m = HeatingModel {
        delta_f_max_khz: 200.0,
        tau_us: 60.0,
    };
    assert_relative_eq!(heating_detuning(60.0, &m), 126.424_111_765_711_54, max_relative = 1e-13);
    assert_eq!(heating_detuning(0.0, &m), 0.0);
    assert_relative_eq!(heating_detuning(1e6, &m), 200.0, max_relative = 1e-12);
}

#[test]
fn short_noise_trace_is_rejected() {
    let reg = register();
    let st = SpinState::new(&reg, &[1]).unwrap();
    let segs = vec![DriveSegment::idle(1.0); 5];
    let tr = DetuningTrace::zeros(1, 4);
    match propagate(&st, &segs, &reg, Some(&tr)) {
        Err(Error::TraceTooShort {
            needed: 5, available: 4, ..
        }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_qubit_and_bad_labels() {
    let reg = register();
    assert!(matches!(SpinState::new(&reg, &[3]), Err(Error::UnknownQubit(3))));
    let mut qs = reg.qubits.clone();
    qs.swap(0, 1);
    assert!(RegisterModel::new(qs, 10.0).is_err());
}

#[test]
fn frame_shift_is_virtual_z() {
    let reg = register();
    let mut st = SpinState::new(&reg, &[1]).unwrap();
    st.amps[0] = Su2::equatorial(0.0, PI / 2.0).apply(&DOWN);
    st.shift_frame(1, 0.4).unwrap();
    let logical = st.logical(1).unwrap();
    let expected = Su2::rz(-0.4).apply(&st.amps[0]);
    assert!(trace_distance(&logical, &expected) < 1e-14);
}

proptest! {
    #[test]
    fn steps_are_special_unitary(f in 0.0f64..10.0, p in -PI..PI, b in -5.0f64..5.0, dt in 0.01f64..200.0) {
        let u = step_unitary(f, p, b, dt);
        prop_assert!((u.det() - C64::new(1.0, 0.0)).norm() < 1e-12);
        let id = u.mul(&u.dagger());
        prop_assert!(id.approx_eq_phase(&Su2::IDENTITY, 1e-12));
    }

    #[test]
    fn trace_fidelity_is_phase_blind(theta in -PI..PI, phi in -PI..PI) {
        let u = Su2::equatorial(phi, theta);
        let minus = Su2 { a: -u.a, b: -u.b };
        prop_assert!((u.trace_fidelity(&minus) - 1.0).abs() < 1e-12);
        let v = Su2::rz(0.2).mul(&u);
        prop_assert!((u.trace_fidelity(&v) - (0.1f64).cos()).abs() < 1e-12);
    }
}
