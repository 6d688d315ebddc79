use approx::assert_relative_eq;
use proptest::prelude::*;
use spinbench_core::pulse::*;

// Reference values computed to 30 digits with an arbitrary-precision library.
const I0_8: f64 = 427.564_115_721_804_8;
const KAISER_INTEGRAL_83: f64 = 36.167_015_072_022_73;
const KAISER_PEAK_83: f64 = 2.294_908_767_967_564;
const SINC_SIDELOBE_DB: f64 = -13.261_458_884_048_286;
const SINC_SIDELOBE_X: f64 = 1.430_296_653_124_202_8;

/// Independent I0 from its integral form, (1/pi) int_0^pi exp(x cos t) dt.
fn i0_quadrature(x: f64) -> f64 {
    let n = 20_000;
    let h = std::f64::consts::PI / n as f64;
    let f = |t: f64| (x * t.cos()).exp();
    let mut s = f(0.0) + f(std::f64::consts::PI);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 / std::f64::consts::PI
}

#[test]
fn i0_matches_reference_and_quadrature() {
    assert_relative_eq!(bessel_i0(8.0), I0_8, max_relative = 1e-14);
    for x in [0.5, 2.0, 5.0, 8.0, 12.0] {
        assert_relative_eq!(bessel_i0(x), i0_quadrature(x), max_relative = 1e-12);
    }
}

#[test]
fn kaiser_window_integral_and_peak() {
    let env = make_kaiser(83.0, 8.0, 0.5).unwrap();
    // trapezoidal rule on 0.5 ns steps, within 1e-5 of the exact integral
    assert_relative_eq!(env.window_integral(), KAISER_INTEGRAL_83, max_relative = 1e-5);
    let scaled = normalize_area(&env, 1.0, 83.0).unwrap();
    assert_relative_eq!(scaled.peak(), KAISER_PEAK_83, max_relative = 1e-5);
    assert_relative_eq!(scaled.area(), 83.0, max_relative = 1e-12);
}

#[test]
fn kaiser_edges_and_centre() {
    let env = make_kaiser(83.0, 8.0, 0.5).unwrap();
    assert_relative_eq!(env.samples[0], 1.0 / I0_8, max_relative = 1e-12);
    assert_relative_eq!(*env.samples.last().unwrap(), 1.0 / I0_8, max_relative = 1e-12);
    assert_relative_eq!(env.value_at(41.5), 1.0, max_relative = 1e-15);
    assert_eq!(env.value_at(-1.0), 0.0);
}

#[test]
fn beta_zero_is_rectangular() {
    let k = make_kaiser(50.0, 0.0, 0.5).unwrap();
    let r = make_shape(Shape::Rectangular, 50.0, 0.0, 0.5).unwrap();
    for (a, b) in k.samples.iter().zip(&r.samples) {
        assert_relative_eq!(*a, *b, max_relative = 1e-15);
    }
}

#[test]
fn rectangular_first_sidelobe_is_sinc() {
    let env = make_shape(Shape::Rectangular, 83.0, 0.0, 0.05).unwrap();
    let s = spectrum(&env, 16473.5, 0.005).unwrap();
    let (f, db) = s.first_sidelobe().unwrap();
    let expected_f = SINC_SIDELOBE_X / (83.0 * 1e-3);
    assert!((f - expected_f).abs() < 0.02, "sidelobe at {f} MHz, expected {expected_f}");
    assert!((db - SINC_SIDELOBE_DB).abs() < 0.05, "sidelobe {db} dB");
}

#[test]
fn kaiser_sidelobes_below_minus_55_db() {
    let env = make_kaiser(83.0, 8.0, 0.5).unwrap();
    let s = spectrum(&env, 0.0, 0.01).unwrap();
    assert!(s.max_sidelobe_db() < -55.0, "{}", s.max_sidelobe_db());
}

#[test]
fn zero_envelope_spectrum_is_flagged() {
    let env = make_kaiser(83.0, 8.0, 0.5).unwrap().with_amplitude(0.0);
    let s = spectrum(&env, 0.0, 0.1).unwrap();
    assert!(s.degenerate);
    assert!(normalize_area(&env, 1.0, 83.0).is_err());
}

#[test]
fn area_reference_time_must_match() {
    let env = make_kaiser(83.0, 8.0, 0.5).unwrap();
    assert!(normalize_area(&env, 1.0, 100.0).is_err());
}

#[test]
fn shapes_parse() {
    assert_eq!(Shape::parse("Kaiser").unwrap(), Shape::Kaiser);
    assert_eq!(Shape::parse("rect").unwrap(), Shape::Rectangular);
    assert_eq!(Shape::parse("gaussian-square").unwrap(), Shape::GaussianSquare);
    assert!(Shape::parse("triangle").is_err());
}

proptest! {
    #[test]
    fn envelopes_are_symmetric_and_area_normalized(
        tg in 20.0f64..600.0,
        beta in 0.0f64..14.0,
        amp in 0.01f64..5.0,
    ) {
        let env = make_kaiser(tg, beta, 0.5).unwrap();
        let n = env.samples.len();
        for k in 0..n / 2 {
            prop_assert!((env.samples[k] - env.samples[n - 1 - k]).abs() < 1e-13);
        }
        let scaled = normalize_area(&env, amp, tg).unwrap();
        prop_assert!((scaled.area() - amp * tg).abs() < 1e-9 * amp * tg);
        prop_assert!(scaled.peak() >= amp * (1.0 - 1e-12));
    }

    #[test]
    fn every_shape_peaks_at_centre(tg in 40.0f64..400.0, idx in 0usize..5) {
        let shape = [Shape::Rectangular, Shape::Kaiser, Shape::Sech, Shape::Gaussian, Shape::GaussianSquare][idx];
        let env = make_shape(shape, tg, shape.default_param(), 0.5).unwrap();
        prop_assert!((env.value_at(tg / 2.0) - 1.0).abs() < 1e-12);
        prop_assert!(env.samples.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }
}
