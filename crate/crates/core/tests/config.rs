use std::path::Path;

use approx::assert_relative_eq;
use spinbench_core::config::Config;
use spinbench_core::Error;

const SHIPPED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/five_qubit.toml");

const MINIMAL: &str = "
[[qubit]]
label = 1
f_res_mhz = 16173.5
drive_efficiency = 4.0

[[qubit]]
label = 2
f_res_mhz = 16323.5
drive_efficiency = 4.0

[rb]
qubits = [1, 2]
";

#[test]
fn shipped_register_is_evenly_spaced() {
    let c = Config::load(Path::new(SHIPPED)).unwrap();
    assert_eq!(c.register.labels(), vec![1, 2, 3, 4, 5]);
    for w in c.register.qubits.windows(2) {
        assert_relative_eq!(w[1].f_res_mhz - w[0].f_res_mhz, 150.0, epsilon = 1e-9);
    }
    assert_relative_eq!(c.register.kappa(3, 4).unwrap(), 7.2425e-3, max_relative = 1e-12);
    assert_relative_eq!(c.register.kappa(4, 3).unwrap(), -4.9684e-4, max_relative = 1e-12);
    assert!(c.register.heating.iter().all(Option::is_none));
    assert_relative_eq!(c.register.eta[2][3], 0.0086, max_relative = 1e-12);
}

#[test]
fn default_kappa_uses_half_inverse_detuning() {
    let c = Config::parse(MINIMAL).unwrap();
    assert_relative_eq!(c.register.kappa(1, 2).unwrap(), 1.0 / 300.0, max_relative = 1e-15);
    assert_relative_eq!(c.register.kappa(2, 1).unwrap(), -1.0 / 300.0, max_relative = 1e-15);
}

fn config_error(text: &str) -> String {
    match Config::parse(text) {
        Err(Error::Config(m)) => m,
        Err(other) => other.to_string(),
        Ok(_) => panic!("accepted:\n{text}"),
    }
}

#[test]
fn malformed_configs_name_the_problem() {
    let e = config_error(&format!("{MINIMAL}\n[noise]\nchi = -1.0\n"));
    assert!(e.contains("chi"), "{e}");
    let e = config_error(&MINIMAL.replace("drive_efficiency = 4.0\n\n[[qubit]]", "drive_eficiency = 4.0\n\n[[qubit]]"));
    assert!(e.contains("drive_eficiency"), "{e}");
    let e = config_error(&MINIMAL.replace("label = 2", "label = 3"));
    assert!(!e.is_empty());
    let e = config_error(&format!("{MINIMAL}\n[[stark]]\ntarget = 1\ndriver = 7\nkappa = 1e-3\n"));
    assert!(!e.is_empty());
    let e = config_error(&format!("{MINIMAL}\n[readout]\nodd_to_even = 0.7\n"));
    assert!(e.contains("readout"), "{e}");
    let e = config_error(&MINIMAL.replace("qubits = [1, 2]", "qubits = [1, 2]\nlengths = [4, 2]"));
    assert!(e.contains("rb"), "{e}");
}

#[test]
fn missing_file_is_a_config_error() {
    let e = Config::load(Path::new("/nonexistent/spinbench.toml")).unwrap_err();
    assert!(
        matches!(e, Error::Config(ref m) if m.contains("/nonexistent/spinbench.toml")),
        "{e}"
    );
}

#[test]
fn stark_and_eta_overrides_apply() {
    let c = Config::parse(&format!("{MINIMAL}\n[[stark]]\ntarget = 1\ndriver = 2\nkappa = 2e-3\neta = 0.01\n")).unwrap();
    assert_eq!(c.register.kappa(1, 2).unwrap(), 2e-3);
    assert_relative_eq!(c.register.kappa(2, 1).unwrap(), -1.0 / 300.0, max_relative = 1e-15);
    assert_eq!(c.register.eta[0][1], 0.01);
    assert_eq!(c.register.eta[1][0], 0.0);
}
