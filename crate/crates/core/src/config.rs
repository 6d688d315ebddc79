//! TOML run configuration: register, noise, benchmarking defaults and
//! readout model.
//!
//! ```toml
//! [[qubit]]
//! label = 1
//! f_res_mhz = 16173.5
//! drive_efficiency = 4.0
//!
//! [[qubit]]
//! label = 2
//! f_res_mhz = 16323.5
//! drive_efficiency = 4.0
//!
//! [[stark]]
//! target = 1
//! driver = 2
//! kappa = 7.2e-3
//!
//! [noise]
//! chi = 1.0
//!
//! [rb]
//! gate_time_ns = 83
//! qubits = [1, 2]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{HeatingModel, QubitParams, RegisterModel, DEFAULT_MIN_DETUNING_MHZ};
use crate::error::{Error, Result};
use crate::experiments::RBConfig;
use crate::noise::NoiseModel;
use crate::readout::ReadoutModel;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    label: usize,
    f_res_mhz: Option<f64>,
    drive_efficiency: Option<f64>,
    #[serde(default = "default_t2_star")]
    t2_star_us: f64,
    #[serde(default = "default_t2_hahn")]
    t2_hahn_us: f64,
    #[serde(default = "default_linearity")]
    rabi_linearity_limit_mhz: f64,
    heating: Option<HeatingModel>,
}

fn default_t2_star() -> f64 {
    10.3
}

fn default_t2_hahn() -> f64 {
    60.0
}

fn default_linearity() -> f64 {
    8.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    target: usize,
    driver: usize,
    kappa: Option<f64>,
    eta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_min_detuning")]
    min_detuning_mhz: f64,
    #[serde(default)]
    qubit: Vec<RawQubit>,
    #[serde(default)]
    stark: Vec<RawCoupling>,
    #[serde(default)]
    noise: NoiseModel,
    #[serde(default)]
    rb: RBConfig,
    #[serde(default)]
    readout: ReadoutModel,
}

fn default_min_detuning() -> f64 {
    DEFAULT_MIN_DETUNING_MHZ
}

/// Validated object graph of one configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub register: RegisterModel,
    pub noise: NoiseModel,
    pub rb: RBConfig,
    pub readout: ReadoutModel,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Config> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            match line {
                Some(l) => Error::Config(format!("line {l}: {}", e.message())),
                None => Error::Config(e.message().to_string()),
            }
        })?;
        let mut raw_qubits = raw.qubit;
        raw_qubits.sort_by_key(|q| q.label);
        let mut qubits = Vec::with_capacity(raw_qubits.len());
        for q in &raw_qubits {
            let f_res_mhz = q
                .f_res_mhz
                .ok_or_else(|| Error::Config(format!("qubit {}: missing f_res_mhz", q.label)))?;
            let drive_efficiency = q
                .drive_efficiency
                .ok_or_else(|| Error::Config(format!("qubit {}: missing drive_efficiency", q.label)))?;
            qubits.push(QubitParams {
                label: q.label,
                f_res_mhz,
                drive_efficiency,
                t2_star_us: q.t2_star_us,
                t2_hahn_us: q.t2_hahn_us,
                rabi_linearity_limit_mhz: q.rabi_linearity_limit_mhz,
            });
        }
        let mut register = RegisterModel::new(qubits, raw.min_detuning_mhz)?;
        for q in &raw_qubits {
            if let Some(h) = q.heating {
                if !(h.delta_f_max_khz.is_finite() && h.tau_us > 0.0) {
                    return Err(Error::Config(format!(
                        "qubit {}: heating needs finite shift and tau_us > 0",
                        q.label
                    )));
                }
                register.set_heating(q.label, Some(h))?;
            }
        }
        for c in &raw.stark {
            if let Some(k) = c.kappa {
                register.set_kappa(c.target, c.driver, k)?;
            }
            if let Some(e) = c.eta {
                register.set_eta(c.target, c.driver, e)?;
            }
        }
        raw.noise.validate().map_err(|e| Error::Config(format!("noise: {e}")))?;
        raw.rb.validate().map_err(|e| Error::Config(format!("rb: {e}")))?;
        for &q in &raw.rb.qubits {
            register
                .index(q)
                .map_err(|_| Error::Config(format!("rb.qubits: unknown qubit {q}")))?;
        }
        raw.readout.validate().map_err(|e| Error::Config(format!("readout: {e}")))?;
        Ok(Config {
            register,
            noise: raw.noise,
            rb: raw.rb,
            readout: raw.readout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "
[[qubit]]
label = 1
f_res_mhz = 16000.0
drive_efficiency = 4.0

[[qubit]]
label = 2
f_res_mhz = 16150.0
drive_efficiency = 4.0

[rb]
qubits = [1]
";

    #[test]
    fn rb_qubits_must_exist() {
        let text = TWO.replace("qubits = [1]", "qubits = [3]");
        let e = Config::parse(&text).unwrap_err().to_string();
        assert!(e.contains("unknown qubit 3"), "{e}");
    }

    #[test]
    fn defaults_fill_in() {
        let c = Config::parse(TWO).unwrap();
        assert_eq!(c.noise.chi, 1.0);
        assert_eq!(c.register.n_qubits(), 2);
        assert!((c.register.kappa(1, 2).unwrap() - 1.0 / 300.0).abs() < 1e-15);
    }

    #[test]
    fn missing_efficiency_names_qubit() {
        let text = TWO.replace(
            "label = 2\nf_res_mhz = 16150.0\ndrive_efficiency = 4.0",
            "label = 2\nf_res_mhz = 16150.0",
        );
        let e = Config::parse(&text).unwrap_err().to_string();
        assert!(e.contains("qubit 2") && e.contains("drive_efficiency"), "{e}");
    }

    #[test]
    fn parse_error_has_line() {
        let e = Config::parse("[[qubit]]\nlabel = 1\nf_res_mhz = = 3\n").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
    }
}
