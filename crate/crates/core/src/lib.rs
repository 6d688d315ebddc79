//! Simulation, benchmarking and calibration of a small spin-qubit register
//! driven over one shared microwave line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod campaign;
pub mod clifford;
pub mod config;
pub mod device;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod manifest;
pub mod noise;
pub mod optimize;
pub mod pulse;
pub mod readout;
pub mod rng;

pub use error::{Error, Result};

// Every chapter of the guide compiles and runs as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pulses.md")]
    mod pulses {}
    #[doc = include_str!("../../../book/src/register.md")]
    mod register {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/clifford.md")]
    mod clifford {}
    #[doc = include_str!("../../../book/src/benchmarking.md")]
    mod benchmarking {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/readout.md")]
    mod readout {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
