//! Multicast secrecy-rate optimization for transmitters with movable
//! antennas and constant-modulus analog beamforming.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerical
//! pieces: far-field channel generation, the smoothed penalized objective and
//! its gradients, the complex-circle x Euclidean product manifold, the
//! penalty-constrained conjugate-gradient solver, the comparison schemes, and
//! brute-force reference oracles. File formats, the experiment harness and the
//! command line live in `masec-sim`.
//!
//! ```
//! use masec_core::{channel, optimizer, scenario::ScenarioConfig};
//!
//! let mut config = ScenarioConfig::paper_default();
//! config.num_antennas = 4;
//! config.num_lus = 2;
//! config.num_eves = 1;
//! let channels = channel::sample_channels(&config, 7).unwrap();
//! let out = optimizer::pcpm_solve(
//!     &config,
//!     &channels,
//!     &optimizer::PcpmSchedule::default(),
//!     &optimizer::LineSearchParams::default(),
//!     7,
//! )
//! .unwrap();
//! assert!(out.msr >= 0.0);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod channel;
pub mod error;
pub mod manifold;
pub mod objective;
pub mod optimizer;
pub mod oracles;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64;
