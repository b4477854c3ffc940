//! Passive WiFi Doppler sensing toolkit.
//!
//! The crate covers the whole chain on synthetic data: OFDM and beacon
//! waveform synthesis ([`waveform`]), bistatic scene simulation with moving
//! human scatterers ([`channel`]), cross-ambiguity Doppler extraction
//! ([`doppler`]), phase-based respiration estimation ([`respiration`]),
//! PCA + sparse-representation gesture recognition ([`recognition`]) and
//! long-horizon activity monitoring with HMM smoothing ([`monitor`]).
//!
//! File formats shared by the command line tool live in [`io`]; canned
//! end-to-end scenarios used by the `demo` subcommand live in [`scenario`].

pub mod channel;
pub mod cli;
pub mod doppler;
mod error;
pub mod io;
pub mod monitor;
pub mod recognition;
pub mod respiration;
pub mod scenario;
pub mod waveform;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
