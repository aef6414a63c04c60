//! Link-level simulator for the uplink of a cyclic-prefix single-carrier
//! system with frequency-domain multi-user detection.
//!
//! A base station with `N_R` receive antennas serves `N_T` single-antenna
//! transmitters that share the same time/frequency resource. Each transmitter
//! sends length-`N` blocks of Gray-mapped QAM symbols protected by a cyclic
//! prefix, so the multipath channel decouples into `N` independent
//! subchannels, `Y_k = H_k S_k + N_k`. Detection happens per subchannel with
//! an `N_T x N_R` matrix `D_k`, optionally refined by iterative decision
//! feedback that cancels residual interference using the previous iteration's
//! hard decisions.
//!
//! The crate provides three linear detector families (matched filter, exact
//! MMSE, and an inversion-free simplified MMSE), the iterative
//! decision-feedback receiver built on top of them, a semi-analytical
//! performance engine (per-realization SINR mapped through closed-form QAM
//! bit-error formulas, averaged over a channel ensemble), an error-counting
//! Monte Carlo engine, and an experiment runner that sweeps operating points
//! and writes CSV curves.
//!
//! Module map:
//! - [`numerics`]: DFT/IDFT and small complex Hermitian matrix algebra.
//! - [`rng`]: deterministic substream derivation for reproducible parallelism.
//! - [`scenario`]: system parameters, QAM schemes, energy accounting.
//! - [`channel`]: Rayleigh multipath block-fading generation.
//! - [`modem`]: Gray QAM mapping, hard slicing, demapping.
//! - [`detectors`]: detection matrices, linear detection, decision feedback.
//! - [`analysis`]: SINR decomposition, BER formulas, bounds, semi-analytical
//!   curves, irreducible-BER floors.
//! - [`montecarlo`]: error-counting simulation.
//! - [`experiments`]: experiment specs, CSV/manifest output, bundled presets.

pub mod analysis;
pub mod channel;
pub mod detectors;
pub mod error;
pub mod experiments;
pub mod modem;
pub mod montecarlo;
pub mod numerics;
pub mod rng;
pub mod scenario;

mod par;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
