//! Dual-polarization multi-soliton transmission over the nonlinear Fourier spectrum.
//!
//! The crate covers the full simulation chain for a soliton link in which the
//! information rides on the discrete nonlinear spectrum of the pulse:
//!
//! * [`signal`] — time grids, dual-polarization envelopes, unit conversion and
//!   scalar waveform metrics (energy, average power, PAPR).
//! * [`darboux`] — synthesis of an N-soliton envelope with a prescribed set of
//!   eigenvalues and spectral coefficients, by iterative Darboux dressing.
//! * [`channel`] — split-step Manakov propagation with ideal distributed Raman
//!   amplification, distributed ASE noise and periodic inline filtering.
//! * [`nft`] — forward NFT for the dual-polarization (3-component) scattering
//!   problem: eigenvalue search on `a(λ)` and forward-backward extraction of
//!   the spectral coefficients `b1`, `b2`.
//! * [`modem`] — QPSK mapping of per-eigenvalue common/differential phases
//!   onto `(b1, b2)` and the matching receiver-side estimators.
//! * [`experiment`] — Monte Carlo orchestration, statistics and CSV reporting.
//!
//! # Conventions
//!
//! Normalized units follow the focusing Manakov equation
//! `j q_z = q_tt + 2 (|q1|² + |q2|²) q`, under which a spectral coefficient at
//! eigenvalue `λ` evolves as `b_i(λ, z) = b_i(λ, 0) · exp(-4jλ²z)`. Physical
//! fields `A` (in √W on a ps grid) map to normalized `q = A/√P0` on `t = τ/T0`
//! with `P0 = |β2|/(γ T0²)`; one normalized distance unit is `2 L_D` km with
//! `L_D = T0²/|β2|`. See [`signal::NormalizationScales`].

pub mod channel;
pub mod darboux;
pub mod error;
pub mod experiment;
pub mod modem;
pub mod nft;
pub mod signal;
pub mod wavebin;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;
