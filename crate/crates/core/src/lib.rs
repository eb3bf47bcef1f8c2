//! Exact stroboscopic reset maps for quadratic open quantum systems.
//!
//! A quadratic Hamiltonian `H = sum a†_a M_ab a_b` keeps Gaussian states
//! Gaussian, so the dynamics closes on the single-particle density matrix
//! `rho_ab = <a†_a a_b>`. Periodically overwriting a subset of its entries
//! (the environment block, and optionally the system-environment coherences)
//! gives an exact affine map on the remaining entries.
//!
//! - [`linalg`]: Hermitian eigendecomposition and propagators `exp(-iMt)`.
//! - [`model`]: Hamiltonians with a system/environment split, the
//!   single-level + tight-binding-chain bath, bath spectra and occupations.
//! - [`dynamics`]: unitary steps, reset specifications, the affine map and a
//!   brute-force stroboscopic reference simulator.
//! - [`ri`]: repeated-interaction analysis: scalar recurrence, map-extracted
//!   decay rates, short-time Zeno laws, anti-Zeno windows and design maps.
//! - [`ec`]: evolving-correlation analysis: continuous-reset generator,
//!   single-level ODE and memory-kernel solvers, Markovian rate.
//! - [`selftest`]: built-in consistency checks.
//! - [`format`]: round-trip number formatting for CSV output.

pub mod dynamics;
pub mod ec;
pub mod error;
pub mod format;
pub mod linalg;
pub mod model;
pub mod ri;
pub mod selftest;
pub mod tolerance;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, HermitianEigen};
pub use model::{BathSpectrum, ChainParams, OccupationProfile, QuadraticHamiltonian, Statistics};
pub use num_complex::Complex64;
