//! Impedance estimation toolkit for electrochemical systems.
//!
//! Provides the full measurement-analysis chain for galvanostatic impedance
//! experiments driven by multisine excitation:
//!
//! - [`signals`]: multisine design (odd-random-phase variants), rendering,
//!   crest factor, Legendre basis functions.
//! - [`spectra`]: DFT/IDFT with 1/N normalization, Gaussian STFT windows,
//!   quadrature band filters and complex envelope extraction.
//! - [`cellsim`]: synthetic electrochemical cells (static nonlinearities,
//!   Butler-Volmer, LTI/LTV equivalent circuits) used as ground truth.
//! - [`detect`]: LTI/NLTI/LTV/NLTV classification from voltage spectra,
//!   noise-floor and SNR estimation.
//! - [`classical`]: impedance from periodic and random excitation, plus a
//!   fit-based Kramers-Kronig consistency check.
//! - [`nleis`]: leading-order nonlinear impedance coefficients and the best
//!   linear approximation with distortion levels.
//! - [`tvimp`]: time-varying impedance by STFT, dynamic multi-frequency
//!   analysis, and basis-function least squares with drift modelling.
//! - [`ecm`]: equivalent-circuit evaluation and hybrid swarm + local fitting.
//! - [`io`]: CSV/JSON exchange formats shared with the command-line tools.

pub mod cellsim;
pub mod classical;
pub mod detect;
pub mod ecm;
mod error;
pub mod io;
pub mod nleis;
pub mod signals;
pub mod spectra;
pub mod tvimp;

pub use error::{Error, Result};
