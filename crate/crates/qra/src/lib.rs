//! Numerical laboratory for a quantum reservoir autoencoder.
//!
//! The crate provides dense state-vector simulation of small qubit registers,
//! fixed random XYZ-Hamiltonian reservoirs with a linear Tikhonov readout, a
//! four-equation cross-key encode/decode protocol solved by an alternating
//! iteration, analytic measurement-noise models (shot sampling, depolarizing
//! damping, YOMO probability aggregation), four baseline feature extractors,
//! and the paired significance tests used to compare noise conditions.
//!
//! Layout:
//! - [`sim`]: gates, Pauli-sum Hamiltonians, time-evolution unitaries,
//!   expectation values, Born probabilities.
//! - [`reservoir`]: random reservoir construction and sequential feature
//!   extraction.
//! - [`readout`]: Tikhonov ridge solve, prediction, conditioning diagnostics.
//! - [`noise`]: shot sampling, depolarizing damping schedules, YOMO.
//! - [`protocol`]: keys, the encode function, the alternating solver, the
//!   spectral-radius probe.
//! - [`baselines`]: Henon, delay-embedding and TTN circuit extractors plus the
//!   SPSA-trained classical network.
//! - [`stats`]: Wilcoxon signed-rank and paired t tests.

// Link-only dependency: provides the system BLAS/LAPACK used by `linalg`.
use openblas_src as _;

pub mod baselines;
pub mod features;
pub mod linalg;
pub mod noise;
pub mod protocol;
pub mod readout;
pub mod reservoir;
pub mod sim;
pub mod stats;
pub mod streams;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
