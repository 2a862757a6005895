use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("matrix is not unitary: max |U\u{2020}U - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("{0} qubits exceeds the dense-simulation limit of 14")]
    DimensionOverflow(usize),

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("invalid Pauli string: {0}")]
    InvalidPauliString(String),

    #[error("invalid Hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("invalid noise config: {0}")]
    InvalidNoiseConfig(String),

    #[error("expectation value {0} lies outside [-1, 1]")]
    ExpectationOutOfRange(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("key too short: need at least {need} elements, got {got}")]
    KeyTooShort { need: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("value {0} outside the secret-data range (-0.5, 0.5)")]
    DataOutOfRange(f64),

    #[error("run has not converged; the spectral probe requires a converged ideal run")]
    NotConverged,

    #[error("spectral probe is undefined under stochastic noise")]
    ProbeUnderNoise,

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("SPSA aborted: non-finite loss at iteration {iter} (|theta| = {theta_norm:.3e})")]
    SpsaNonFiniteLoss { iter: usize, theta_norm: f64 },
}
