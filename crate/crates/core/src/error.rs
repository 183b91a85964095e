use thiserror::Error;

use crate::hamiltonian::fcidump::FcidumpError;

pub type Result<T, E = DmetError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DmetError {
    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Fcidump(#[from] FcidumpError),

    /// Rounding the mean-field embedding occupancy would move too much charge.
    #[error(
        "fragment {orbitals:?}: embedding occupancy {occupancy:.4} ({spin}) is {residual:.3} away from an integer; \
         fit the chemical potential or choose a different fragmentation"
    )]
    ElectronRounding {
        orbitals: Vec<usize>,
        spin: &'static str,
        occupancy: f64,
        residual: f64,
    },

    #[error("qubit cap exceeded: {required} qubits requested, cap is {cap}")]
    QubitCap { required: usize, cap: usize },

    #[error("solver failure on fragment {fragment}: {message}")]
    Solver { fragment: usize, message: String },

    #[error("Davidson did not converge after {iterations} iterations (residual {residual:.3e})")]
    Davidson { iterations: usize, residual: f64 },

    #[error("chemical potential bracket not found in [{lo}, {hi}]: N-N_target = {f_lo:.3e} .. {f_hi:.3e}")]
    MuBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("unmapped orbital {0}")]
    UnmappedOrbital(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
