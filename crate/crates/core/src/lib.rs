//! Multi-fragment density matrix embedding over second-quantized
//! orbital-space Hamiltonians, with exact (FCI), statevector UCCSD-VQE and
//! mean-field fragment solvers.

pub mod analysis;
pub mod dmet;
pub mod embedding;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod meanfield;
pub mod optimize;
pub mod solvers;
pub mod tensor;

pub use dmet::{run_dmet, CorrelationPotential, DmetMode, DmetOptions, DmetState};
pub use embedding::{build_bath, build_embedding_hamiltonian, BathProjector, EmbeddingProblem};
pub use error::{DmetError, Result};
pub use hamiltonian::{build_hubbard, EquivalenceClass, Eri, Fragment, Hamiltonian, OrbitalLabel, Partition, SolverKind};
pub use meanfield::{unrestricted_hartree_fock, Guess, MeanFieldState};
pub use solvers::{fci, SolverOptions, SolverResult};
