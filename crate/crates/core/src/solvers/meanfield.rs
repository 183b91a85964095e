use nalgebra::DMatrix;

use super::{SolverDiagnostics, SolverResult, SpinHamiltonian, SpinRdm2};
use crate::embedding::EmbeddingProblem;
use crate::error::{DmetError, Result};
use crate::linalg;
use crate::meanfield::{run_scf, Guess, MeanFieldState, ScfOptions, ScfProblem};

/// Embedding-internal UHF on `(h_emb - mu, g_emb)`, started from the
/// projected supercell density purified to its leading natural orbitals.
pub fn embedding_reference(ep: &EmbeddingProblem) -> Result<MeanFieldState> {
    let n = ep.n_emb();
    let problem = ScfProblem { h: [ep.one_body(0), ep.one_body(1)], eri: &ep.g_emb, e_const: 0.0, n_occ: ep.n_elec, atom_map: (0..n).collect() };
    let [da, db] = [0, 1].map(|s| {
        let (_, v) = linalg::eigh(&(-&ep.mf_density[s]));
        linalg::occupied_density(&v, ep.n_elec[s])
    });
    let mut state = run_scf(&problem, &Guess::Density(da, db), None, &ScfOptions::default())?;
    if !state.converged {
        log::debug!("embedding UHF from projected density did not converge; retrying from the core guess");
        let retry = run_scf(&problem, &Guess::Core, None, &ScfOptions::default())?;
        if retry.converged || retry.e_total < state.e_total {
            state = retry;
        }
    }
    Ok(state)
}

/// Mean-field embedding solve with factorized two-particle RDM.
pub fn solve_meanfield(ep: &EmbeddingProblem) -> Result<SolverResult> {
    let mf = embedding_reference(ep)?;
    if !mf.converged {
        return Err(DmetError::Solver { fragment: 0, message: format!("embedding UHF not converged after {} cycles", mf.iterations) });
    }
    let rdm1: [DMatrix<f64>; 2] = mf.d.clone();
    let spin = SpinRdm2::from_determinant(&rdm1);
    let energy = SpinHamiltonian::from_embedding(ep).energy_from_rdms(&rdm1, &spin);
    let diagnostics = SolverDiagnostics {
        solver: "meanfield".into(),
        iterations: mf.iterations,
        gradient_norm: 0.0,
        converged: true,
        message: None,
    };
    Ok(SolverResult::assemble(ep, energy, rdm1, spin, diagnostics))
}
