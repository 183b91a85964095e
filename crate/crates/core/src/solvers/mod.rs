//! Embedding-problem ground-state solvers: determinant-space FCI,
//! statevector UCCSD-VQE over a Jordan-Wigner mapped Hamiltonian, and a
//! mean-field fallback. All return energies with one- and two-particle RDMs.

pub mod fci;
mod meanfield;
pub mod pauli;
pub mod statevector;
pub mod uccsd;
pub mod vqe;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingProblem;
use crate::error::Result;
use crate::hamiltonian::SolverKind;
use crate::tensor::{self, idx4};

pub use fci::solve_fci;
pub use meanfield::{embedding_reference, solve_meanfield};
pub use pauli::{jordan_wigner, PauliSum};
pub use statevector::{measure_rdms, Statevector};
pub use uccsd::UccsdAnsatz;
pub use vqe::{solve_vqe_uccsd, VqeInit, VqeOptions};

/// Spin-resolved quartic Hamiltonian in a per-spin orthonormal basis.
///
/// `g_ab[p,q,r,s] = (p_a q_a | r_b s_b)`; chemist ordering, dense row-major.
#[derive(Clone, Debug)]
pub struct SpinHamiltonian {
    pub n: usize,
    pub h: [DMatrix<f64>; 2],
    pub g_aa: Vec<f64>,
    pub g_ab: Vec<f64>,
    pub g_bb: Vec<f64>,
    pub e_const: f64,
}

impl SpinHamiltonian {
    /// Embedding Hamiltonian as seen by the solvers: `-mu` on the fragment
    /// diagonal, no constant.
    pub fn from_embedding(ep: &EmbeddingProblem) -> Self {
        let g = ep.g_emb.to_dense();
        SpinHamiltonian { n: ep.n_emb(), h: [ep.one_body(0), ep.one_body(1)], g_aa: g.clone(), g_ab: g.clone(), g_bb: g, e_const: 0.0 }
    }

    /// Re-expresses the Hamiltonian in the orbitals given by the columns of
    /// `c[spin]`.
    pub fn rotate(&self, c: &[DMatrix<f64>; 2]) -> Self {
        let [ca, cb] = [&c[0], &c[1]];
        SpinHamiltonian {
            n: self.n,
            h: [ca.transpose() * &self.h[0] * ca, cb.transpose() * &self.h[1] * cb],
            g_aa: tensor::transform4(&self.g_aa, self.n, [ca, ca, ca, ca]),
            g_ab: tensor::transform4(&self.g_ab, self.n, [ca, ca, cb, cb]),
            g_bb: tensor::transform4(&self.g_bb, self.n, [cb, cb, cb, cb]),
            e_const: self.e_const,
        }
    }

    /// Energy of the state described by the given RDMs.
    pub fn energy_from_rdms(&self, rdm1: &[DMatrix<f64>; 2], rdm2: &SpinRdm2) -> f64 {
        let e1 = self.h[0].dot(&rdm1[0]) + self.h[1].dot(&rdm1[1]);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let e2 = 0.5 * dot(&self.g_aa, &rdm2.aa) + 0.5 * dot(&self.g_bb, &rdm2.bb) + dot(&self.g_ab, &rdm2.ab);
        self.e_const + e1 + e2
    }
}

/// Spin-summed two-particle RDM in chemist ordering,
/// `G[i,j,k,l] = sum_{s,t} <a+_{is} a+_{kt} a_{lt} a_{js}>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rdm2 {
    n: usize,
    data: Vec<f64>,
}

impl Rdm2 {
    pub fn zeros(n: usize) -> Self {
        Rdm2 { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn from_dense(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n * n * n);
        Rdm2 { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[idx4(self.n, i, j, k, l)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `sum_k G[i,j,k,k]`
    pub fn partial_trace(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| (0..self.n).map(|k| self.get(i, j, k, k)).sum())
    }
}

/// Spin blocks of the two-particle RDM, chemist ordering:
/// `aa[p,q,r,s] = <a+_pa a+_ra a_sa a_qa>`, `ab[p,q,r,s] = <a+_pa a+_rb a_sb a_qa>`.
#[derive(Clone, Debug)]
pub struct SpinRdm2 {
    pub n: usize,
    pub aa: Vec<f64>,
    pub ab: Vec<f64>,
    pub bb: Vec<f64>,
}

impl SpinRdm2 {
    pub fn spin_summed(&self) -> Rdm2 {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let i = idx4(n, p, q, r, s);
                        out[i] = self.aa[i] + self.bb[i] + self.ab[i] + self.ab[idx4(n, r, s, p, q)];
                    }
                }
            }
        }
        Rdm2 { n, data: out }
    }

    /// Back-transforms from the orbitals `c[spin]` (columns) to the parent
    /// basis.
    pub fn back_transform(&self, c: &[DMatrix<f64>; 2]) -> Self {
        let (ta, tb) = (c[0].transpose(), c[1].transpose());
        SpinRdm2 {
            n: self.n,
            aa: tensor::transform4(&self.aa, self.n, [&ta, &ta, &ta, &ta]),
            ab: tensor::transform4(&self.ab, self.n, [&ta, &ta, &tb, &tb]),
            bb: tensor::transform4(&self.bb, self.n, [&tb, &tb, &tb, &tb]),
        }
    }

    /// Mean-field factorization of a determinant's two-particle RDM.
    pub fn from_determinant(rdm1: &[DMatrix<f64>; 2]) -> Self {
        let n = rdm1[0].nrows();
        let mut aa = vec![0.0; n * n * n * n];
        let mut bb = vec![0.0; n * n * n * n];
        let mut ab = vec![0.0; n * n * n * n];
        let (ga, gb) = (&rdm1[0], &rdm1[1]);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let i = idx4(n, p, q, r, s);
                        aa[i] = ga[(p, q)] * ga[(r, s)] - ga[(p, s)] * ga[(r, q)];
                        bb[i] = gb[(p, q)] * gb[(r, s)] - gb[(p, s)] * gb[(r, q)];
                        ab[i] = ga[(p, q)] * gb[(r, s)];
                    }
                }
            }
        }
        SpinRdm2 { n, aa, ab, bb }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub solver: String,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub message: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    /// `<H_emb>` including the `-mu N_frag` term, excluding `e_const_emb`.
    pub energy: f64,
    /// The `-mu N_frag` part of `energy`.
    pub mu_contribution: f64,
    pub rdm1: [DMatrix<f64>; 2],
    pub rdm2: Rdm2,
    pub spin_rdm2: SpinRdm2,
    pub diagnostics: SolverDiagnostics,
}

/// Deviations checked by the conservation suite.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ConservationReport {
    pub trace_error: f64,
    pub partial_trace_error: f64,
    pub energy_error: f64,
    pub symmetry_error: f64,
}

impl ConservationReport {
    pub fn max(&self) -> f64 {
        self.trace_error.max(self.partial_trace_error).max(self.energy_error).max(self.symmetry_error)
    }
}

impl SolverResult {
    pub(crate) fn assemble(
        ep: &EmbeddingProblem,
        energy: f64,
        rdm1: [DMatrix<f64>; 2],
        spin_rdm2: SpinRdm2,
        diagnostics: SolverDiagnostics,
    ) -> Self {
        let mu_contribution = -ep.mu * (0..ep.n_frag).map(|i| rdm1[0][(i, i)] + rdm1[1][(i, i)]).sum::<f64>();
        SolverResult { energy, mu_contribution, rdm1, rdm2: spin_rdm2.spin_summed(), spin_rdm2, diagnostics }
    }

    pub fn rdm1_total(&self) -> DMatrix<f64> {
        &self.rdm1[0] + &self.rdm1[1]
    }

    /// Electrons on the fragment orbitals of the embedding.
    pub fn fragment_electrons(&self, n_frag: usize) -> f64 {
        (0..n_frag).map(|i| self.rdm1[0][(i, i)] + self.rdm1[1][(i, i)]).sum()
    }

    /// RDM trace, partial trace, symmetry and energy-reassembly checks.
    pub fn conservation(&self, ep: &EmbeddingProblem) -> ConservationReport {
        let n_tot = ep.n_elec_total() as f64;
        let trace_error = (0..2).map(|s| (self.rdm1[s].trace() - ep.n_elec[s] as f64).abs()).fold(0.0, f64::max);
        let expected = (n_tot - 1.0) * self.rdm1_total();
        let partial_trace_error = crate::linalg::max_abs(&(self.rdm2.partial_trace() - expected));
        let symmetry_error = self.rdm1.iter().map(crate::linalg::asymmetry).fold(0.0, f64::max);
        let energy_error = (SpinHamiltonian::from_embedding(ep).energy_from_rdms(&self.rdm1, &self.spin_rdm2) - self.energy).abs();
        ConservationReport { trace_error, partial_trace_error, energy_error, symmetry_error }
    }
}

/// Options shared by all embedding solves.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub vqe: VqeOptions,
}

/// Dispatch on the solver tag.
pub fn solve(ep: &EmbeddingProblem, kind: SolverKind, opts: &SolverOptions) -> Result<SolverResult> {
    match kind {
        SolverKind::Fci => solve_fci(ep),
        SolverKind::Vqe => solve_vqe_uccsd(ep, &opts.vqe),
        SolverKind::Meanfield => solve_meanfield(ep),
    }
}
