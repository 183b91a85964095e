//! UCCSD-VQE on a statevector: the embedding Hamiltonian is rotated into the
//! embedding UHF orbitals, mapped to qubits, and minimized by BFGS with
//! adjoint-mode gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::meanfield::embedding_reference;
use super::pauli::{map_spin_hamiltonian, PauliSum, DEFAULT_QUBIT_CAP};
use super::statevector::measure_spin_rdms;
use super::uccsd::UccsdAnsatz;
use super::{SolverDiagnostics, SolverResult, SpinHamiltonian};
use crate::embedding::EmbeddingProblem;
use crate::error::{DmetError, Result};
use crate::optimize::{bfgs, BfgsOptions, Termination};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqeInit {
    #[default]
    #[serde(alias = "ZERO")]
    Zero,
    /// Second-order perturbative amplitudes from the embedding reference.
    #[serde(alias = "AMPLITUDE_SEED")]
    AmplitudeSeed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    #[default]
    Adjoint,
    ParameterShift,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeOptions {
    pub trotter_steps: usize,
    pub init: VqeInit,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub gradient: GradientMethod,
    pub qubit_cap: usize,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions {
            trotter_steps: 1,
            init: VqeInit::Zero,
            grad_tol: 1e-7,
            max_iter: 5000,
            gradient: GradientMethod::Adjoint,
            qubit_cap: DEFAULT_QUBIT_CAP,
        }
    }
}

/// Ansatz plus qubit Hamiltonian in the reference orbital basis.
#[derive(Clone, Debug)]
pub struct VqeProblem {
    pub ansatz: UccsdAnsatz,
    pub hamiltonian: PauliSum,
}

impl VqeProblem {
    pub fn new(ham: &SpinHamiltonian, n_elec: [usize; 2], trotter_steps: usize, qubit_cap: usize) -> Result<Self> {
        let hamiltonian = map_spin_hamiltonian(ham, qubit_cap)?;
        let ansatz = UccsdAnsatz::new(ham.n, n_elec[0], n_elec[1], trotter_steps)?;
        Ok(VqeProblem { ansatz, hamiltonian })
    }

    pub fn energy(&self, theta: &[f64]) -> f64 {
        self.hamiltonian.expectation(self.ansatz.prepare(theta).amplitudes())
    }

    /// Energy and adjoint-mode gradient: one forward pass, one backward
    /// sweep carrying `phi = U_{<=g} psi0` and `lambda = U_{>g}^+ H psi`.
    pub fn energy_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut phi = self.ansatz.prepare(theta);
        let h_psi = self.hamiltonian.apply(phi.amplitudes());
        let energy: f64 = phi.amplitudes().iter().zip(&h_psi).map(|(p, h)| (p.conj() * h).re).sum();
        let mut lambda = super::Statevector::from_amplitudes(h_psi).expect("same register");
        let mut grad = vec![0.0; theta.len()];
        for (k, scale) in self.ansatz.gate_sequence().into_iter().rev() {
            let gen = &self.ansatz.generators[k];
            grad[k] += 2.0 * scale * lambda.inner(&gen.apply(&phi)).re;
            if theta[k] != 0.0 {
                gen.apply_exp(&mut phi, -scale * theta[k]);
                gen.apply_exp(&mut lambda, -scale * theta[k]);
            }
        }
        (energy, grad)
    }

    /// Two-point shift rule on every Pauli rotation of every gate.
    pub fn parameter_shift_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let quarter = std::f64::consts::FRAC_PI_4;
        let gates = self.ansatz.gate_sequence();
        let mut grad = vec![0.0; theta.len()];
        for (gi, &(k, scale)) in gates.iter().enumerate() {
            for (ti, &(a, _)) in self.ansatz.generators[k].terms.iter().enumerate() {
                let shifted = |shift: f64| {
                    let mut psi = self.ansatz.reference();
                    for (gj, &(kj, sj)) in gates.iter().enumerate() {
                        for (tj, &(aj, w)) in self.ansatz.generators[kj].terms.iter().enumerate() {
                            let extra = if gj == gi && tj == ti { shift } else { 0.0 };
                            psi.rotate(&w, sj * theta[kj] * aj + extra);
                        }
                    }
                    self.hamiltonian.expectation(psi.amplitudes())
                };
                grad[k] += scale * a * (shifted(quarter) - shifted(-quarter));
            }
        }
        grad
    }

    /// `theta_k = -<T_k ref|H|ref> / (sum eps_virt - sum eps_occ)`.
    pub fn amplitude_seed(&self, orbital_energies: &[Vec<f64>; 2]) -> Vec<f64> {
        let reference = self.ansatz.reference();
        let h_ref = self.hamiltonian.apply(reference.amplitudes());
        self.ansatz
            .excitations
            .iter()
            .enumerate()
            .map(|(k, ex)| {
                let Some((sign, bits)) = self.ansatz.excited_determinant(k) else { return 0.0 };
                let coupling = sign * h_ref[bits as usize].re;
                let denom = match *ex {
                    super::uccsd::Excitation::Single { spin, occ, virt } => orbital_energies[spin][virt] - orbital_energies[spin][occ],
                    super::uccsd::Excitation::Double { spins: (s, t), occ: (m, n), virt: (a, b) } => {
                        orbital_energies[s][a] + orbital_energies[t][b] - orbital_energies[s][m] - orbital_energies[t][n]
                    }
                };
                if denom.abs() < 1e-8 {
                    0.0
                } else {
                    -coupling / denom
                }
            })
            .collect()
    }
}

/// UCCSD-VQE embedding solve; RDMs are returned in the embedding basis.
pub fn solve_vqe_uccsd(ep: &EmbeddingProblem, opts: &VqeOptions) -> Result<SolverResult> {
    let n = ep.n_emb();
    if 2 * n > opts.qubit_cap {
        return Err(DmetError::QubitCap { required: 2 * n, cap: opts.qubit_cap });
    }
    let reference = embedding_reference(ep)?;
    if !reference.converged {
        log::warn!("embedding UHF reference not converged; VQE starts from the last iterate");
    }
    let c = reference.c.clone();
    let ham_mo = SpinHamiltonian::from_embedding(ep).rotate(&c);
    let problem = VqeProblem::new(&ham_mo, ep.n_elec, opts.trotter_steps, opts.qubit_cap)?;

    let theta0 = match opts.init {
        VqeInit::Zero => vec![0.0; problem.ansatz.n_params()],
        VqeInit::AmplitudeSeed => {
            let eps = [0, 1].map(|s| reference.orbital_energies[s].iter().copied().collect::<Vec<_>>());
            problem.amplitude_seed(&eps)
        }
    };
    let bfgs_opts = BfgsOptions { grad_tol: opts.grad_tol, max_iter: opts.max_iter, ..BfgsOptions::default() };
    let min = bfgs(
        |theta| match opts.gradient {
            GradientMethod::Adjoint => problem.energy_and_gradient(theta),
            GradientMethod::ParameterShift => (problem.energy(theta), problem.parameter_shift_gradient(theta)),
        },
        &theta0,
        &bfgs_opts,
    );
    let converged = min.termination.converged();
    let message = match min.termination {
        Termination::Gradient => None,
        Termination::Stalled => Some(format!("optimizer stagnated with gradient norm {:.3e}", min.grad_norm())),
        other => Some(format!("optimizer stopped ({other:?}) with gradient norm {:.3e}", min.grad_norm())),
    };
    if let Some(m) = &message {
        log::warn!("VQE: {m}");
    }

    let psi = problem.ansatz.prepare(&min.x);
    let energy = problem.hamiltonian.expectation(psi.amplitudes());
    let (g_mo, rdm2_mo) = measure_spin_rdms(&psi, n)?;
    let rdm1: [DMatrix<f64>; 2] = [0, 1].map(|s| crate::linalg::symmetrize(&(&c[s] * &g_mo[s] * c[s].transpose())));
    let rdm2 = rdm2_mo.back_transform(&c);
    let diagnostics = SolverDiagnostics {
        solver: "vqe".into(),
        iterations: min.iterations,
        gradient_norm: min.grad_norm(),
        converged,
        message,
    };
    Ok(SolverResult::assemble(ep, energy, rdm1, rdm2, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fci;
    use crate::hamiltonian::build_hubbard;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64) -> (VqeProblem, Vec<f64>) {
        let ham = build_hubbard(4, 1.0, 4.0, true, 2, 2).unwrap();
        let problem = VqeProblem::new(&fci::spin_hamiltonian(&ham), [2, 2], 1, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..problem.ansatz.n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (problem, theta)
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let (problem, theta) = random_problem(11);
        let (_, g) = problem.energy_and_gradient(&theta);
        let h = 1e-5;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (problem.energy(&tp) - problem.energy(&tm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn parameter_shift_matches_adjoint() {
        let ham = build_hubbard(2, 1.0, 3.0, false, 1, 1).unwrap();
        let problem = VqeProblem::new(&fci::spin_hamiltonian(&ham), [1, 1], 2, 24).unwrap();
        let theta = vec![0.2, -0.3, 0.4];
        let (_, g) = problem.energy_and_gradient(&theta);
        let ps = problem.parameter_shift_gradient(&theta);
        for (a, b) in g.iter().zip(&ps) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_at_zero_is_reference_expectation() {
        let (problem, _) = random_problem(0);
        let theta = vec![0.0; problem.ansatz.n_params()];
        let reference = problem.ansatz.reference();
        assert_eq!(problem.energy(&theta), problem.hamiltonian.expectation(reference.amplitudes()));
    }
}
