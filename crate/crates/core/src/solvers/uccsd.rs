//! Unrestricted UCCSD ansatz as a product of exactly applied excitation
//! exponentials `exp(theta_k (T_k - T_k^+))`.

use num_complex::Complex64;

use super::pauli::{qubit, PauliOperator, PauliWord};
use super::statevector::{apply_ladders, Statevector};
use crate::error::{DmetError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Excitation {
    /// `a+_{virt,s} a_{occ,s}`
    Single { spin: usize, occ: usize, virt: usize },
    /// `a+_{a,s} a+_{b,t} a_{n,t} a_{m,s}`
    Double { spins: (usize, usize), occ: (usize, usize), virt: (usize, usize) },
}

impl Excitation {
    /// Ladder string of `T_k`, left to right.
    pub fn ladders(&self) -> Vec<(usize, bool)> {
        match *self {
            Excitation::Single { spin, occ, virt } => vec![(qubit(virt, spin), true), (qubit(occ, spin), false)],
            Excitation::Double { spins: (s, t), occ: (m, n), virt: (a, b) } => {
                vec![(qubit(a, s), true), (qubit(b, t), true), (qubit(n, t), false), (qubit(m, s), false)]
            }
        }
    }
}

/// `T - T^+ = i sum_k a_k P_k` with mutually commuting `P_k`.
#[derive(Clone, Debug)]
pub struct Generator {
    pub terms: Vec<(f64, PauliWord)>,
}

impl Generator {
    fn from_excitation(ex: &Excitation) -> Result<Self> {
        let t = PauliOperator::product(&ex.ladders());
        let dag: Vec<(usize, bool)> = ex.ladders().iter().rev().map(|&(q, d)| (q, !d)).collect();
        let mut g = t;
        g.add_scaled(&PauliOperator::product(&dag), Complex64::new(-1.0, 0.0));
        let mut terms = Vec::new();
        for (w, c) in g.terms() {
            if c.norm() < 1e-14 {
                continue;
            }
            if c.re.abs() > 1e-12 {
                return Err(DmetError::InvalidHamiltonian(format!("excitation generator {ex:?} is not anti-hermitian")));
            }
            terms.push((c.im, *w));
        }
        terms.sort_by_key(|a| a.1);
        Ok(Generator { terms })
    }

    /// `psi <- exp(theta G) psi`, exact because the terms commute.
    pub fn apply_exp(&self, psi: &mut Statevector, theta: f64) {
        for &(a, w) in &self.terms {
            psi.rotate(&w, theta * a);
        }
    }

    /// `G psi`
    pub fn apply(&self, psi: &Statevector) -> Statevector {
        let mut out = psi.apply_pauli_terms(&self.terms);
        let i = Complex64::new(0.0, 1.0);
        let amps: Vec<Complex64> = out.amplitudes().iter().map(|a| a * i).collect();
        out = Statevector::from_amplitudes(amps).expect("same length");
        out
    }
}

#[derive(Clone, Debug)]
pub struct UccsdAnsatz {
    pub n_spatial: usize,
    pub occ: [Vec<usize>; 2],
    pub virt: [Vec<usize>; 2],
    pub excitations: Vec<Excitation>,
    pub generators: Vec<Generator>,
    pub trotter_steps: usize,
}

fn pairs(v: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            out.push((v[i], v[j]));
        }
    }
    out
}

impl UccsdAnsatz {
    /// Reference occupying orbitals `0..n_alpha` / `0..n_beta` of each spin.
    pub fn new(n_spatial: usize, n_alpha: usize, n_beta: usize, trotter_steps: usize) -> Result<Self> {
        if n_alpha > n_spatial || n_beta > n_spatial {
            return Err(DmetError::Dimension(format!("({n_alpha}, {n_beta}) electrons in {n_spatial} orbitals")));
        }
        if trotter_steps == 0 {
            return Err(DmetError::Dimension("trotter_steps must be at least 1".into()));
        }
        let occ = [(0..n_alpha).collect::<Vec<_>>(), (0..n_beta).collect()];
        let virt = [(n_alpha..n_spatial).collect::<Vec<_>>(), (n_beta..n_spatial).collect()];
        let mut ex = Vec::new();
        for s in 0..2 {
            for &m in &occ[s] {
                for &a in &virt[s] {
                    ex.push(Excitation::Single { spin: s, occ: m, virt: a });
                }
            }
        }
        for s in 0..2 {
            for o in pairs(&occ[s]) {
                for v in pairs(&virt[s]) {
                    ex.push(Excitation::Double { spins: (s, s), occ: o, virt: v });
                }
            }
        }
        for &m in &occ[0] {
            for &n in &occ[1] {
                for &a in &virt[0] {
                    for &b in &virt[1] {
                        ex.push(Excitation::Double { spins: (0, 1), occ: (m, n), virt: (a, b) });
                    }
                }
            }
        }
        let generators = ex.iter().map(Generator::from_excitation).collect::<Result<Vec<_>>>()?;
        Ok(UccsdAnsatz { n_spatial, occ, virt, excitations: ex, generators, trotter_steps })
    }

    pub fn n_params(&self) -> usize {
        self.excitations.len()
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn reference_bits(&self) -> u64 {
        let mut b = 0;
        for s in 0..2 {
            for &p in &self.occ[s] {
                b |= 1 << qubit(p, s);
            }
        }
        b
    }

    pub fn reference(&self) -> Statevector {
        Statevector::basis(self.n_qubits(), self.reference_bits())
    }

    /// Gate sequence `(parameter, scale)`; the first entry acts first.
    pub fn gate_sequence(&self) -> Vec<(usize, f64)> {
        let scale = 1.0 / self.trotter_steps as f64;
        (0..self.trotter_steps).flat_map(|_| (0..self.n_params()).map(move |k| (k, scale))).collect()
    }

    pub fn prepare(&self, theta: &[f64]) -> Statevector {
        assert_eq!(theta.len(), self.n_params());
        let mut psi = self.reference();
        for (k, scale) in self.gate_sequence() {
            if theta[k] != 0.0 {
                self.generators[k].apply_exp(&mut psi, scale * theta[k]);
            }
        }
        psi
    }

    /// `(sign, bits)` with `T_k |reference> = sign |bits>`.
    pub fn excited_determinant(&self, k: usize) -> Option<(f64, u64)> {
        apply_ladders(self.reference_bits(), &self.excitations[k].ladders())
    }
}

/// `|o_a||v_a| + |o_b||v_b| + C(o_a,2)C(v_a,2) + C(o_b,2)C(v_b,2) + o_a v_a o_b v_b`
pub fn uccsd_parameter_count(occ: [usize; 2], virt: [usize; 2]) -> usize {
    let c2 = |n: usize| n * n.saturating_sub(1) / 2;
    occ[0] * virt[0] + occ[1] * virt[1] + c2(occ[0]) * c2(virt[0]) + c2(occ[1]) * c2(virt[1]) + occ[0] * virt[0] * occ[1] * virt[1]
}
