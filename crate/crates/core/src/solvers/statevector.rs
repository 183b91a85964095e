//! Dense statevector over the interleaved spin-orbital register and RDM
//! measurement by direct application of fermionic ladder strings.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::pauli::{qubit, PauliWord};
use super::{Rdm2, SpinRdm2};
use crate::error::{DmetError, Result};
use crate::tensor::idx4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Applies ladder operators to a basis state, rightmost first:
/// `ops = [(qubit, dagger)]` read as an operator product left to right.
pub fn apply_ladders(bits: u64, ops: &[(usize, bool)]) -> Option<(f64, u64)> {
    let mut b = bits;
    let mut sign = 1.0;
    for &(q, dagger) in ops.iter().rev() {
        let occupied = b & (1 << q) != 0;
        if occupied == dagger {
            return None;
        }
        if (b & ((1u64 << q) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b ^= 1 << q;
    }
    Some((sign, b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn basis(n_qubits: usize, bits: u64) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[bits as usize] = Complex64::new(1.0, 0.0);
        Statevector { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n_qubits {
            return Err(DmetError::Dimension(format!("statevector length {} is not a power of two", amps.len())));
        }
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `psi <- exp(i phi P) psi = cos(phi) psi + i sin(phi) P psi`.
    pub fn rotate(&mut self, word: &PauliWord, phi: f64) {
        let (c, s) = (phi.cos(), phi.sin());
        let is = Complex64::new(0.0, s);
        if word.x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                let (ph, _) = word.apply_to_basis(b as u64);
                *a *= c + is * ph;
            }
            return;
        }
        // pair each b with b ^ x once
        let top = 63 - word.x.leading_zeros();
        for b in 0..self.amps.len() as u64 {
            if b & (1 << top) != 0 {
                continue;
            }
            let (ph1, t) = word.apply_to_basis(b); // P|b> = ph1 |t>
            let (ph2, _) = word.apply_to_basis(t); // P|t> = ph2 |b>
            let (ab, at) = (self.amps[b as usize], self.amps[t as usize]);
            self.amps[b as usize] = c * ab + is * ph2 * at;
            self.amps[t as usize] = c * at + is * ph1 * ab;
        }
    }

    /// Applies `sum_k coeff_k P_k` and returns the new vector.
    pub fn apply_pauli_terms(&self, terms: &[(f64, PauliWord)]) -> Statevector {
        let mut out = vec![ZERO; self.amps.len()];
        for &(c, w) in terms {
            for (b, &a) in self.amps.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let (ph, t) = w.apply_to_basis(b as u64);
                out[t as usize] += ph * c * a;
            }
        }
        Statevector { n_qubits: self.n_qubits, amps: out }
    }

    /// Norm-preserving in exact arithmetic; drifts are bounded by rounding.
    pub fn renormalize(&mut self) {
        let n = self.norm();
        for a in &mut self.amps {
            *a /= n;
        }
    }

    /// `a+_i a_j psi` for spin orbitals on qubits `i`, `j`.
    pub fn excite(&self, i: usize, j: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            if let Some((sign, t)) = apply_ladders(b as u64, &[(i, true), (j, false)]) {
                out[t as usize] += sign * a;
            }
        }
        out
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Spin-resolved RDMs of a normalized state on `2 * n_spatial` qubits.
pub fn measure_spin_rdms(state: &Statevector, n_spatial: usize) -> Result<([DMatrix<f64>; 2], SpinRdm2)> {
    let n = n_spatial;
    if state.n_qubits != 2 * n {
        return Err(DmetError::Dimension(format!("{} qubits cannot hold {n} spatial orbitals", state.n_qubits)));
    }
    // d[s][p * n + q] = E^s_pq psi
    let d: Vec<Vec<Vec<Complex64>>> =
        (0..2).map(|s| (0..n * n).map(|pq| state.excite(qubit(pq / n, s), qubit(pq % n, s))).collect()).collect();
    let psi = state.amplitudes();
    let gamma = [0, 1].map(|s| {
        let m = DMatrix::from_fn(n, n, |p, q| cdot(psi, &d[s][p * n + q]).re);
        crate::linalg::symmetrize(&m)
    });
    let n4 = n * n * n * n;
    let (mut aa, mut ab, mut bb) = (vec![0.0; n4], vec![0.0; n4], vec![0.0; n4]);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let i = idx4(n, p, q, r, s);
                    let (qp, rs) = (q * n + p, r * n + s);
                    let delta = if q == r { 1.0 } else { 0.0 };
                    // <E_pq E_rs> = <E_qp psi | E_rs psi>
                    aa[i] = cdot(&d[0][qp], &d[0][rs]).re - delta * gamma[0][(p, s)];
                    bb[i] = cdot(&d[1][qp], &d[1][rs]).re - delta * gamma[1][(p, s)];
                    ab[i] = cdot(&d[0][qp], &d[1][rs]).re;
                }
            }
        }
    }
    Ok((gamma, SpinRdm2 { n, aa, ab, bb }))
}

/// `(rdm1_alpha, rdm1_beta, spin-summed rdm2)`.
pub fn measure_rdms(state: &Statevector, n_spatial: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, Rdm2)> {
    let ([ga, gb], spin) = measure_spin_rdms(state, n_spatial)?;
    Ok((ga, gb, spin.spin_summed()))
}
