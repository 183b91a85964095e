//! Pauli words and sums, and the Jordan-Wigner mapping of spin-resolved
//! fermionic Hamiltonians. Qubit `2p + s` holds spatial orbital `p` with
//! spin `s` (interleaved alpha/beta).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SpinHamiltonian;
use crate::embedding::EmbeddingProblem;
use crate::error::{DmetError, Result};
use crate::tensor::idx4;

pub const DEFAULT_QUBIT_CAP: usize = 24;
/// Imaginary remainders above this after merging indicate a non-hermitian input.
const IMAG_TOL: f64 = 1e-10;
const DROP_TOL: f64 = 1e-14;

#[inline]
pub fn qubit(p: usize, spin: usize) -> usize {
    2 * p + spin
}

/// `i^{|x & z|} X^x Z^z`: a bit set in both masks is a `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord {
    pub x: u64,
    pub z: u64,
}

const I_POW: [Complex64; 4] =
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];

impl PauliWord {
    pub const IDENTITY: PauliWord = PauliWord { x: 0, z: 0 };

    pub fn single(q: usize, letter: char) -> Self {
        let b = 1u64 << q;
        match letter {
            'X' => PauliWord { x: b, z: 0 },
            'Y' => PauliWord { x: b, z: b },
            'Z' => PauliWord { x: 0, z: b },
            _ => PauliWord::IDENTITY,
        }
    }

    fn n_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `self * other = phase * word`.
    pub fn mul(&self, other: &PauliWord) -> (Complex64, PauliWord) {
        let word = PauliWord { x: self.x ^ other.x, z: self.z ^ other.z };
        // (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^{|z1 & x2|} X^{x1^x2} Z^{z1^z2}
        let power = self.n_y() + other.n_y() + 2 * (self.z & other.x).count_ones() + 3 * word.n_y();
        (I_POW[(power % 4) as usize], word)
    }

    /// Letters for qubits `0..n`, qubit 0 first.
    pub fn label(&self, n: usize) -> String {
        (0..n)
            .map(|q| match ((self.x >> q) & 1, (self.z >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            })
            .collect()
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut w = PauliWord::IDENTITY;
        for (q, ch) in s.chars().enumerate() {
            if !"IXYZ".contains(ch) {
                return None;
            }
            let p = PauliWord::single(q, ch);
            w.x |= p.x;
            w.z |= p.z;
        }
        Some(w)
    }

    /// `P|b> = phase |b ^ x>`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (Complex64, u64) {
        let sign = if (self.z & b).count_ones().is_multiple_of(2) { 0 } else { 2 };
        (I_POW[((self.n_y() + sign) % 4) as usize], b ^ self.x)
    }
}

/// Complex-coefficient operator used while building mappings.
#[derive(Clone, Debug, Default)]
pub struct PauliOperator {
    terms: BTreeMap<PauliWord, Complex64>,
}

impl PauliOperator {
    pub fn identity(c: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(PauliWord::IDENTITY, Complex64::new(c, 0.0));
        PauliOperator { terms }
    }

    /// Jordan-Wigner image of `a_q^+` (`dagger`) or `a_q`.
    pub fn ladder(q: usize, dagger: bool) -> Self {
        let zs = (1u64 << q) - 1;
        let x = PauliWord { x: 1 << q, z: zs };
        let y = PauliWord { x: 1 << q, z: zs | (1 << q) };
        // a^+ = (X - iY)/2 Z_{<q},  a = (X + iY)/2 Z_{<q}
        let mut terms = BTreeMap::new();
        terms.insert(x, Complex64::new(0.5, 0.0));
        terms.insert(y, Complex64::new(0.0, if dagger { -0.5 } else { 0.5 }));
        PauliOperator { terms }
    }

    pub fn mul(&self, other: &PauliOperator) -> PauliOperator {
        let mut terms: BTreeMap<PauliWord, Complex64> = BTreeMap::new();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let (ph, w) = w1.mul(w2);
                *terms.entry(w).or_default() += c1 * c2 * ph;
            }
        }
        PauliOperator { terms }
    }

    pub fn add_scaled(&mut self, other: &PauliOperator, factor: Complex64) {
        for (w, c) in &other.terms {
            *self.terms.entry(*w).or_default() += c * factor;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliWord, &Complex64)> {
        self.terms.iter()
    }

    /// Product of ladder operators, `ops = [(qubit, dagger)]` left to right.
    pub fn product(ops: &[(usize, bool)]) -> Self {
        ops.iter().fold(PauliOperator::identity(1.0), |acc, &(q, d)| acc.mul(&PauliOperator::ladder(q, d)))
    }

    /// Real, merged, canonically ordered sum; errors on an imaginary remainder.
    pub fn into_real(self, n_qubits: usize) -> Result<PauliSum> {
        let mut terms = BTreeMap::new();
        for (w, c) in self.terms {
            if c.im.abs() > IMAG_TOL {
                return Err(DmetError::InvalidHamiltonian(format!(
                    "Pauli coefficient of {} has imaginary part {:.3e}",
                    w.label(n_qubits),
                    c.im
                )));
            }
            if c.re.abs() > DROP_TOL {
                terms.insert(w, c.re);
            }
        }
        Ok(PauliSum::from_terms(n_qubits, terms.into_iter().collect()))
    }
}

/// Real linear combination of Pauli words with a precompiled action.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliWord)>,
    /// Terms grouped by flip mask: `(x, [(z, coeff * i^{n_y})])`.
    groups: Vec<(u64, Vec<(u64, Complex64)>)>,
}

impl PauliSum {
    pub fn from_terms(n_qubits: usize, terms: Vec<(PauliWord, f64)>) -> Self {
        let mut merged: BTreeMap<PauliWord, f64> = BTreeMap::new();
        for (w, c) in terms {
            *merged.entry(w).or_default() += c;
        }
        let terms: Vec<(f64, PauliWord)> = merged.into_iter().filter(|(_, c)| c.abs() > DROP_TOL).map(|(w, c)| (c, w)).collect();
        let mut by_x: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for &(c, w) in &terms {
            by_x.entry(w.x).or_default().push((w.z, c * I_POW[(w.n_y() % 4) as usize]));
        }
        PauliSum { n_qubits, terms, groups: by_x.into_iter().collect() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliWord)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &PauliWord) -> f64 {
        self.terms.iter().find(|(_, w)| w == word).map_or(0.0, |(c, _)| *c)
    }

    /// `out = H psi`
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (x, zs) in &self.groups {
            for (b, &amp) in psi.iter().enumerate() {
                if amp.re == 0.0 && amp.im == 0.0 {
                    continue;
                }
                let b64 = b as u64;
                let mut acc = Complex64::new(0.0, 0.0);
                for &(z, c) in zs {
                    if (z & b64).count_ones().is_multiple_of(2) {
                        acc += c;
                    } else {
                        acc -= c;
                    }
                }
                out[(b64 ^ x) as usize] += acc * amp;
            }
        }
        out
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        self.apply(psi).iter().zip(psi).map(|(h, p)| (p.conj() * h).re).sum()
    }

    /// Dense `2^n x 2^n` matrix; for tests and small spectra.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for &(c, w) in &self.terms {
            for b in 0..dim as u64 {
                let (ph, t) = w.apply_to_basis(b);
                m[(t as usize, b as usize)] += ph * c;
            }
        }
        m
    }

    /// One `"coeff word"` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for &(c, w) in &self.terms {
            let _ = writeln!(s, "{c:?} {}", w.label(self.n_qubits));
        }
        s
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Jordan-Wigner image of a spin-resolved Hamiltonian, `e_const` in the
/// identity term.
pub fn map_spin_hamiltonian(ham: &SpinHamiltonian, qubit_cap: usize) -> Result<PauliSum> {
    let n = ham.n;
    let n_q = 2 * n;
    if n_q > qubit_cap || n_q > 63 {
        return Err(DmetError::QubitCap { required: n_q, cap: qubit_cap.min(63) });
    }
    let mut op = PauliOperator::identity(ham.e_const);
    for s in 0..2 {
        for p in 0..n {
            for q in 0..n {
                let v = ham.h[s][(p, q)];
                if v != 0.0 {
                    op.add_scaled(&PauliOperator::product(&[(qubit(p, s), true), (qubit(q, s), false)]), Complex64::new(v, 0.0));
                }
            }
        }
    }
    // 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s t} a_{q s}
    for (s, t, g) in [(0, 0, &ham.g_aa), (1, 1, &ham.g_bb), (0, 1, &ham.g_ab), (1, 0, &ham.g_ab)] {
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for u in 0..n {
                        let v = if (s, t) == (1, 0) { g[idx4(n, r, u, p, q)] } else { g[idx4(n, p, q, r, u)] };
                        if v == 0.0 || (s == t && (p == r || q == u)) {
                            continue;
                        }
                        let ops = [(qubit(p, s), true), (qubit(r, t), true), (qubit(u, t), false), (qubit(q, s), false)];
                        op.add_scaled(&PauliOperator::product(&ops), Complex64::new(0.5 * v, 0.0));
                    }
                }
            }
        }
    }
    op.into_real(n_q)
}

/// Jordan-Wigner image of an embedding Hamiltonian including the `-mu`
/// fragment number term; `include_const` adds `e_const_emb` to the identity.
pub fn jordan_wigner_with(ep: &EmbeddingProblem, qubit_cap: usize, include_const: bool) -> Result<PauliSum> {
    let mut sh = SpinHamiltonian::from_embedding(ep);
    if include_const {
        sh.e_const = ep.e_const_emb;
    }
    map_spin_hamiltonian(&sh, qubit_cap)
}

pub fn jordan_wigner(ep: &EmbeddingProblem) -> Result<PauliSum> {
    jordan_wigner_with(ep, DEFAULT_QUBIT_CAP, false)
}

/// Basis states with the given per-spin electron counts.
pub fn sector_states(n_spatial: usize, n_alpha: usize, n_beta: usize) -> Vec<usize> {
    let even: u64 = (0..n_spatial).map(|p| 1u64 << (2 * p)).sum();
    (0..1usize << (2 * n_spatial))
        .filter(|&b| {
            let b = b as u64;
            (b & even).count_ones() as usize == n_alpha && (b & (even << 1)).count_ones() as usize == n_beta
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fci;
    use crate::hamiltonian::build_hubbard;
    use crate::linalg;

    fn spin_ham_1body(h: DMatrix<f64>) -> SpinHamiltonian {
        let n = h.nrows();
        let z = vec![0.0; n * n * n * n];
        SpinHamiltonian { n, h: [h.clone(), h], g_aa: z.clone(), g_ab: z.clone(), g_bb: z, e_const: 0.0 }
    }

    #[test]
    fn word_products_follow_pauli_algebra() {
        let x = PauliWord::single(0, 'X');
        let y = PauliWord::single(0, 'Y');
        let z = PauliWord::single(0, 'Z');
        let (ph, w) = x.mul(&y);
        assert_eq!(w, z);
        assert_eq!(ph, Complex64::new(0.0, 1.0));
        let (ph, w) = y.mul(&x);
        assert_eq!(w, z);
        assert_eq!(ph, Complex64::new(0.0, -1.0));
        let (ph, w) = y.mul(&y);
        assert_eq!(w, PauliWord::IDENTITY);
        assert_eq!(ph, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn number_operator_maps_to_identity_minus_z() {
        let mut a = PauliOperator::product(&[(0, true), (0, false)]);
        a.add_scaled(&PauliOperator::identity(0.0), Complex64::new(1.0, 0.0));
        let s = a.into_real(1).unwrap();
        assert_eq!(s.coefficient(&PauliWord::IDENTITY), 0.5);
        assert_eq!(s.coefficient(&PauliWord::single(0, 'Z')), -0.5);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn interleaved_hopping_has_z_string() {
        // orbitals 0 and 1 of alpha spin sit on qubits 0 and 2
        let t = 1.3;
        let h = DMatrix::from_row_slice(2, 2, &[0.0, -t, -t, 0.0]);
        let mut sh = spin_ham_1body(h);
        sh.h[1] = DMatrix::zeros(2, 2);
        let s = map_spin_hamiltonian(&sh, 24).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.coefficient(&PauliWord::parse("XZXI").unwrap()) + t / 2.0).abs() < 1e-15);
        assert!((s.coefficient(&PauliWord::parse("YZYI").unwrap()) + t / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_operators_anticommute() {
        for (p, q) in [(0, 1), (1, 3), (2, 2)] {
            let mut acomm = PauliOperator::product(&[(p, false), (q, true)]);
            acomm.add_scaled(&PauliOperator::product(&[(q, true), (p, false)]), Complex64::new(1.0, 0.0));
            let s = acomm.into_real(4).unwrap();
            let expected = if p == q { 1.0 } else { 0.0 };
            assert!((s.coefficient(&PauliWord::IDENTITY) - expected).abs() < 1e-15);
            assert!(s.len() <= 1);
        }
    }

    #[test]
    fn hubbard_dimer_sector_ground_state() {
        let ham = build_hubbard(2, 1.0, 4.0, false, 1, 1).unwrap();
        let s = map_spin_hamiltonian(&fci::spin_hamiltonian(&ham), 24).unwrap();
        let dense = s.to_dense();
        let states = sector_states(2, 1, 1);
        let block = DMatrix::from_fn(states.len(), states.len(), |i, j| dense[(states[i], states[j])].re);
        let (w, _) = linalg::eigh(&block);
        assert!((w[0] - (2.0 - 8.0_f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn apply_matches_dense() {
        let ham = build_hubbard(3, 1.0, 2.0, true, 2, 1).unwrap();
        let s = map_spin_hamiltonian(&fci::spin_hamiltonian(&ham), 24).unwrap();
        let dense = s.to_dense();
        let psi: Vec<Complex64> = (0..64).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let out = s.apply(&psi);
        for r in 0..64 {
            let expect: Complex64 = (0..64).map(|c| dense[(r, c)] * psi[c]).sum();
            assert!((expect - out[r]).norm() < 1e-12);
        }
        // hermitian
        assert!((0..64).all(|i| (0..64).all(|j| (dense[(i, j)] - dense[(j, i)].conj()).norm() < 1e-12)));
    }

    #[test]
    fn qubit_cap_enforced() {
        let ham = build_hubbard(13, 1.0, 2.0, true, 6, 6).unwrap();
        let err = map_spin_hamiltonian(&fci::spin_hamiltonian(&ham), DEFAULT_QUBIT_CAP).unwrap_err();
        assert!(matches!(err, DmetError::QubitCap { required: 26, cap: 24 }));
    }

    #[test]
    fn text_dump_round_trips_words() {
        let s = PauliSum::from_terms(4, vec![(PauliWord::parse("XZYI").unwrap(), 0.25)]);
        assert_eq!(s.to_text(), "0.25 XZYI\n");
    }
}
