//! Orbital-space Hamiltonians: constant + one-body matrix + two-electron
//! integrals in chemist notation `(ij|kl)` over orthonormal local orbitals.

pub mod fcidump;
mod hubbard;
mod partition;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DmetError, Result};
use crate::linalg;

pub use hubbard::build_hubbard;
pub use partition::{EquivalenceClass, Fragment, Partition, SolverKind};

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

/// Two-electron integrals `(ij|kl)` stored once per 8-fold symmetry orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct Eri {
    n: usize,
    data: Vec<f64>,
}

impl Eri {
    pub fn zeros(n: usize) -> Self {
        let npair = n * (n + 1) / 2;
        Eri { n, data: vec![0.0; npair * (npair + 1) / 2] }
    }

    /// Packs a dense `n^4` tensor (row-major `[i][j][k][l]`), averaging over
    /// each symmetry orbit.
    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n * n * n * n, "dense tensor has wrong length");
        let mut eri = Eri::zeros(n);
        let mut counts = vec![0u32; eri.data.len()];
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let p = eri.index(i, j, k, l);
                        eri.data[p] += dense[idx(i, j, k, l)];
                        counts[p] += 1;
                    }
                }
            }
        }
        for (v, c) in eri.data.iter_mut().zip(counts) {
            *v /= c as f64;
        }
        eri
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        pair_index(pair_index(i, j), pair_index(k, l))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.index(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        let p = self.index(i, j, k, l);
        self.data[p] = value;
    }

    /// Row-major `[i][j][k][l]` expansion.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[((i * n + j) * n + k) * n + l] = self.get(i, j, k, l);
                    }
                }
            }
        }
        out
    }

    /// Symmetry-unique entries `(i, j, k, l, value)` with `i >= j`, `k >= l`,
    /// `ij >= kl`.
    pub fn unique_entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| {
            (0..=i).flat_map(move |j| {
                let ij = pair_index(i, j);
                (0..n).flat_map(move |k| {
                    (0..=k).filter_map(move |l| {
                        let kl = pair_index(k, l);
                        (kl <= ij).then(|| (i, j, k, l, self.get(i, j, k, l)))
                    })
                })
            })
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
    }

    /// Coulomb contraction `J[D]_ij = sum_kl (ij|kl) D_lk`.
    pub fn coulomb(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.get(i, j, k, l) * d[(l, k)];
                }
            }
            s
        })
    }

    /// Exchange contraction `K[D]_ij = sum_kl (ik|jl) D_lk`.
    pub fn exchange(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.get(i, k, j, l) * d[(l, k)];
                }
            }
            s
        })
    }
}

/// Per-orbital annotation carried in the FCIDUMP sidecar file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitalLabel {
    pub orbital: usize,
    pub atom: usize,
    pub label: String,
}

pub fn load_orbital_labels(path: impl AsRef<Path>) -> Result<Vec<OrbitalLabel>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels: Vec<OrbitalLabel> = serde_json::from_str(&text)?;
    labels.sort_by_key(|l| l.orbital);
    Ok(labels)
}

pub fn write_orbital_labels(labels: &[OrbitalLabel], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(labels)?)?;
    Ok(())
}

/// The supercell problem.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub e_const: f64,
    pub h: DMatrix<f64>,
    pub g: Eri,
    pub orbital_labels: Option<Vec<OrbitalLabel>>,
}

impl Hamiltonian {
    /// Validates shapes, electron counts and one-body symmetry.
    pub fn new(n_alpha: usize, n_beta: usize, e_const: f64, h: DMatrix<f64>, g: Eri) -> Result<Self> {
        let n_orb = h.nrows();
        if h.ncols() != n_orb {
            return Err(DmetError::InvalidHamiltonian(format!("one-body matrix is {}x{}", h.nrows(), h.ncols())));
        }
        if g.n() != n_orb {
            return Err(DmetError::InvalidHamiltonian(format!(
                "two-electron table has {} orbitals, one-body matrix has {n_orb}",
                g.n()
            )));
        }
        if n_alpha > n_orb || n_beta > n_orb {
            return Err(DmetError::InvalidHamiltonian(format!(
                "electron counts ({n_alpha}, {n_beta}) do not fit in {n_orb} orbitals"
            )));
        }
        if linalg::asymmetry(&h) > 1e-10 {
            return Err(DmetError::InvalidHamiltonian("one-body matrix is not symmetric".into()));
        }
        Ok(Hamiltonian { n_orb, n_alpha, n_beta, e_const, h: linalg::symmetrize(&h), g, orbital_labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<OrbitalLabel>) -> Result<Self> {
        if labels.len() != self.n_orb || labels.iter().enumerate().any(|(i, l)| l.orbital != i) {
            return Err(DmetError::InvalidHamiltonian(format!(
                "orbital labels must cover orbitals 0..{} exactly once",
                self.n_orb
            )));
        }
        self.orbital_labels = Some(labels);
        Ok(self)
    }

    pub fn n_elec(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    /// Orbital-to-atom map; without labels every orbital is its own atom.
    pub fn atom_map(&self) -> Vec<usize> {
        match &self.orbital_labels {
            Some(labels) => labels.iter().map(|l| l.atom).collect(),
            None => (0..self.n_orb).collect(),
        }
    }

    pub fn load_fcidump(path: impl AsRef<Path>) -> Result<Self> {
        fcidump::load_fcidump(path)
    }

    pub fn write_fcidump(&self, path: impl AsRef<Path>) -> Result<()> {
        fcidump::write_fcidump(self, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eri_permutations_share_storage() {
        let mut g = Eri::zeros(3);
        g.set(0, 1, 2, 0, 0.3);
        for (i, j, k, l) in [(0, 1, 2, 0), (1, 0, 2, 0), (0, 1, 0, 2), (1, 0, 0, 2), (2, 0, 0, 1), (0, 2, 0, 1), (2, 0, 1, 0), (0, 2, 1, 0)] {
            assert_eq!(g.get(i, j, k, l), 0.3);
        }
        assert_eq!(g.get(0, 2, 1, 1), 0.0);
    }

    #[test]
    fn unique_entries_cover_each_orbit_once() {
        let n = 4;
        let g = Eri::zeros(n);
        let npair = n * (n + 1) / 2;
        assert_eq!(g.unique_entries().count(), npair * (npair + 1) / 2);
    }

    #[test]
    fn rejects_asymmetric_one_body() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(Hamiltonian::new(1, 1, 0.0, h, Eri::zeros(2)).is_err());
    }

    #[test]
    fn rejects_overfilled_orbitals() {
        assert!(Hamiltonian::new(3, 1, 0.0, DMatrix::zeros(2, 2), Eri::zeros(2)).is_err());
    }
}
