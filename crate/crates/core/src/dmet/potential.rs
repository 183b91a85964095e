use nalgebra::DMatrix;

use crate::error::{DmetError, Result};
use crate::hamiltonian::Partition;

/// Per-class symmetric `(u_alpha, u_beta)` blocks over the representative's
/// orbitals, replicated onto every member when applied.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationPotential {
    pub blocks: Vec<[DMatrix<f64>; 2]>,
}

impl CorrelationPotential {
    pub fn zeros(partition: &Partition) -> Self {
        let blocks = (0..partition.equivalence_classes.len())
            .map(|c| {
                let k = partition.representative(c).orbitals.len();
                [DMatrix::zeros(k, k), DMatrix::zeros(k, k)]
            })
            .collect();
        CorrelationPotential { blocks }
    }

    /// Supercell-sized `(u_alpha, u_beta)` with each block concatenated into
    /// its members' fragment blocks.
    pub fn to_full(&self, partition: &Partition, n: usize) -> Result<[DMatrix<f64>; 2]> {
        if self.blocks.len() != partition.equivalence_classes.len() {
            return Err(DmetError::Dimension(format!(
                "correlation potential has {} blocks for {} classes",
                self.blocks.len(),
                partition.equivalence_classes.len()
            )));
        }
        let mut full = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        for (c, class) in partition.equivalence_classes.iter().enumerate() {
            let k = partition.representative(c).orbitals.len();
            for s in 0..2 {
                if self.blocks[c][s].shape() != (k, k) {
                    return Err(DmetError::Dimension(format!(
                        "class {c}: u block is {:?}, fragment has {k} orbitals",
                        self.blocks[c][s].shape()
                    )));
                }
            }
            for &m in &class.members {
                let orbs = &partition.fragments[m].orbitals;
                for s in 0..2 {
                    for (a, &i) in orbs.iter().enumerate() {
                        for (b, &j) in orbs.iter().enumerate() {
                            if i >= n || j >= n {
                                return Err(DmetError::UnmappedOrbital(i.max(j)));
                            }
                            full[s][(i, j)] = self.blocks[c][s][(a, b)];
                        }
                    }
                }
            }
        }
        Ok(full)
    }

    /// Upper triangles of the selected classes, alpha then beta per class.
    pub fn params(&self, classes: &[usize]) -> Vec<f64> {
        let mut out = Vec::new();
        for &c in classes {
            for s in 0..2 {
                let b = &self.blocks[c][s];
                for i in 0..b.nrows() {
                    for j in i..b.ncols() {
                        out.push(b[(i, j)]);
                    }
                }
            }
        }
        out
    }

    pub fn set_params(&mut self, classes: &[usize], params: &[f64]) {
        let mut it = params.iter();
        for &c in classes {
            for s in 0..2 {
                let k = self.blocks[c][s].nrows();
                for i in 0..k {
                    for j in i..k {
                        let v = *it.next().expect("parameter vector matches the block layout");
                        self.blocks[c][s][(i, j)] = v;
                        self.blocks[c][s][(j, i)] = v;
                    }
                }
            }
        }
    }

    pub fn max_abs_diff(&self, other: &CorrelationPotential) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| (0..2).map(move |s| crate::linalg::max_abs(&(&a[s] - &b[s]))))
            .fold(0.0, f64::max)
    }

    /// Nested arrays `[class][spin][row][col]` for serialization.
    pub fn to_nested(&self) -> Vec<[Vec<Vec<f64>>; 2]> {
        self.blocks
            .iter()
            .map(|b| [0, 1].map(|s| (0..b[s].nrows()).map(|i| b[s].row(i).iter().copied().collect()).collect()))
            .collect()
    }
}
