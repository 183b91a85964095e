use nalgebra::DMatrix;

use super::{Eri, Hamiltonian};
use crate::error::{DmetError, Result};

/// One-band Hubbard chain or ring with nearest-neighbour hopping `t` and
/// on-site repulsion `u`.
///
/// A two-site ring has a single bond; it is not counted twice.
pub fn build_hubbard(n_sites: usize, t: f64, u: f64, periodic: bool, n_alpha: usize, n_beta: usize) -> Result<Hamiltonian> {
    if n_sites < 2 {
        return Err(DmetError::InvalidHamiltonian(format!("Hubbard model needs at least 2 sites, got {n_sites}")));
    }
    if n_alpha > n_sites || n_beta > n_sites {
        return Err(DmetError::InvalidHamiltonian(format!(
            "electron counts ({n_alpha}, {n_beta}) exceed {n_sites} sites per spin"
        )));
    }
    let mut h = DMatrix::zeros(n_sites, n_sites);
    let n_bonds = if periodic && n_sites > 2 { n_sites } else { n_sites - 1 };
    for i in 0..n_bonds {
        let j = (i + 1) % n_sites;
        h[(i, j)] = -t;
        h[(j, i)] = -t;
    }
    let mut g = Eri::zeros(n_sites);
    for i in 0..n_sites {
        g.set(i, i, i, i, u);
    }
    Hamiltonian::new(n_alpha, n_beta, 0.0, h, g)
}
