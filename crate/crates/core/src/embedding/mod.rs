//! Bath construction, projection of the supercell Hamiltonian into
//! fragment+bath space, and democratic fragment energies.

use nalgebra::{DMatrix, SVD};

use crate::error::{DmetError, Result};
use crate::hamiltonian::{Eri, Hamiltonian};
use crate::linalg;
use crate::meanfield::MeanFieldState;
use crate::solvers::Rdm2;
use crate::tensor;

/// Default singular-value cutoff for bath orbitals.
pub const BATH_THRESHOLD: f64 = 1e-9;
/// Singular values closer than this are treated as one degenerate block.
const DEGENERACY_TOL: f64 = 1e-8;
/// Largest accepted distance between the embedding occupancy and its
/// rounded electron count.
pub const MAX_ROUNDING_RESIDUAL: f64 = 0.35;

/// Maps embedding orbitals (fragment first, then bath) onto local orbitals.
#[derive(Clone, Debug)]
pub struct BathProjector {
    /// `n_orb x (n_frag + n_bath)`, orthonormal columns.
    pub p: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub fragment: Vec<usize>,
    pub n_frag: usize,
    pub n_bath: usize,
}

impl BathProjector {
    pub fn n_emb(&self) -> usize {
        self.n_frag + self.n_bath
    }

    pub fn orthonormality_error(&self) -> f64 {
        let ptp = self.p.transpose() * &self.p;
        linalg::max_abs(&(ptp - DMatrix::identity(self.n_emb(), self.n_emb())))
    }
}

/// Bath orbitals from the SVD of the spin-averaged fragment-environment
/// density block.
pub fn build_bath(d_alpha: &DMatrix<f64>, d_beta: &DMatrix<f64>, fragment: &[usize], threshold: f64) -> Result<BathProjector> {
    let n = d_alpha.nrows();
    if fragment.is_empty() {
        return Err(DmetError::InvalidPartition("empty fragment".into()));
    }
    if d_alpha.shape() != (n, n) || d_beta.shape() != (n, n) {
        return Err(DmetError::Dimension("density matrices must be square and equal in size".into()));
    }
    if linalg::asymmetry(d_alpha) > 1e-8 || linalg::asymmetry(d_beta) > 1e-8 {
        return Err(DmetError::Dimension("density matrix is not symmetric".into()));
    }
    let mut in_frag = vec![false; n];
    for &i in fragment {
        if i >= n || in_frag[i] {
            return Err(DmetError::InvalidPartition(format!("fragment index {i} is out of range or repeated")));
        }
        in_frag[i] = true;
    }
    let env: Vec<usize> = (0..n).filter(|&i| !in_frag[i]).collect();
    let n_frag = fragment.len();

    let mut bath: Vec<(f64, Vec<f64>)> = Vec::new();
    if !env.is_empty() {
        let d_avg = 0.5 * (d_alpha + d_beta);
        let block = linalg::select(&d_avg, fragment, &env);
        let svd = SVD::new(block, false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let sigmas: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        // keep or drop near-degenerate singular values together
        let mut keep = vec![false; sigmas.len()];
        let mut start = 0;
        while start < sigmas.len() {
            let mut end = start + 1;
            while end < sigmas.len() && sigmas[end - 1] - sigmas[end] < DEGENERACY_TOL {
                end += 1;
            }
            let any = sigmas[start..end].iter().any(|&s| s > threshold);
            keep[start..end].iter_mut().for_each(|k| *k = any);
            start = end;
        }
        for (slot, &k) in order.iter().enumerate() {
            if !keep[slot] {
                continue;
            }
            let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
            let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            bath.push((sigmas[slot], v));
        }
    }

    let n_bath = bath.len();
    let mut p = DMatrix::zeros(n, n_frag + n_bath);
    for (a, &i) in fragment.iter().enumerate() {
        p[(i, a)] = 1.0;
    }
    for (b, (_, v)) in bath.iter().enumerate() {
        for (e, &i) in env.iter().enumerate() {
            p[(i, n_frag + b)] = v[e];
        }
    }
    Ok(BathProjector { p, singular_values: bath.iter().map(|(s, _)| *s).collect(), fragment: fragment.to_vec(), n_frag, n_bath })
}

/// Projects a two-electron table onto the columns of `p` with four quarter
/// transforms; the result is packed back with full 8-fold symmetry.
pub fn transform_two_electron(g: &Eri, p: &DMatrix<f64>) -> Eri {
    let n = g.n();
    assert_eq!(p.nrows(), n, "projector rows must match the orbital count");
    let dense = tensor::transform4(&g.to_dense(), n, [p, p, p, p]);
    Eri::from_dense(p.ncols(), &dense)
}

/// Fragment+bath Hamiltonian. `h_emb` excludes the chemical potential; the
/// solvers apply `-mu` on the fragment diagonal of both spins.
#[derive(Clone, Debug)]
pub struct EmbeddingProblem {
    pub h_emb: [DMatrix<f64>; 2],
    /// `P^T h P`, used by the democratic energy.
    pub h_bare: DMatrix<f64>,
    pub g_emb: Eri,
    pub mu: f64,
    pub n_frag: usize,
    pub n_elec: [usize; 2],
    /// `|occupancy - round(occupancy)|` per spin.
    pub rounding_residual: [f64; 2],
    /// Constant for whole-system checks: core energy plus the mean-field
    /// energy of the environment electrons.
    pub e_const_emb: f64,
    /// Mean-field density projected into the embedding, `P^T D P`.
    pub mf_density: [DMatrix<f64>; 2],
}

impl EmbeddingProblem {
    pub fn n_emb(&self) -> usize {
        self.h_emb[0].nrows()
    }

    pub fn frag_indices(&self) -> std::ops::Range<usize> {
        0..self.n_frag
    }

    /// One-body matrix seen by the solvers, `-mu` included.
    pub fn one_body(&self, spin: usize) -> DMatrix<f64> {
        let mut h = self.h_emb[spin].clone();
        for i in self.frag_indices() {
            h[(i, i)] -= self.mu;
        }
        h
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        EmbeddingProblem { mu, ..self.clone() }
    }

    pub fn n_elec_total(&self) -> usize {
        self.n_elec[0] + self.n_elec[1]
    }
}

/// Builds the embedding Hamiltonian with the environment acting through its
/// Coulomb and same-spin exchange potential.
pub fn build_embedding_hamiltonian(ham: &Hamiltonian, mf: &MeanFieldState, bath: &BathProjector, mu: f64) -> Result<EmbeddingProblem> {
    let n = ham.n_orb;
    let p = &bath.p;
    if p.nrows() != n || mf.d[0].nrows() != n {
        return Err(DmetError::Dimension(format!(
            "projector has {} rows, mean field {} orbitals, hamiltonian {n}",
            p.nrows(),
            mf.d[0].nrows()
        )));
    }
    let pt = p.transpose();
    let proj = [0, 1].map(|s| &pt * &mf.d[s] * p);
    let d_env = [0, 1].map(|s| &mf.d[s] - p * &proj[s] * &pt);
    let j_env = ham.g.coulomb(&(&d_env[0] + &d_env[1]));
    let v_env = [0, 1].map(|s| &j_env - ham.g.exchange(&d_env[s]));
    let h_emb = [0, 1].map(|s| linalg::symmetrize(&(&pt * (&ham.h + &v_env[s]) * p)));
    let h_bare = linalg::symmetrize(&(&pt * &ham.h * p));
    let g_emb = transform_two_electron(&ham.g, p);

    let mut n_elec = [0; 2];
    let mut residual = [0.0; 2];
    for s in 0..2 {
        let occ = proj[s].trace();
        let rounded = occ.round().max(0.0);
        residual[s] = (occ - rounded).abs();
        if residual[s] >= MAX_ROUNDING_RESIDUAL {
            return Err(DmetError::ElectronRounding {
                orbitals: bath.fragment.clone(),
                spin: if s == 0 { "alpha" } else { "beta" },
                occupancy: occ,
                residual: residual[s],
            });
        }
        n_elec[s] = (rounded as usize).min(bath.n_emb());
    }

    let e_env = (0..2)
        .map(|s| (&ham.h + 0.5 * &v_env[s]).dot(&d_env[s]))
        .sum::<f64>();

    Ok(EmbeddingProblem {
        h_emb,
        h_bare,
        g_emb,
        mu,
        n_frag: bath.n_frag,
        n_elec,
        rounding_residual: residual,
        e_const_emb: ham.e_const + e_env,
        mf_density: proj,
    })
}

/// Democratic fragment energy: only terms whose first index lies in the
/// fragment contribute. Excludes `mu` and the core energy.
pub fn fragment_energy(ep: &EmbeddingProblem, rdm1: &[DMatrix<f64>; 2], rdm2: &Rdm2) -> Result<f64> {
    let n = ep.n_emb();
    if rdm1.iter().any(|d| d.shape() != (n, n)) || rdm2.n() != n {
        return Err(DmetError::Dimension(format!("RDMs do not match the {n}-orbital embedding")));
    }
    let mut e1 = 0.0;
    for s in 0..2 {
        let h_avg = 0.5 * (&ep.h_bare + &ep.h_emb[s]);
        for i in ep.frag_indices() {
            for j in 0..n {
                e1 += h_avg[(i, j)] * rdm1[s][(j, i)];
            }
        }
    }
    let mut e2 = 0.0;
    for i in ep.frag_indices() {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    e2 += ep.g_emb.get(i, j, k, l) * rdm2.get(i, j, k, l);
                }
            }
        }
    }
    Ok(e1 + 0.5 * e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_hubbard;
    use crate::meanfield::{unrestricted_hartree_fock, Guess};
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = a.qr().q();
        q.columns(0, m).clone_owned()
    }

    fn random_idempotent(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
        let c = random_orthonormal(rng, n, k);
        &c * c.transpose()
    }

    #[test]
    fn whole_system_fragment_gives_identity() {
        let d = DMatrix::from_element(3, 3, 1.0 / 3.0);
        let bath = build_bath(&d, &d, &[0, 1, 2], BATH_THRESHOLD).unwrap();
        assert_eq!(bath.n_bath, 0);
        assert_eq!(bath.p, DMatrix::identity(3, 3));
    }

    #[test]
    fn dimer_bath_is_the_other_site() {
        let d = DMatrix::from_element(2, 2, 0.5);
        let bath = build_bath(&d, &d, &[0], BATH_THRESHOLD).unwrap();
        assert_eq!(bath.n_bath, 1);
        assert!((bath.singular_values[0] - 0.5).abs() < 1e-14);
        assert!((bath.p[(1, 1)].abs() - 1.0).abs() < 1e-14);
        assert_eq!(bath.p[(0, 1)], 0.0);
    }

    #[test]
    fn bath_errors() {
        let d = DMatrix::from_element(2, 2, 0.5);
        assert!(build_bath(&d, &d, &[], BATH_THRESHOLD).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.1, 0.5]);
        assert!(build_bath(&asym, &asym, &[0], BATH_THRESHOLD).is_err());
    }

    #[test]
    fn random_idempotent_baths_are_orthonormal_and_bounded() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let da = random_idempotent(&mut rng, 12, 5);
            let db = random_idempotent(&mut rng, 12, 4);
            let mut orbitals: Vec<usize> = (0..12).collect();
            orbitals.shuffle(&mut rng);
            let frag = &orbitals[..3];
            let bath = build_bath(&da, &db, frag, BATH_THRESHOLD).unwrap();
            assert!(bath.n_bath <= 3);
            assert!(bath.orthonormality_error() < 1e-10, "seed {seed}");
            for (a, &i) in frag.iter().enumerate() {
                for r in 0..12 {
                    assert_eq!(bath.p[(r, a)], if r == i { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn identity_and_permutation_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let dense: Vec<f64> = (0..n * n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = Eri::from_dense(n, &dense);
        assert!(tensor::max_abs_diff(&transform_two_electron(&g, &DMatrix::identity(n, n)).to_dense(), &g.to_dense()) < 1e-15);
        let perm = [2, 0, 3, 1];
        let p = DMatrix::from_fn(n, n, |i, a| if perm[a] == i { 1.0 } else { 0.0 });
        let t = transform_two_electron(&g, &p);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        assert!((t.get(a, b, c, d) - g.get(perm[a], perm[b], perm[c], perm[d])).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn transform_matches_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let dense: Vec<f64> = (0..n * n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = Eri::from_dense(n, &dense);
        let p = random_orthonormal(&mut rng, n, 4);
        let fast = transform_two_electron(&g, &p);
        let full = g.to_dense();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                for k in 0..n {
                                    for l in 0..n {
                                        s += p[(i, a)] * p[(j, b)] * p[(k, c)] * p[(l, d)] * full[tensor::idx4(n, i, j, k, l)];
                                    }
                                }
                            }
                        }
                        assert!((fast.get(a, b, c, d) - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn whole_system_embedding_is_the_hamiltonian() {
        let ham = build_hubbard(4, 1.0, 4.0, true, 2, 2).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        let bath = build_bath(&mf.d[0], &mf.d[1], &[0, 1, 2, 3], BATH_THRESHOLD).unwrap();
        let ep = build_embedding_hamiltonian(&ham, &mf, &bath, 0.0).unwrap();
        assert_eq!(ep.h_emb[0], ham.h);
        assert_eq!(ep.h_emb[1], ham.h);
        assert_eq!(ep.g_emb, ham.g);
        assert_eq!(ep.n_elec, [2, 2]);
        assert_eq!(ep.e_const_emb, 0.0);
    }

    #[test]
    fn chemical_potential_shifts_only_fragment_diagonal() {
        let ham = build_hubbard(6, 1.0, 4.0, true, 3, 3).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        let bath = build_bath(&mf.d[0], &mf.d[1], &[0, 1], BATH_THRESHOLD).unwrap();
        let ep0 = build_embedding_hamiltonian(&ham, &mf, &bath, 0.0).unwrap();
        let ep1 = build_embedding_hamiltonian(&ham, &mf, &bath, 0.17).unwrap();
        for s in 0..2 {
            let (h0, h1) = (ep0.one_body(s), ep1.one_body(s));
            for i in 0..ep0.n_emb() {
                for j in 0..ep0.n_emb() {
                    if i == j && i < ep0.n_frag {
                        assert_eq!(h1[(i, j)], h0[(i, j)] - 0.17);
                    } else {
                        assert_eq!(h1[(i, j)], h0[(i, j)]);
                    }
                }
            }
        }
        assert_eq!(ep0.h_emb, ep1.h_emb);
    }

    #[test]
    fn embedding_integrals_are_symmetric() {
        let ham = build_hubbard(8, 1.0, 4.0, true, 4, 4).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        let bath = build_bath(&mf.d[0], &mf.d[1], &[2, 3], BATH_THRESHOLD).unwrap();
        let ep = build_embedding_hamiltonian(&ham, &mf, &bath, 0.0).unwrap();
        assert!(linalg::asymmetry(&ep.h_emb[0]) < 1e-12);
        let n = ep.n_emb();
        let g = crate::tensor::transform4(&ham.g.to_dense(), 8, [&bath.p, &bath.p, &bath.p, &bath.p]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = g[tensor::idx4(n, i, j, k, l)];
                        for w in [g[tensor::idx4(n, j, i, k, l)], g[tensor::idx4(n, i, j, l, k)], g[tensor::idx4(n, k, l, i, j)]] {
                            assert!((v - w).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_rdms_give_zero_energy() {
        let ham = build_hubbard(4, 1.0, 4.0, true, 2, 2).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        let bath = build_bath(&mf.d[0], &mf.d[1], &[0, 1], BATH_THRESHOLD).unwrap();
        let ep = build_embedding_hamiltonian(&ham, &mf, &bath, 0.0).unwrap();
        let n = ep.n_emb();
        let zero = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        assert_eq!(fragment_energy(&ep, &zero, &Rdm2::zeros(n)).unwrap(), 0.0);
        assert!(fragment_energy(&ep, &zero, &Rdm2::zeros(n + 1)).is_err());
    }

    proptest! {
        #[test]
        fn mu_enters_linearly(mu1 in -2.0f64..2.0, mu2 in -2.0f64..2.0) {
            let ham = build_hubbard(6, 1.0, 2.0, false, 3, 3).unwrap();
            let mf = unrestricted_hartree_fock(&ham, &Guess::Core, None, None).unwrap();
            let bath = build_bath(&mf.d[0], &mf.d[1], &[2, 3], BATH_THRESHOLD).unwrap();
            let ep = build_embedding_hamiltonian(&ham, &mf, &bath, 0.0).unwrap();
            let (a, b) = (ep.with_mu(mu1).one_body(0), ep.with_mu(mu2).one_body(0));
            let diff = &a - &b;
            for i in 0..ep.n_emb() {
                for j in 0..ep.n_emb() {
                    let expected = if i == j && i < ep.n_frag { mu2 - mu1 } else { 0.0 };
                    prop_assert!((diff[(i, j)] - expected).abs() < 1e-12);
                }
            }
        }
    }
}
