#![allow(dead_code)]

use dmet_core::{build_bath, build_embedding_hamiltonian, EmbeddingProblem, Eri, Guess, Hamiltonian};
use dmet_core::meanfield::unrestricted_hartree_fock;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random molecule-like Hamiltonian: symmetric `h`, and `g` built as a sum of
/// outer products of symmetric factors so it is positive semidefinite and
/// 8-fold symmetric.
pub fn random_hamiltonian(n: usize, na: usize, nb: usize, seed: u64) -> Hamiltonian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = (&a + a.transpose()) * 0.5;
    let mut dense = vec![0.0; n * n * n * n];
    for _ in 0..n {
        let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
        let l = (&l + l.transpose()) * 0.5;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        dense[((i * n + j) * n + k) * n + m] += l[(i, j)] * l[(k, m)];
                    }
                }
            }
        }
    }
    Hamiltonian::new(na, nb, 0.0, h, Eri::from_dense(n, &dense)).unwrap()
}

/// Whole-system embedding (identity projector) of `ham`.
pub fn whole_embedding(ham: &Hamiltonian) -> EmbeddingProblem {
    let mf = unrestricted_hartree_fock(ham, &Guess::Core, None, None).unwrap();
    let all: Vec<usize> = (0..ham.n_orb).collect();
    let bath = build_bath(&mf.d[0], &mf.d[1], &all, 1e-9).unwrap();
    build_embedding_hamiltonian(ham, &mf, &bath, 0.0).unwrap()
}

/// Embedding of `fragment` in the UHF of `ham` from `guess`.
pub fn fragment_embedding(ham: &Hamiltonian, guess: &Guess, fragment: &[usize]) -> EmbeddingProblem {
    let mf = unrestricted_hartree_fock(ham, guess, None, None).unwrap();
    let bath = build_bath(&mf.d[0], &mf.d[1], fragment, 1e-9).unwrap();
    build_embedding_hamiltonian(ham, &mf, &bath, 0.0).unwrap()
}
