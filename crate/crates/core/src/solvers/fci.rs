//! Determinant-space full configuration interaction in a fixed
//! `(n_alpha, n_beta)` sector: string-driven sigma builds, Davidson
//! iteration with a dense fallback for small spaces, and RDM contraction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{SolverDiagnostics, SolverResult, SpinHamiltonian, SpinRdm2};
use crate::embedding::EmbeddingProblem;
use crate::error::{DmetError, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg;
use crate::tensor::idx4;

pub const MAX_FCI_ORBITALS: usize = 16;
pub const DENSE_LIMIT: usize = 2000;
pub const DAVIDSON_MAX_ITER: usize = 200;
pub const DAVIDSON_TOL: f64 = 1e-8;
const DAVIDSON_MAX_SPACE: usize = 40;

/// `E_pq |source> = sign |target>`.
#[derive(Clone, Copy, Debug)]
struct Single {
    target: u32,
    p: u8,
    q: u8,
    sign: f64,
}

/// Occupation strings of one spin, ordered by their bit pattern.
#[derive(Clone, Debug)]
pub struct StringSpace {
    n: usize,
    strings: Vec<u64>,
    address: Vec<u32>,
    singles: Vec<Vec<Single>>,
}

/// Parity of the occupied orbitals below `p`.
#[inline]
pub(crate) fn parity_below(bits: u64, p: usize) -> f64 {
    if (bits & ((1u64 << p) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl StringSpace {
    pub fn new(n: usize, k: usize) -> Self {
        let strings: Vec<u64> = (0u64..(1u64 << n)).filter(|b| b.count_ones() as usize == k).collect();
        let mut address = vec![u32::MAX; 1 << n];
        for (i, &s) in strings.iter().enumerate() {
            address[s as usize] = i as u32;
        }
        let singles = strings
            .iter()
            .map(|&s| {
                let mut out = Vec::new();
                for q in 0..n {
                    if s & (1 << q) == 0 {
                        continue;
                    }
                    let sign_q = parity_below(s, q);
                    let removed = s ^ (1 << q);
                    for p in 0..n {
                        if removed & (1 << p) != 0 {
                            continue;
                        }
                        let sign = sign_q * parity_below(removed, p);
                        let t = removed | (1 << p);
                        out.push(Single { target: address[t as usize], p: p as u8, q: q as u8, sign });
                    }
                }
                out
            })
            .collect();
        StringSpace { n, strings, address, singles }
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[u64] {
        &self.strings
    }

    pub fn address(&self, bits: u64) -> Option<usize> {
        self.address.get(bits as usize).copied().filter(|&a| a != u32::MAX).map(|a| a as usize)
    }
}

type SparseRows = Vec<Vec<(u32, f64)>>;

fn merge(row: BTreeMap<u32, f64>) -> Vec<(u32, f64)> {
    row.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

/// Same-spin operator `sum k_pq E_pq + 1/2 sum (pq|rs) E_pq E_rs` with
/// `k_pq = h_pq - 1/2 sum_r (pr|rq)`, as sparse rows indexed by source.
fn same_spin_rows(space: &StringSpace, h: &DMatrix<f64>, g: &[f64]) -> SparseRows {
    let n = space.n;
    let k = DMatrix::from_fn(n, n, |p, q| h[(p, q)] - 0.5 * (0..n).map(|r| g[idx4(n, p, r, r, q)]).sum::<f64>());
    (0..space.len())
        .map(|i| {
            let mut row = BTreeMap::new();
            for e1 in &space.singles[i] {
                let (r, s) = (e1.r(), e1.s());
                *row.entry(e1.target).or_insert(0.0) += k[(r, s)] * e1.sign;
                for e2 in &space.singles[e1.target as usize] {
                    let v = g[idx4(n, e2.p as usize, e2.q as usize, r, s)];
                    if v != 0.0 {
                        *row.entry(e2.target).or_insert(0.0) += 0.5 * v * e1.sign * e2.sign;
                    }
                }
            }
            merge(row)
        })
        .collect()
}

impl Single {
    #[inline]
    fn r(&self) -> usize {
        self.p as usize
    }
    #[inline]
    fn s(&self) -> usize {
        self.q as usize
    }
}

/// Hamiltonian action on the `(n_alpha, n_beta)` determinant space; vectors
/// are row-major `[alpha string][beta string]`.
pub struct FciOperator<'a> {
    ham: &'a SpinHamiltonian,
    pub alpha: StringSpace,
    pub beta: StringSpace,
    same_a: SparseRows,
    same_b: SparseRows,
    /// `W_pq = sum_rs (p_a q_a|r_b s_b) E^b_rs`, `None` when identically zero.
    cross: Vec<Option<SparseRows>>,
    diag: Vec<f64>,
}

impl<'a> FciOperator<'a> {
    pub fn new(ham: &'a SpinHamiltonian, n_alpha: usize, n_beta: usize) -> Result<Self> {
        let n = ham.n;
        if n > MAX_FCI_ORBITALS {
            return Err(DmetError::Dimension(format!("FCI limited to {MAX_FCI_ORBITALS} orbitals, got {n}")));
        }
        if n_alpha > n || n_beta > n {
            return Err(DmetError::Dimension(format!("sector ({n_alpha}, {n_beta}) does not fit {n} orbitals")));
        }
        let alpha = StringSpace::new(n, n_alpha);
        let beta = StringSpace::new(n, n_beta);
        let same_a = same_spin_rows(&alpha, &ham.h[0], &ham.g_aa);
        let same_b = same_spin_rows(&beta, &ham.h[1], &ham.g_bb);
        let mut cross = Vec::with_capacity(n * n);
        for p in 0..n {
            for q in 0..n {
                let any = (0..n * n).any(|rs| ham.g_ab[(p * n + q) * n * n + rs] != 0.0);
                if !any {
                    cross.push(None);
                    continue;
                }
                let rows = (0..beta.len())
                    .map(|i| {
                        let mut row = BTreeMap::new();
                        for e in &beta.singles[i] {
                            let v = ham.g_ab[idx4(n, p, q, e.p as usize, e.q as usize)];
                            if v != 0.0 {
                                *row.entry(e.target).or_insert(0.0) += v * e.sign;
                            }
                        }
                        merge(row)
                    })
                    .collect();
                cross.push(Some(rows));
            }
        }
        let mut op = FciOperator { ham, alpha, beta, same_a, same_b, cross, diag: Vec::new() };
        op.diag = op.compute_diagonal();
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    fn row_diag(rows: &SparseRows, i: usize) -> f64 {
        rows[i].iter().find(|(t, _)| *t as usize == i).map_or(0.0, |(_, v)| *v)
    }

    fn compute_diagonal(&self) -> Vec<f64> {
        let n = self.ham.n;
        let nb = self.beta.len();
        let mut diag = vec![0.0; self.dim()];
        for ia in 0..self.alpha.len() {
            let sa = self.alpha.strings[ia];
            let da = Self::row_diag(&self.same_a, ia);
            for ib in 0..nb {
                let mut v = self.ham.e_const + da + Self::row_diag(&self.same_b, ib);
                for p in (0..n).filter(|p| sa & (1 << p) != 0) {
                    if let Some(w) = &self.cross[p * n + p] {
                        v += Self::row_diag(w, ib);
                    }
                }
                diag[ia * nb + ib] = v;
            }
        }
        diag
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `sigma = H c`
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let nb = self.beta.len();
        let na = self.alpha.len();
        let n = self.ham.n;
        let mut sigma: Vec<f64> = c.iter().map(|x| x * self.ham.e_const).collect();
        for ia in 0..na {
            let row = &c[ia * nb..(ia + 1) * nb];
            let out = &mut sigma[ia * nb..(ia + 1) * nb];
            for (ib, &cv) in row.iter().enumerate() {
                if cv == 0.0 {
                    continue;
                }
                for &(t, v) in &self.same_b[ib] {
                    out[t as usize] += v * cv;
                }
            }
        }
        for ia in 0..na {
            for &(t, v) in &self.same_a[ia] {
                let t = t as usize;
                for ib in 0..nb {
                    sigma[t * nb + ib] += v * c[ia * nb + ib];
                }
            }
        }
        for ia in 0..na {
            for e in &self.alpha.singles[ia] {
                let Some(w) = &self.cross[e.p as usize * n + e.q as usize] else { continue };
                let ja = e.target as usize;
                for ib in 0..nb {
                    let cv = c[ia * nb + ib] * e.sign;
                    if cv == 0.0 {
                        continue;
                    }
                    for &(jb, v) in &w[ib] {
                        sigma[ja * nb + jb as usize] += v * cv;
                    }
                }
            }
        }
        sigma
    }

    /// Full sector matrix; intended for spaces up to [`DENSE_LIMIT`].
    pub fn dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut unit = vec![0.0; dim];
        for j in 0..dim {
            unit[j] = 1.0;
            let col = self.apply(&unit);
            unit[j] = 0.0;
            m.set_column(j, &DVector::from_vec(col));
        }
        linalg::symmetrize(&m)
    }

    /// `E^s_pq c` for every `(p, q)`, stored as columns `p * n + q`.
    fn excitation_vectors(&self, c: &[f64], spin: usize) -> DMatrix<f64> {
        let n = self.ham.n;
        let nb = self.beta.len();
        let mut out = DMatrix::zeros(self.dim(), n * n);
        if spin == 0 {
            for ia in 0..self.alpha.len() {
                for e in &self.alpha.singles[ia] {
                    let col = e.p as usize * n + e.q as usize;
                    let ja = e.target as usize;
                    for ib in 0..nb {
                        out[(ja * nb + ib, col)] += e.sign * c[ia * nb + ib];
                    }
                }
            }
        } else {
            for ia in 0..self.alpha.len() {
                for ib in 0..nb {
                    let cv = c[ia * nb + ib];
                    for e in &self.beta.singles[ib] {
                        out[(ia * nb + e.target as usize, e.p as usize * n + e.q as usize)] += e.sign * cv;
                    }
                }
            }
        }
        out
    }

    /// One- and two-particle RDMs of a normalized vector.
    pub fn rdms(&self, c: &[f64]) -> ([DMatrix<f64>; 2], SpinRdm2) {
        let n = self.ham.n;
        let cv = DVector::from_column_slice(c);
        let d = [self.excitation_vectors(c, 0), self.excitation_vectors(c, 1)];
        let gamma = [0, 1].map(|s| {
            let v = d[s].transpose() * &cv;
            linalg::symmetrize(&DMatrix::from_fn(n, n, |p, q| v[p * n + q]))
        });
        let gram_aa = d[0].transpose() * &d[0];
        let gram_bb = d[1].transpose() * &d[1];
        let gram_ab = d[0].transpose() * &d[1];
        let n4 = n * n * n * n;
        let (mut aa, mut ab, mut bb) = (vec![0.0; n4], vec![0.0; n4], vec![0.0; n4]);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let i = idx4(n, p, q, r, s);
                        let (qp, rs) = (q * n + p, r * n + s);
                        let delta = if q == r { 1.0 } else { 0.0 };
                        aa[i] = gram_aa[(qp, rs)] - delta * gamma[0][(p, s)];
                        bb[i] = gram_bb[(qp, rs)] - delta * gamma[1][(p, s)];
                        ab[i] = gram_ab[(qp, rs)];
                    }
                }
            }
        }
        (gamma, SpinRdm2 { n, aa, ab, bb })
    }
}

/// Lowest eigenpair of the sector.
#[derive(Clone, Debug)]
pub struct FciSolution {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn davidson<F: Fn(&[f64]) -> Vec<f64>>(apply: F, diag: &[f64], tol: f64, max_iter: usize) -> Result<FciSolution> {
    let dim = diag.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut images: Vec<DVector<f64>> = Vec::new();
    for &k in order.iter().take(4.min(dim)) {
        let mut v = DVector::zeros(dim);
        v[k] = 1.0;
        images.push(DVector::from_vec(apply(v.as_slice())));
        basis.push(v);
    }
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let m = basis.len();
        let sub = DMatrix::from_fn(m, m, |i, j| basis[i].dot(&images[j]));
        let (w, y) = linalg::eigh(&sub);
        let theta = w[0];
        let y0 = y.column(0);
        let mut x = DVector::zeros(dim);
        let mut ax = DVector::zeros(dim);
        for k in 0..m {
            x.axpy(y0[k], &basis[k], 1.0);
            ax.axpy(y0[k], &images[k], 1.0);
        }
        let r = &ax - theta * &x;
        residual = r.amax();
        if residual < tol {
            let norm = x.norm();
            return Ok(FciSolution { energy: theta, vector: (x / norm).as_slice().to_vec(), iterations: iter, residual });
        }
        let mut t = DVector::from_fn(dim, |i, _| {
            let denom = theta - diag[i];
            r[i] / if denom.abs() < 1e-8 { 1e-8_f64.copysign(denom) } else { denom }
        });
        if basis.len() >= DAVIDSON_MAX_SPACE {
            let nx = x.norm();
            basis = vec![&x / nx];
            images = vec![&ax / nx];
        }
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.dot(&t);
                t.axpy(-overlap, b, 1.0);
            }
        }
        let mut norm = t.norm();
        if norm < 1e-12 {
            // preconditioned direction collapsed; fall back to the residual
            t = r.clone();
            for _ in 0..2 {
                for b in &basis {
                    let overlap = b.dot(&t);
                    t.axpy(-overlap, b, 1.0);
                }
            }
            norm = t.norm();
            if norm < 1e-14 {
                let nx = x.norm();
                return Ok(FciSolution { energy: theta, vector: (x / nx).as_slice().to_vec(), iterations: iter, residual });
            }
        }
        t /= norm;
        images.push(DVector::from_vec(apply(t.as_slice())));
        basis.push(t);
    }
    Err(DmetError::Davidson { iterations: max_iter, residual })
}

/// Ground state of the `(n_alpha, n_beta)` sector.
pub fn ground_state(op: &FciOperator<'_>) -> Result<FciSolution> {
    let dim = op.dim();
    if dim <= DENSE_LIMIT {
        let (w, v) = linalg::eigh(&op.dense());
        return Ok(FciSolution { energy: w[0], vector: v.column(0).iter().copied().collect(), iterations: 1, residual: 0.0 });
    }
    davidson(|c| op.apply(c), op.diagonal(), DAVIDSON_TOL, DAVIDSON_MAX_ITER)
}

fn rayleigh(op: &FciOperator<'_>, c: &[f64]) -> f64 {
    op.apply(c).iter().zip(c).map(|(a, b)| a * b).sum()
}

/// Exact embedding solve.
pub fn solve_fci(ep: &EmbeddingProblem) -> Result<SolverResult> {
    let ham = SpinHamiltonian::from_embedding(ep);
    let op = FciOperator::new(&ham, ep.n_elec[0], ep.n_elec[1])?;
    let sol = ground_state(&op)?;
    let energy = rayleigh(&op, &sol.vector);
    let (rdm1, rdm2) = op.rdms(&sol.vector);
    let diagnostics = SolverDiagnostics {
        solver: "fci".into(),
        iterations: sol.iterations,
        gradient_norm: sol.residual,
        converged: true,
        message: None,
    };
    Ok(SolverResult::assemble(ep, energy, rdm1, rdm2, diagnostics))
}

/// Spin-resolved view of a supercell Hamiltonian, constant included.
pub fn spin_hamiltonian(ham: &Hamiltonian) -> SpinHamiltonian {
    let g = ham.g.to_dense();
    SpinHamiltonian { n: ham.n_orb, h: [ham.h.clone(), ham.h.clone()], g_aa: g.clone(), g_ab: g.clone(), g_bb: g, e_const: ham.e_const }
}

/// Whole-system FCI ground-state energy, `e_const` included.
pub fn fci_energy(ham: &Hamiltonian) -> Result<f64> {
    let sh = spin_hamiltonian(ham);
    let op = FciOperator::new(&sh, ham.n_alpha, ham.n_beta)?;
    Ok(ground_state(&op)?.energy)
}
