//! Unrestricted Hartree-Fock over a quartic Hamiltonian in an orthonormal
//! basis, with broken-symmetry guesses and correlation-potential dressing.
//!
//! Spin-indexed arrays use index 0 for alpha and 1 for beta throughout the
//! crate.

mod diis;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dmet::CorrelationPotential;
use crate::error::{DmetError, Result};
use crate::hamiltonian::{Eri, Hamiltonian, Partition};
use crate::linalg;

use diis::Diis;

/// Diagonal spin bias applied by the AFM and FM presets.
pub const SPIN_BIAS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guess {
    /// Aufbau occupation of the bare one-body matrix.
    Core,
    /// Core guess biased spin-up on even atoms and spin-down on odd atoms.
    Afm,
    /// Core guess with a uniform spin-up bias.
    Fm,
    /// Explicit `(D_alpha, D_beta)`.
    #[serde(skip)]
    Density(DMatrix<f64>, DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub struct ScfOptions {
    pub max_cycles: usize,
    /// Convergence threshold on `max |FD - DF|`.
    pub commutator_tol: f64,
    pub energy_tol: f64,
    pub diis_window: usize,
    /// DIIS engages once the commutator error falls below this; earlier
    /// cycles are damped fixed-point steps, which keeps the extrapolation
    /// from settling on the restricted saddle point.
    pub diis_start: f64,
    /// ... or unconditionally from this cycle on, to break damped
    /// occupation oscillations.
    pub diis_start_cycle: usize,
    pub damping: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions { max_cycles: 200, commutator_tol: 1e-9, energy_tol: 1e-10, diis_window: 8, diis_start: 1e-2, diis_start_cycle: 25, damping: 0.5 }
    }
}

/// Everything the SCF loop needs; the supercell and embedding problems both
/// reduce to this.
#[derive(Clone, Debug)]
pub struct ScfProblem<'a> {
    pub h: [DMatrix<f64>; 2],
    pub eri: &'a Eri,
    pub e_const: f64,
    pub n_occ: [usize; 2],
    pub atom_map: Vec<usize>,
}

impl<'a> ScfProblem<'a> {
    pub fn from_hamiltonian(ham: &'a Hamiltonian) -> Self {
        ScfProblem {
            h: [ham.h.clone(), ham.h.clone()],
            eri: &ham.g,
            e_const: ham.e_const,
            n_occ: [ham.n_alpha, ham.n_beta],
            atom_map: ham.atom_map(),
        }
    }

    pub fn n(&self) -> usize {
        self.h[0].nrows()
    }

    /// Undressed Fock matrices for the given densities.
    pub fn fock(&self, d: &[DMatrix<f64>; 2]) -> [DMatrix<f64>; 2] {
        let j = self.eri.coulomb(&(&d[0] + &d[1]));
        [0, 1].map(|s| linalg::symmetrize(&(&self.h[s] + &j - self.eri.exchange(&d[s]))))
    }

    /// `E = e_const + 1/2 sum_s tr[(h_s + F_s) D_s]` with undressed `F`.
    pub fn energy(&self, d: &[DMatrix<f64>; 2], f: &[DMatrix<f64>; 2]) -> f64 {
        self.e_const + 0.5 * (0..2).map(|s| (&self.h[s] + &f[s]).dot(&d[s])).sum::<f64>()
    }

    fn initial_density(&self, guess: &Guess) -> Result<[DMatrix<f64>; 2]> {
        let n = self.n();
        if let Guess::Density(da, db) = guess {
            for (s, d) in [da, db].into_iter().enumerate() {
                if d.nrows() != n || d.ncols() != n {
                    return Err(DmetError::Dimension(format!("guess density is {}x{}, expected {n}x{n}", d.nrows(), d.ncols())));
                }
                if (d.trace() - self.n_occ[s] as f64).abs() > 1e-6 {
                    return Err(DmetError::Dimension(format!(
                        "guess density trace {} does not match {} electrons",
                        d.trace(),
                        self.n_occ[s]
                    )));
                }
            }
            return Ok([da.clone(), db.clone()]);
        }
        let mut d = [0, 1].map(|s| {
            let (_, c) = linalg::eigh(&self.h[s]);
            linalg::occupied_density(&c, self.n_occ[s])
        });
        match guess {
            Guess::Afm => {
                for (i, &atom) in self.atom_map.iter().enumerate() {
                    let sign = if atom % 2 == 0 { 1.0 } else { -1.0 };
                    d[0][(i, i)] += sign * SPIN_BIAS;
                    d[1][(i, i)] -= sign * SPIN_BIAS;
                }
            }
            Guess::Fm => {
                for i in 0..n {
                    d[0][(i, i)] += SPIN_BIAS;
                    d[1][(i, i)] -= SPIN_BIAS;
                }
            }
            _ => {}
        }
        Ok(d)
    }
}

/// Converged (or last) UHF state.
#[derive(Clone, Debug)]
pub struct MeanFieldState {
    pub c: [DMatrix<f64>; 2],
    pub orbital_energies: [DVector<f64>; 2],
    pub d: [DMatrix<f64>; 2],
    /// Undressed Fock matrices built from `d`.
    pub f: [DMatrix<f64>; 2],
    pub n_occ: [usize; 2],
    pub e_total: f64,
    pub converged: bool,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
}

impl MeanFieldState {
    pub fn idempotency_error(&self) -> f64 {
        self.d.iter().map(|d| linalg::max_abs(&(d * d - d))).fold(0.0, f64::max)
    }

    /// Densities reproduced from `fock` by aufbau filling.
    pub fn from_fock(fock: &[DMatrix<f64>; 2], n_occ: [usize; 2]) -> ([DMatrix<f64>; 2], [DMatrix<f64>; 2], [DVector<f64>; 2]) {
        let mut c = [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)];
        let mut e = [DVector::zeros(0), DVector::zeros(0)];
        let mut d = [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)];
        for s in 0..2 {
            let (w, v) = linalg::eigh(&fock[s]);
            let k = n_occ[s];
            if k > 0 && k < w.len() && (w[k] - w[k - 1]).abs() < 1e-10 {
                log::warn!("degenerate frontier orbitals (gap {:.2e}); aufbau occupation is ambiguous", w[k] - w[k - 1]);
            }
            d[s] = linalg::occupied_density(&v, k);
            c[s] = v;
            e[s] = w;
        }
        (c, d, e)
    }
}

/// SCF on a prepared problem. `dressing` is added to the Fock matrix every
/// cycle but not to the energy expression. When the DIIS-accelerated run
/// fails, level-shifted Roothaan iterations are tried from the same guess.
pub fn run_scf(
    problem: &ScfProblem<'_>,
    guess: &Guess,
    dressing: Option<&[DMatrix<f64>; 2]>,
    opts: &ScfOptions,
) -> Result<MeanFieldState> {
    let n = problem.n();
    if problem.eri.n() != n || problem.h[1].nrows() != n {
        return Err(DmetError::Dimension("one- and two-body dimensions differ".into()));
    }
    if let Some(u) = dressing {
        if u.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(DmetError::Dimension("dressing potential has the wrong shape".into()));
        }
    }
    let d0 = problem.initial_density(guess)?;
    let mut state = scf_loop(problem, d0.clone(), dressing, opts, None);
    let mut spent = state.iterations;
    for shift in LEVEL_SHIFTS {
        if state.converged {
            break;
        }
        log::debug!("UHF retry with level shift {shift}");
        let retry = scf_loop(problem, d0.clone(), dressing, &ScfOptions { max_cycles: 4 * opts.max_cycles, ..opts.clone() }, Some(shift));
        spent += retry.iterations;
        if retry.converged || retry.e_total < state.e_total {
            state = retry;
        }
    }
    state.iterations = spent;
    if !state.converged {
        log::warn!("UHF not converged after {spent} cycles");
    }
    Ok(state)
}

const LEVEL_SHIFTS: [f64; 3] = [0.5, 2.0, 8.0];

fn scf_loop(
    problem: &ScfProblem<'_>,
    mut d: [DMatrix<f64>; 2],
    dressing: Option<&[DMatrix<f64>; 2]>,
    opts: &ScfOptions,
    level_shift: Option<f64>,
) -> MeanFieldState {
    let n = problem.n();
    let mut diis = Diis::new(opts.diis_window);
    let mut history = Vec::new();
    let mut e_prev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = None;
    let mut diis_active = false;

    for cycle in 1..=opts.max_cycles {
        iterations = cycle;
        let f = problem.fock(&d);
        let energy = problem.energy(&d, &f);
        history.push(energy);
        let f_dressed = match dressing {
            Some(u) => [&f[0] + &u[0], &f[1] + &u[1]],
            None => f.clone(),
        };
        let err = [0, 1].map(|s| &f_dressed[s] * &d[s] - &d[s] * &f_dressed[s]);
        let comm = err.iter().map(linalg::max_abs).fold(0.0, f64::max);
        if comm < opts.commutator_tol && (energy - e_prev).abs() < opts.energy_tol {
            converged = true;
            let (c, _, eps) = MeanFieldState::from_fock(&f_dressed, problem.n_occ);
            last = Some((c, eps, f, energy));
            break;
        }
        e_prev = energy;
        if let Some(b) = level_shift {
            // virtual space raised by b; the fixed point is unchanged
            let shifted = [0, 1].map(|s| &f_dressed[s] + b * (DMatrix::identity(n, n) - &d[s]));
            let (_, d_new, _) = MeanFieldState::from_fock(&shifted, problem.n_occ);
            let (c, _, eps) = MeanFieldState::from_fock(&f_dressed, problem.n_occ);
            d = d_new;
            last = Some((c, eps, f, energy));
            continue;
        }
        if comm < opts.diis_start || cycle >= opts.diis_start_cycle {
            diis_active = true;
        }
        let f_next = if diis_active {
            match diis.extrapolate(&f_dressed, &err) {
                Some(x) => x,
                None => {
                    diis.clear();
                    f_dressed.clone()
                }
            }
        } else {
            f_dressed.clone()
        };
        let (c, d_new, eps) = MeanFieldState::from_fock(&f_next, problem.n_occ);
        let damp = diis.len() == 0;
        d = if damp { [0, 1].map(|s| opts.damping * &d[s] + (1.0 - opts.damping) * &d_new[s]) } else { d_new };
        last = Some((c, eps, f, energy));
    }

    let (c, orbital_energies, f, e_total) = last.expect("at least one SCF cycle");
    MeanFieldState { c, orbital_energies, d, f, n_occ: problem.n_occ, e_total, converged, iterations, energy_history: history }
}

/// UHF on the supercell Hamiltonian, optionally dressed by a correlation
/// potential replicated over `partition`.
pub fn unrestricted_hartree_fock(
    ham: &Hamiltonian,
    guess: &Guess,
    u: Option<&CorrelationPotential>,
    partition: Option<&Partition>,
) -> Result<MeanFieldState> {
    let problem = ScfProblem::from_hamiltonian(ham);
    let dressing = match (u, partition) {
        (Some(u), Some(p)) => Some(u.to_full(p, ham.n_orb)?),
        (Some(_), None) => return Err(DmetError::Dimension("correlation potential given without a partition".into())),
        _ => None,
    };
    run_scf(&problem, guess, dressing.as_ref(), &ScfOptions::default())
}

/// `F' = F + u` on fragment-internal index pairs of every class member.
pub fn dressed_fock(
    state: &MeanFieldState,
    u: &CorrelationPotential,
    partition: &Partition,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = state.f[0].nrows();
    let [ua, ub] = u.to_full(partition, n)?;
    Ok((&state.f[0] + ua, &state.f[1] + ub))
}

/// Mean field obtained by diagonalizing `fock + u` once, no SCF re-loop.
/// The stored Fock matrices are rebuilt from the new densities.
pub fn rediagonalize(ham: &Hamiltonian, fock: &[DMatrix<f64>; 2], u_full: &[DMatrix<f64>; 2]) -> MeanFieldState {
    let problem = ScfProblem::from_hamiltonian(ham);
    let dressed = [&fock[0] + &u_full[0], &fock[1] + &u_full[1]];
    let (c, d, eps) = MeanFieldState::from_fock(&dressed, problem.n_occ);
    let f = problem.fock(&d);
    let e_total = problem.energy(&d, &f);
    MeanFieldState {
        c,
        orbital_energies: eps,
        d,
        f,
        n_occ: problem.n_occ,
        e_total,
        converged: true,
        iterations: 0,
        energy_history: vec![e_total],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hubbard, Fragment, SolverKind};

    #[test]
    fn non_interacting_dimer_energy() {
        let ham = build_hubbard(2, 1.0, 0.0, false, 1, 1).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Core, None, None).unwrap();
        assert!(mf.converged);
        assert!((mf.e_total + 2.0).abs() < 1e-12);
    }

    #[test]
    fn four_site_ring_fills_lowest_levels() {
        let ham = build_hubbard(4, 1.0, 0.0, true, 2, 2).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Core, None, None).unwrap();
        assert!((mf.e_total + 4.0).abs() < 1e-10);
    }

    /// Brute-force oracle: one occupied orbital per spin, (cos a, sin a) and
    /// (cos b, sin b), scanned on a 10^4-point grid each.
    fn dimer_uhf_grid_minimum(t: f64, u: f64) -> f64 {
        let m = 10_000;
        let pts: Vec<(f64, f64, f64)> = (0..m)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / m as f64;
                (a.cos().powi(2), a.sin().powi(2), -2.0 * t * a.cos() * a.sin())
            })
            .collect();
        let mut best = f64::INFINITY;
        for &(ca, sa, ha) in &pts {
            for &(cb, sb, hb) in &pts {
                let e = ha + hb + u * (ca * cb + sa * sb);
                if e < best {
                    best = e;
                }
            }
        }
        best
    }

    #[test]
    fn afm_guess_breaks_symmetry_at_strong_coupling() {
        let ham = build_hubbard(2, 1.0, 8.0, false, 1, 1).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        assert!(mf.converged);
        let restricted = -2.0 + 8.0 / 2.0;
        assert!(mf.e_total < restricted - 1e-3, "{} vs {restricted}", mf.e_total);
        let oracle = dimer_uhf_grid_minimum(1.0, 8.0);
        assert!((mf.e_total - oracle).abs() < 1e-6, "{} vs {oracle}", mf.e_total);
        assert!(mf.d[0][(0, 0)] > 0.5 && mf.d[1][(1, 1)] > 0.5);
    }

    #[test]
    fn converged_densities_are_idempotent() {
        let ham = build_hubbard(6, 1.0, 4.0, true, 3, 3).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        assert!(mf.converged);
        assert!(mf.idempotency_error() < 1e-8);
        assert!((mf.d[0].trace() - 3.0).abs() < 1e-10);
        assert!(linalg::asymmetry(&mf.f[0]) < 1e-14);
    }

    #[test]
    fn energy_history_tail_is_non_increasing() {
        let ham = build_hubbard(10, 1.0, 4.0, true, 5, 5).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        assert!(mf.converged);
        assert!(mf.e_total < -4.6, "restricted saddle: {}", mf.e_total);
        let h = &mf.energy_history;
        let start = h.len().saturating_sub(h.len() / 2).max(ScfOptions::default().diis_window.min(h.len()));
        for w in h[start.min(h.len())..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", &h[start..]);
        }
    }

    #[test]
    fn zero_interaction_matches_sum_of_orbital_energies() {
        let ham = build_hubbard(6, 1.0, 0.0, false, 3, 2).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Afm, None, None).unwrap();
        let (w, _) = linalg::eigh(&ham.h);
        let expected: f64 = w.iter().take(3).sum::<f64>() + w.iter().take(2).sum::<f64>();
        assert!((mf.e_total - expected).abs() < 1e-10);
    }

    #[test]
    fn dressed_fock_touches_only_fragment_block() {
        let ham = build_hubbard(4, 1.0, 2.0, true, 2, 2).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Core, None, None).unwrap();
        let partition = Partition::new(vec![
            Fragment { orbitals: vec![0, 1], solver: SolverKind::Fci },
            Fragment { orbitals: vec![2, 3], solver: SolverKind::Meanfield },
        ]);
        let zero = CorrelationPotential::zeros(&partition);
        let (fa, fb) = dressed_fock(&mf, &zero, &partition).unwrap();
        assert_eq!(fa, mf.f[0]);
        assert_eq!(fb, mf.f[1]);

        let mut u = CorrelationPotential::zeros(&partition);
        u.blocks[0][0][(0, 1)] = 0.3;
        u.blocks[0][0][(1, 0)] = 0.3;
        let (fa, fb) = dressed_fock(&mf, &u, &partition).unwrap();
        let diff = &fa - &mf.f[0];
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i, j) == (0, 1) || (i, j) == (1, 0) { 0.3 } else { 0.0 };
                assert!((diff[(i, j)] - expected).abs() < 1e-15);
            }
        }
        assert_eq!(fb, mf.f[1]);
        assert!(linalg::asymmetry(&fa) < 1e-15);
    }

    #[test]
    fn dressed_fock_shape_mismatch_is_an_error() {
        let ham = build_hubbard(3, 1.0, 2.0, false, 1, 1).unwrap();
        let mf = unrestricted_hartree_fock(&ham, &Guess::Core, None, None).unwrap();
        let p3 = Partition::new(vec![Fragment { orbitals: vec![0, 1, 2], solver: SolverKind::Fci }]);
        let mut u_bad = CorrelationPotential::zeros(&p3);
        u_bad.blocks[0][1] = DMatrix::zeros(2, 2);
        assert!(dressed_fock(&mf, &u_bad, &p3).is_err());
    }

    #[test]
    fn explicit_guess_with_wrong_trace_is_rejected() {
        let ham = build_hubbard(2, 1.0, 1.0, false, 1, 1).unwrap();
        let bad = Guess::Density(DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 0.5);
        assert!(unrestricted_hartree_fock(&ham, &bad, None, None).is_err());
    }
}
