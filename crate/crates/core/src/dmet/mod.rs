//! The DMET driver: baths and embeddings per equivalence class, global
//! chemical-potential fitting, correlation-potential self-consistency and
//! democratic energy assembly.

mod potential;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{build_bath, build_embedding_hamiltonian, fragment_energy, BathProjector, EmbeddingProblem, BATH_THRESHOLD};
use crate::error::{DmetError, Result};
use crate::hamiltonian::{Hamiltonian, Partition, SolverKind};
use crate::linalg;
use crate::meanfield::{rediagonalize, unrestricted_hartree_fock, Guess, MeanFieldState};
use crate::optimize::{bfgs, brent_root, BfgsOptions, Termination};
use crate::solvers::{self, ConservationReport, SolverDiagnostics, SolverOptions, SolverResult};

pub use potential::CorrelationPotential;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DmetMode {
    #[default]
    #[serde(alias = "ONESHOT", alias = "o-dmet")]
    Oneshot,
    #[serde(alias = "SELFCONSISTENT", alias = "sc-dmet")]
    Selfconsistent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmetOptions {
    pub mode: DmetMode,
    pub guess: Guess,
    pub solver: SolverOptions,
    pub max_cycles: usize,
    pub du_tol: f64,
    pub de_tol: f64,
    pub mu_tol: f64,
    pub mu_step: f64,
    pub mu_max_expansions: usize,
    pub ufit_max_iter: usize,
    pub ufit_step_tol: f64,
    pub ufit_fd_step: f64,
    pub bath_threshold: f64,
    /// JSON-lines convergence log, one record per outer cycle.
    #[serde(skip)]
    pub log_path: Option<PathBuf>,
}

impl Default for DmetOptions {
    fn default() -> Self {
        DmetOptions {
            mode: DmetMode::Oneshot,
            guess: Guess::Core,
            solver: SolverOptions::default(),
            max_cycles: 50,
            du_tol: 1e-5,
            de_tol: 1e-7,
            mu_tol: 1e-6,
            mu_step: 0.1,
            mu_max_expansions: 10,
            ufit_max_iter: 100,
            ufit_step_tol: 1e-5,
            ufit_fd_step: 1e-6,
            bath_threshold: BATH_THRESHOLD,
            log_path: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FragmentRecord {
    pub class: usize,
    /// Index of the representative in the partition.
    pub fragment: usize,
    pub orbitals: Vec<usize>,
    pub multiplicity: usize,
    pub solver: SolverKind,
    pub energy: f64,
    pub electrons: f64,
    pub n_bath: usize,
    pub diagnostics: SolverDiagnostics,
    pub conservation: ConservationReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub cost: Option<f64>,
    pub du_inf: Option<f64>,
    pub e_cell: f64,
    pub electron_count: f64,
    /// `(lo, hi, N(lo) - N, N(hi) - N)` of this cycle's chemical-potential fit.
    pub mu_bracket: Option<[f64; 4]>,
    pub per_fragment: Vec<FragmentRecord>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MuFit {
    pub mu: f64,
    /// `(lo, hi, N(lo) - N, N(hi) - N)` when a root search was needed.
    pub bracket: Option<[f64; 4]>,
    pub evaluations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct UFit {
    pub u: CorrelationPotential,
    pub cost_initial: f64,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub cost_history: Vec<f64>,
}

impl UFit {
    pub fn stalled(&self) -> bool {
        matches!(self.termination, Termination::LineSearch | Termination::Stalled)
    }
}

#[derive(Clone, Debug)]
pub struct DmetState {
    pub mu: f64,
    pub u: CorrelationPotential,
    pub fragments: Vec<FragmentRecord>,
    pub e_cell: f64,
    pub electron_count: f64,
    pub history: Vec<CycleRecord>,
    pub converged: bool,
    pub mean_field: MeanFieldState,
    /// Undressed Fock matrices of the initial UHF; fixed across cycles.
    pub fock0: [DMatrix<f64>; 2],
    pub baths: Vec<BathProjector>,
    pub embeddings: Vec<EmbeddingProblem>,
    pub results: Vec<SolverResult>,
    pub mu_fit: MuFit,
    pub last_ufit: Option<UFit>,
}

/// Bath and embedding (at `mu = 0`) for every class representative.
pub fn build_embeddings(
    ham: &Hamiltonian,
    mf: &MeanFieldState,
    partition: &Partition,
    threshold: f64,
) -> Result<(Vec<BathProjector>, Vec<EmbeddingProblem>)> {
    let mut baths = Vec::new();
    let mut eps = Vec::new();
    for c in 0..partition.equivalence_classes.len() {
        let frag = partition.representative(c);
        let bath = build_bath(&mf.d[0], &mf.d[1], &frag.orbitals, threshold)?;
        let ep = build_embedding_hamiltonian(ham, mf, &bath, 0.0)?;
        baths.push(bath);
        eps.push(ep);
    }
    Ok((baths, eps))
}

fn tag(fragment: usize, e: DmetError) -> DmetError {
    match e {
        DmetError::Solver { message, .. } => DmetError::Solver { fragment, message },
        other => DmetError::Solver { fragment, message: other.to_string() },
    }
}

/// Solves every representative at `mu`, concurrently.
pub fn solve_all(eps: &[EmbeddingProblem], partition: &Partition, mu: f64, opts: &SolverOptions) -> Result<Vec<SolverResult>> {
    eps.par_iter()
        .enumerate()
        .map(|(c, ep)| {
            let rep = partition.equivalence_classes[c].representative;
            solvers::solve(&ep.with_mu(mu), partition.fragments[rep].solver, opts).map_err(|e| tag(rep, e))
        })
        .collect()
}

/// `sum_x multiplicity_x * (fragment trace of rdm1_x)`.
pub fn electron_count(partition: &Partition, eps: &[EmbeddingProblem], results: &[SolverResult]) -> f64 {
    partition
        .equivalence_classes
        .iter()
        .zip(eps.iter().zip(results))
        .map(|(class, (ep, r))| class.multiplicity() as f64 * r.fragment_electrons(ep.n_frag))
        .sum()
}

/// Global chemical potential restoring the supercell electron count.
pub fn fit_chemical_potential(
    eps: &[EmbeddingProblem],
    partition: &Partition,
    n_target: f64,
    opts: &DmetOptions,
) -> Result<(MuFit, Vec<SolverResult>)> {
    let mut memo: Vec<(f64, f64, Vec<SolverResult>)> = Vec::new();
    let eval = |mu: f64, memo: &mut Vec<(f64, f64, Vec<SolverResult>)>| -> Result<f64> {
        let results = solve_all(eps, partition, mu, &opts.solver)?;
        let f = electron_count(partition, eps, &results) - n_target;
        log::debug!("mu = {mu:.8}: N - N_target = {f:.3e}");
        memo.push((mu, f, results));
        Ok(f)
    };
    let f0 = eval(0.0, &mut memo)?;
    if f0.abs() < opts.mu_tol {
        let (_, _, results) = memo.pop().expect("evaluated");
        return Ok((MuFit { mu: 0.0, bracket: None, evaluations: 1, residual: f0 }, results));
    }
    // more electrons are drawn onto the fragments as mu rises
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut fa) = (0.0, f0);
    let mut bracket = None;
    let mut last = (0.0, f0);
    for k in 0..opts.mu_max_expansions {
        let b = dir * opts.mu_step * 2f64.powi(k as i32);
        let fb = eval(b, &mut memo)?;
        last = (b, fb);
        if fb.signum() != fa.signum() || fb.abs() < opts.mu_tol {
            bracket = Some((a, b, fa, fb));
            break;
        }
        a = b;
        fa = fb;
    }
    let Some((lo, hi, flo, fhi)) = bracket else {
        return Err(DmetError::MuBracket { lo: 0.0, hi: last.0, f_lo: f0, f_hi: last.1 });
    };
    let mut failure = None;
    let root = brent_root(
        |mu| match eval(mu, &mut memo) {
            Ok(f) => f,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        flo,
        fhi,
        1e-12,
        opts.mu_tol,
        100,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mu = root.expect("bracket has a sign change");
    let evaluations = memo.len();
    let idx = memo.iter().rposition(|(m, _, _)| *m == mu);
    let (residual, results) = match idx {
        Some(i) => {
            let (_, f, r) = memo.swap_remove(i);
            (f, r)
        }
        None => {
            let results = solve_all(eps, partition, mu, &opts.solver)?;
            (electron_count(partition, eps, &results) - n_target, results)
        }
    };
    if residual.abs() >= opts.mu_tol {
        log::warn!("chemical potential fit stopped at |N - N_target| = {:.3e}", residual.abs());
    }
    Ok((MuFit { mu, bracket: Some([lo, hi, flo, fhi]), evaluations, residual }, results))
}

/// Correlated classes, in class order.
pub fn correlated_classes(partition: &Partition) -> Vec<usize> {
    (0..partition.equivalence_classes.len()).filter(|&c| partition.representative(c).solver.is_correlated()).collect()
}

/// `L(u) = sum_c sum_s || D_s(F0 + u)[frag_c] - target_c,s ||^2` over
/// correlated classes.
pub fn ufit_cost(
    fock0: &[DMatrix<f64>; 2],
    n_occ: [usize; 2],
    partition: &Partition,
    targets: &[(usize, [DMatrix<f64>; 2])],
    u: &CorrelationPotential,
) -> Result<f64> {
    let n = fock0[0].nrows();
    let uf = u.to_full(partition, n)?;
    let dressed = [&fock0[0] + &uf[0], &fock0[1] + &uf[1]];
    let (_, d, _) = MeanFieldState::from_fock(&dressed, n_occ);
    let mut cost = 0.0;
    for (c, target) in targets {
        let orbs = &partition.representative(*c).orbitals;
        for s in 0..2 {
            let block = linalg::select(&d[s], orbs, orbs);
            cost += (block - &target[s]).norm_squared();
        }
    }
    Ok(cost)
}

/// Minimizes [`ufit_cost`] over the symmetric blocks of the correlated
/// classes, starting from `u0`, with central-difference gradients.
pub fn fit_correlation_potential(
    fock0: &[DMatrix<f64>; 2],
    n_occ: [usize; 2],
    partition: &Partition,
    targets: &[(usize, [DMatrix<f64>; 2])],
    u0: &CorrelationPotential,
    opts: &DmetOptions,
) -> Result<UFit> {
    let classes: Vec<usize> = targets.iter().map(|(c, _)| *c).collect();
    let x0 = u0.params(&classes);
    let cost_at = |x: &[f64]| -> Result<f64> {
        let mut u = u0.clone();
        u.set_params(&classes, x);
        ufit_cost(fock0, n_occ, partition, targets, &u)
    };
    let cost_initial = cost_at(&x0)?;
    let h = opts.ufit_fd_step;
    let objective = |x: &[f64]| {
        let f = cost_at(x).unwrap_or(f64::INFINITY);
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            xp[k] = x[k] + h;
            let fp = cost_at(&xp).unwrap_or(f64::INFINITY);
            xp[k] = x[k] - h;
            let fm = cost_at(&xp).unwrap_or(f64::INFINITY);
            xp[k] = x[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        (f, g)
    };
    let bopts = BfgsOptions {
        grad_tol: 1e-10,
        max_iter: opts.ufit_max_iter,
        step_tol: Some(opts.ufit_step_tol),
        stall_tol: 1e-16,
        stall_iters: 3,
    };
    let min = bfgs(objective, &x0, &bopts);
    let mut u = u0.clone();
    u.set_params(&classes, &min.x);
    if matches!(min.termination, Termination::LineSearch | Termination::Stalled) {
        log::warn!("correlation potential fit stalled at L = {:.3e}", min.f);
    }
    Ok(UFit { u, cost_initial, cost: min.f, iterations: min.iterations, termination: min.termination, cost_history: min.history })
}

fn fragment_records(
    partition: &Partition,
    baths: &[BathProjector],
    eps: &[EmbeddingProblem],
    results: &[SolverResult],
    mu: f64,
) -> Result<Vec<FragmentRecord>> {
    (0..partition.equivalence_classes.len())
        .map(|c| {
            let class = &partition.equivalence_classes[c];
            let ep = eps[c].with_mu(mu);
            let r = &results[c];
            Ok(FragmentRecord {
                class: c,
                fragment: class.representative,
                orbitals: partition.fragments[class.representative].orbitals.clone(),
                multiplicity: class.multiplicity(),
                solver: partition.fragments[class.representative].solver,
                energy: fragment_energy(&ep, &r.rdm1, &r.rdm2)?,
                electrons: r.fragment_electrons(ep.n_frag),
                n_bath: baths[c].n_bath,
                diagnostics: r.diagnostics.clone(),
                conservation: r.conservation(&ep),
            })
        })
        .collect()
}

fn e_cell(ham: &Hamiltonian, records: &[FragmentRecord]) -> f64 {
    ham.e_const + records.iter().map(|r| r.multiplicity as f64 * r.energy).sum::<f64>()
}

struct Log(Option<BufWriter<File>>);

impl Log {
    fn open(path: Option<&PathBuf>) -> Result<Self> {
        Ok(Log(match path {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        }))
    }

    fn write(&mut self, record: &CycleRecord) -> Result<()> {
        if let Some(w) = &mut self.0 {
            serde_json::to_writer(&mut *w, record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }
}

/// One-shot or self-consistent DMET on the supercell Hamiltonian.
pub fn run_dmet(ham: &Hamiltonian, partition: &Partition, opts: &DmetOptions) -> Result<DmetState> {
    partition.validate(ham.n_orb)?;
    let mut log = Log::open(opts.log_path.as_ref())?;
    let mf0 = unrestricted_hartree_fock(ham, &opts.guess, None, None)?;
    if !mf0.converged {
        log::warn!("supercell UHF did not converge; continuing from the last iterate");
    }
    let fock0 = mf0.f.clone();
    let n_target = ham.n_elec() as f64;
    let correlated = correlated_classes(partition);
    let mut u = CorrelationPotential::zeros(partition);
    let mut mf = mf0;
    let mut history = Vec::new();
    let mut prev_e: Option<f64> = None;
    let max_cycles = if opts.mode == DmetMode::Oneshot { 1 } else { opts.max_cycles.max(1) };

    for cycle in 1..=max_cycles {
        let (baths, eps) = build_embeddings(ham, &mf, partition, opts.bath_threshold)?;
        let (mu_fit, results) = fit_chemical_potential(&eps, partition, n_target, opts)?;
        let records = fragment_records(partition, &baths, &eps, &results, mu_fit.mu)?;
        let energy = e_cell(ham, &records);
        let electron_count = electron_count(partition, &eps, &results);
        let embeddings: Vec<EmbeddingProblem> = eps.iter().map(|ep| ep.with_mu(mu_fit.mu)).collect();
        log::info!("cycle {cycle}: mu = {:.8}, E_cell = {energy:.10}", mu_fit.mu);

        let mut state = DmetState {
            mu: mu_fit.mu,
            u: u.clone(),
            fragments: records.clone(),
            e_cell: energy,
            electron_count,
            history: Vec::new(),
            converged: false,
            mean_field: mf.clone(),
            fock0: fock0.clone(),
            baths,
            embeddings,
            results,
            mu_fit,
            last_ufit: None,
        };

        if opts.mode == DmetMode::Oneshot {
            let record = CycleRecord {
                cycle,
                mu: state.mu,
                cost: None,
                du_inf: None,
                e_cell: energy,
                electron_count,
                mu_bracket: state.mu_fit.bracket,
                per_fragment: records,
            };
            log.write(&record)?;
            history.push(record);
            state.history = history;
            state.converged = true;
            return Ok(state);
        }

        let targets: Vec<(usize, [DMatrix<f64>; 2])> = correlated
            .iter()
            .map(|&c| {
                let k = state.embeddings[c].n_frag;
                (c, [0, 1].map(|s| state.results[c].rdm1[s].view((0, 0), (k, k)).into_owned()))
            })
            .collect();
        let fit = fit_correlation_potential(&fock0, ham_n_occ(ham), partition, &targets, &u, opts)?;
        let du = fit.u.max_abs_diff(&u);
        let de = prev_e.map_or(f64::INFINITY, |p| (energy - p).abs());
        let record = CycleRecord {
            cycle,
            mu: state.mu,
            cost: Some(fit.cost),
            du_inf: Some(du),
            e_cell: energy,
            electron_count,
            mu_bracket: state.mu_fit.bracket,
            per_fragment: records,
        };
        log.write(&record)?;
        history.push(record);
        log::info!("cycle {cycle}: L = {:.3e}, |du| = {du:.3e}, |dE| = {de:.3e}", fit.cost);

        let converged = du < opts.du_tol && de < opts.de_tol;
        if converged || cycle == max_cycles {
            if !converged {
                log::warn!("sc-DMET not converged after {cycle} cycles");
            }
            state.history = history;
            state.converged = converged;
            state.last_ufit = Some(fit);
            return Ok(state);
        }
        prev_e = Some(energy);
        u = fit.u;
        let u_full = u.to_full(partition, ham.n_orb)?;
        mf = rediagonalize(ham, &fock0, &u_full);
    }
    unreachable!("loop returns on its final cycle")
}

fn ham_n_occ(ham: &Hamiltonian) -> [usize; 2] {
    [ham.n_alpha, ham.n_beta]
}

/// Embedding solutions for every fragment, members included, at the final
/// mean field and chemical potential. Index matches `partition.fragments`.
pub fn solve_members(ham: &Hamiltonian, partition: &Partition, state: &DmetState, opts: &SolverOptions) -> Result<Vec<(BathProjector, EmbeddingProblem, SolverResult)>> {
    let n_frag = partition.fragments.len();
    let owner: Vec<usize> = {
        let mut v = vec![0; n_frag];
        for (c, class) in partition.equivalence_classes.iter().enumerate() {
            for &m in &class.members {
                v[m] = c;
            }
        }
        v
    };
    (0..n_frag)
        .into_par_iter()
        .map(|f| {
            let c = owner[f];
            if partition.equivalence_classes[c].representative == f {
                return Ok((state.baths[c].clone(), state.embeddings[c].clone(), state.results[c].clone()));
            }
            let frag = &partition.fragments[f];
            let bath = build_bath(&state.mean_field.d[0], &state.mean_field.d[1], &frag.orbitals, BATH_THRESHOLD)?;
            let ep = build_embedding_hamiltonian(ham, &state.mean_field, &bath, state.mu)?;
            let r = solvers::solve(&ep, frag.solver, opts).map_err(|e| tag(f, e))?;
            Ok((bath, ep, r))
        })
        .collect()
}

/// Democratic global one-particle density: fragment rows taken from each
/// fragment's own embedding solution, then symmetrized.
pub fn global_density(ham: &Hamiltonian, partition: &Partition, state: &DmetState, opts: &SolverOptions) -> Result<[DMatrix<f64>; 2]> {
    let n = ham.n_orb;
    let solved = solve_members(ham, partition, state, opts)?;
    let mut d = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (f, (bath, _, r)) in solved.iter().enumerate() {
        for s in 0..2 {
            let rows = &bath.p * &r.rdm1[s] * bath.p.transpose();
            for &i in &partition.fragments[f].orbitals {
                for j in 0..n {
                    d[s][(i, j)] = rows[(i, j)];
                }
            }
        }
    }
    Ok(d.map(|m| linalg::symmetrize(&m)))
}

/// Largest `|E_member - E_representative|` over all classes.
pub fn class_consistency(ham: &Hamiltonian, partition: &Partition, state: &DmetState, opts: &SolverOptions) -> Result<f64> {
    let solved = solve_members(ham, partition, state, opts)?;
    let mut worst = 0.0_f64;
    for (c, class) in partition.equivalence_classes.iter().enumerate() {
        for &m in &class.members {
            let (_, ep, r) = &solved[m];
            let e = fragment_energy(ep, &r.rdm1, &r.rdm2)?;
            worst = worst.max((e - state.fragments[c].energy).abs());
        }
    }
    Ok(worst)
}
