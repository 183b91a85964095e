use dmet_core::dmet::{class_consistency, CycleRecord};
use dmet_core::solvers::fci::fci_energy;
use dmet_core::{build_hubbard, run_dmet, DmetMode, DmetOptions, EquivalenceClass, Fragment, Guess, Partition, SolverKind};

fn sc(guess: Guess) -> DmetOptions {
    DmetOptions { mode: DmetMode::Selfconsistent, guess, ..Default::default() }
}

fn pairs(n: usize, solver: impl Fn(usize) -> SolverKind) -> Vec<Fragment> {
    (0..n / 2).map(|b| Fragment { orbitals: vec![2 * b, 2 * b + 1], solver: solver(b) }).collect()
}

#[test]
fn four_site_ring_chemical_potential_restores_electron_count() {
    let ham = build_hubbard(4, 1.0, 4.0, true, 2, 2).unwrap();
    let p = Partition::uniform_blocks(4, 2, SolverKind::Fci).unwrap();
    let st = run_dmet(&ham, &p, &DmetOptions { guess: Guess::Afm, ..Default::default() }).unwrap();
    assert!((st.electron_count - 4.0).abs() < 1e-6, "{}", st.electron_count);
}

#[test]
fn doped_ring_bracket_straddles_target() {
    // 8 sites, 6 electrons: the embeddings at mu = 0 over- or under-fill
    let ham = build_hubbard(8, 1.0, 4.0, true, 3, 3).unwrap();
    let p = Partition::uniform_blocks(8, 2, SolverKind::Fci).unwrap();
    let st = run_dmet(&ham, &p, &sc(Guess::Core)).unwrap();
    for record in &st.history {
        assert!((record.electron_count - 6.0).abs() < 1e-6, "cycle {}: {}", record.cycle, record.electron_count);
        if let Some([lo, hi, flo, fhi]) = record.mu_bracket {
            assert!(lo != hi);
            assert!(flo.signum() != fhi.signum() || flo.abs() < 1e-6 || fhi.abs() < 1e-6);
        }
    }
    assert!(st.history.iter().any(|r| r.mu_bracket.is_some()), "mu never needed fitting");
}

#[test]
fn ten_site_potential_is_uniform_and_sublattice_antisymmetric() {
    let ham = build_hubbard(10, 1.0, 4.0, true, 5, 5).unwrap();
    let p = Partition::new(pairs(10, |_| SolverKind::Fci));
    let st = run_dmet(&ham, &p, &sc(Guess::Afm)).unwrap();
    assert!(st.converged);
    let first = &st.u.blocks[0];
    for block in &st.u.blocks {
        for s in 0..2 {
            assert!(dmet_core::linalg::max_abs(&(&block[s] - &first[s])) < 1e-4);
        }
    }
    let [ua, ub] = first;
    assert!((ua[(0, 0)] - ub[(1, 1)]).abs() < 1e-4, "{ua} {ub}");
    assert!((ua[(1, 1)] - ub[(0, 0)]).abs() < 1e-4, "{ua} {ub}");
    assert!((ua[(0, 1)] - ub[(0, 1)]).abs() < 1e-4, "{ua} {ub}");
}

#[test]
fn ten_site_cell_energy_within_five_percent_of_fci() {
    let ham = build_hubbard(10, 1.0, 4.0, true, 5, 5).unwrap();
    let p = Partition::uniform_blocks(10, 2, SolverKind::Fci).unwrap();
    let st = run_dmet(&ham, &p, &sc(Guess::Afm)).unwrap();
    let exact = fci_energy(&ham).unwrap();
    assert!(((st.e_cell - exact) / exact).abs() < 0.05, "{} vs {exact}", st.e_cell);
    assert!(class_consistency(&ham, &p, &st, &Default::default()).unwrap() < 1e-9);
    let fit = st.last_ufit.as_ref().unwrap();
    assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn modes_agree_when_fit_stays_at_zero() {
    let ham = build_hubbard(6, 1.0, 0.0, true, 3, 3).unwrap();
    let p = Partition::uniform_blocks(6, 2, SolverKind::Fci).unwrap();
    let one = run_dmet(&ham, &p, &DmetOptions::default()).unwrap();
    let sc = run_dmet(&ham, &p, &sc(Guess::Core)).unwrap();
    assert_eq!(sc.history[0].du_inf, Some(0.0));
    assert!((one.e_cell - sc.e_cell).abs() < 1e-9);
}

#[test]
fn mixed_solvers_assemble_cell_energy() {
    let ham = build_hubbard(8, 1.0, 2.0, true, 4, 4).unwrap();
    let frags = pairs(8, |b| if b < 2 { SolverKind::Fci } else { SolverKind::Meanfield });
    let classes = vec![
        EquivalenceClass { representative: 0, members: vec![0, 1] },
        EquivalenceClass { representative: 2, members: vec![2, 3] },
    ];
    let p = Partition::with_classes(frags, classes);
    let st = run_dmet(&ham, &p, &sc(Guess::Afm)).unwrap();
    let sum: f64 = st.fragments.iter().map(|f| f.multiplicity as f64 * f.energy).sum::<f64>() + ham.e_const;
    assert_eq!(sum.to_bits(), st.e_cell.to_bits());
    // the mean-field class never receives a potential
    assert!(st.u.blocks[1].iter().all(|b| b.iter().all(|&x| x == 0.0)));
}

#[test]
fn convergence_log_has_one_record_per_cycle() {
    let ham = build_hubbard(6, 1.0, 4.0, true, 3, 3).unwrap();
    let p = Partition::uniform_blocks(6, 2, SolverKind::Fci).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let opts = DmetOptions { log_path: Some(path.clone()), ..sc(Guess::Afm) };
    let st = run_dmet(&ham, &p, &opts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), st.history.len());
    for (i, v) in lines.iter().enumerate() {
        for key in ["cycle", "mu", "L", "du_inf", "e_cell", "per_fragment"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["cycle"], i + 1);
    }
    let _: &[CycleRecord] = &st.history;
}

#[test]
fn whole_system_fragment_is_exact_in_both_modes() {
    let ham = build_hubbard(4, 1.0, 8.0, true, 2, 2).unwrap();
    let p = Partition::whole_system(4, SolverKind::Fci);
    let exact = fci_energy(&ham).unwrap();
    for mode in [DmetMode::Oneshot, DmetMode::Selfconsistent] {
        let st = run_dmet(&ham, &p, &DmetOptions { mode, ..Default::default() }).unwrap();
        assert!((st.e_cell - exact).abs() < 1e-8, "{mode:?}");
    }
}
