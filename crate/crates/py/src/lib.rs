//! Python bindings: Hamiltonians, partitions, the DMET driver and the
//! analysis formulas. Options cross the boundary as JSON-compatible dicts
//! serialized on the Python side.

use dmet_core::analysis;
use dmet_core::dmet::{global_density, DmetOptions};
use dmet_core::solvers::fci::fci_energy;
use dmet_core::{DmetError, EquivalenceClass, Fragment, SolverKind};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: DmetError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_kind(name: &str) -> PyResult<SolverKind> {
    serde_json::from_value(serde_json::Value::String(name.to_lowercase()))
        .map_err(|_| PyValueError::new_err(format!("unknown solver {name:?} (fci, vqe or meanfield)")))
}

#[pyclass(frozen, module = "pydmet")]
struct Hamiltonian(dmet_core::Hamiltonian);

#[pymethods]
impl Hamiltonian {
    #[staticmethod]
    #[pyo3(signature = (sites, u, t=1.0, periodic=true, n_alpha=None, n_beta=None))]
    fn hubbard(sites: usize, u: f64, t: f64, periodic: bool, n_alpha: Option<usize>, n_beta: Option<usize>) -> PyResult<Self> {
        let na = n_alpha.unwrap_or(sites.div_ceil(2));
        let nb = n_beta.unwrap_or(sites / 2);
        dmet_core::build_hubbard(sites, t, u, periodic, na, nb).map(Hamiltonian).map_err(err)
    }

    #[staticmethod]
    fn load_fcidump(path: &str) -> PyResult<Self> {
        dmet_core::Hamiltonian::load_fcidump(path).map(Hamiltonian).map_err(err)
    }

    fn write_fcidump(&self, path: &str) -> PyResult<()> {
        self.0.write_fcidump(path).map_err(err)
    }

    #[getter]
    fn n_orb(&self) -> usize {
        self.0.n_orb
    }

    #[getter]
    fn n_alpha(&self) -> usize {
        self.0.n_alpha
    }

    #[getter]
    fn n_beta(&self) -> usize {
        self.0.n_beta
    }

    #[getter]
    fn e_const(&self) -> f64 {
        self.0.e_const
    }

    fn h1(&self) -> Vec<Vec<f64>> {
        (0..self.0.n_orb).map(|i| self.0.h.row(i).iter().copied().collect()).collect()
    }

    fn eri(&self, i: usize, j: usize, k: usize, l: usize) -> PyResult<f64> {
        let n = self.0.n_orb;
        if [i, j, k, l].iter().any(|&x| x >= n) {
            return Err(PyValueError::new_err(format!("index out of range for {n} orbitals")));
        }
        Ok(self.0.g.get(i, j, k, l))
    }

    /// Exact ground-state energy in the Hamiltonian's electron sector.
    fn fci_energy(&self) -> PyResult<f64> {
        fci_energy(&self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Hamiltonian(n_orb={}, n_alpha={}, n_beta={})", self.0.n_orb, self.0.n_alpha, self.0.n_beta)
    }
}

#[pyclass(frozen, module = "pydmet")]
struct Partition(dmet_core::Partition);

#[pymethods]
impl Partition {
    /// `fragments` is a list of `(orbitals, solver)`; `classes` a list of
    /// `(representative, members)`. Without classes every fragment is its
    /// own class.
    #[new]
    #[pyo3(signature = (fragments, classes=None))]
    fn new(fragments: Vec<(Vec<usize>, String)>, classes: Option<Vec<(usize, Vec<usize>)>>) -> PyResult<Self> {
        let frags = fragments
            .into_iter()
            .map(|(orbitals, s)| Ok(Fragment { orbitals, solver: solver_kind(&s)? }))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Partition(match classes {
            Some(c) => dmet_core::Partition::with_classes(
                frags,
                c.into_iter().map(|(representative, members)| EquivalenceClass { representative, members }).collect(),
            ),
            None => dmet_core::Partition::new(frags),
        }))
    }

    #[staticmethod]
    fn uniform_blocks(n_orb: usize, size: usize, solver: &str) -> PyResult<Self> {
        dmet_core::Partition::uniform_blocks(n_orb, size, solver_kind(solver)?).map(Partition).map_err(err)
    }

    #[staticmethod]
    fn whole_system(n_orb: usize, solver: &str) -> PyResult<Self> {
        Ok(Partition(dmet_core::Partition::whole_system(n_orb, solver_kind(solver)?)))
    }

    fn validate(&self, n_orb: usize) -> PyResult<()> {
        self.0.validate(n_orb).map_err(err)
    }

    #[getter]
    fn n_fragments(&self) -> usize {
        self.0.fragments.len()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.0.equivalence_classes.len()
    }
}

#[pyclass(frozen, module = "pydmet")]
struct DmetResult {
    #[pyo3(get)]
    e_cell: f64,
    #[pyo3(get)]
    mu: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    electron_count: f64,
    #[pyo3(get)]
    cycles: usize,
    #[pyo3(get)]
    fragment_energies: Vec<f64>,
    #[pyo3(get)]
    u: Vec<[Vec<Vec<f64>>; 2]>,
    #[pyo3(get)]
    spin_density: Vec<f64>,
    json: String,
}

#[pymethods]
impl DmetResult {
    /// Per-fragment records and cycle history as a JSON string.
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!("DmetResult(e_cell={:.10}, mu={:.6}, converged={})", self.e_cell, self.mu, self.converged)
    }
}

/// `options_json` takes the same keys as the driver options (mode, guess,
/// solver, max_cycles, du_tol, ...).
#[pyfunction]
#[pyo3(signature = (ham, partition, options_json=None))]
fn run_dmet(py: Python<'_>, ham: &Hamiltonian, partition: &Partition, options_json: Option<&str>) -> PyResult<DmetResult> {
    let opts: DmetOptions = match options_json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("options: {e}")))?,
        None => DmetOptions::default(),
    };
    let (h, p) = (&ham.0, &partition.0);
    py.detach(|| {
        let st = dmet_core::run_dmet(h, p, &opts)?;
        let d = global_density(h, p, &st, &opts.solver)?;
        let spin = analysis::mulliken_spin_density(&d[0], &d[1], &h.atom_map())?;
        let json = serde_json::to_string(&serde_json::json!({"per_fragment": st.fragments, "history": st.history}))?;
        Ok(DmetResult {
            e_cell: st.e_cell,
            mu: st.mu,
            converged: st.converged,
            electron_count: st.electron_count,
            cycles: st.history.len(),
            fragment_energies: st.fragments.iter().map(|f| f.energy).collect(),
            u: st.u.to_nested(),
            spin_density: spin.literal,
            json,
        })
    })
    .map_err(err)
}

#[pyfunction]
fn exchange_couplings(e_fm: f64, e_afi: f64, e_afii: f64) -> (f64, f64) {
    analysis::exchange_couplings(e_fm, e_afi, e_afii)
}

#[pyfunction]
fn fm_afii_gap(j1: f64, j2: f64) -> f64 {
    analysis::fm_afii_gap(j1, j2)
}

/// `points` is a list of `(n_k, gap_mev)`.
#[pyfunction]
fn tdl_extrapolate(points: Vec<(u64, f64)>) -> PyResult<f64> {
    let series: Vec<_> = points.into_iter().map(|(n_k, gap_mev)| analysis::GapPoint { n_k, gap_mev }).collect();
    analysis::tdl_extrapolate(&series).map_err(err)
}

#[pyfunction]
fn qubit_estimate(n_orb_cell: u64, n_k: u64, max_fragment: u64) -> (u64, u64) {
    let q = analysis::qubit_estimate(n_orb_cell, n_k, max_fragment);
    (q.without, q.with)
}

/// Returns `(minimum, shifted_rows, diagnostic)`.
#[allow(clippy::type_complexity)]
#[pyfunction]
fn eos_analyze(rows: Vec<(f64, f64)>) -> PyResult<(Option<(f64, f64)>, Option<Vec<(f64, f64)>>, Option<String>)> {
    let rows: Vec<_> = rows.into_iter().map(|(parameter, energy)| analysis::EosRow { parameter, energy }).collect();
    let t = analysis::eos_analyze(&rows).map_err(err)?;
    let shifted = t.shifted.map(|s| s.into_iter().map(|r| (r.parameter, r.energy)).collect());
    Ok((t.minimum, shifted, t.diagnostic))
}

#[pymodule]
fn pydmet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Hamiltonian>()?;
    m.add_class::<Partition>()?;
    m.add_class::<DmetResult>()?;
    m.add_function(wrap_pyfunction!(run_dmet, m)?)?;
    m.add_function(wrap_pyfunction!(exchange_couplings, m)?)?;
    m.add_function(wrap_pyfunction!(fm_afii_gap, m)?)?;
    m.add_function(wrap_pyfunction!(tdl_extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(qubit_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(eos_analyze, m)?)?;
    Ok(())
}
