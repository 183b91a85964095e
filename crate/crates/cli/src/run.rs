use std::fs;
use std::path::Path;

use dmet_core::analysis::{mulliken_spin_density, qubit_estimate};
use dmet_core::dmet::global_density;
use dmet_core::solvers::jordan_wigner;
use dmet_core::run_dmet;
use serde_json::{json, Value};

use crate::config::{load_run_config, RunConfig};
use crate::{config_dir, write_json, CliError, Status};

pub const RESULT_SCHEMA: &str = "dmet.result/1";
const LOG_NAME: &str = "convergence.jsonl";

pub fn cmd_run(path: &Path, out: Option<&Path>) -> Result<Status, CliError> {
    let cfg = load_run_config(path)?;
    let base = config_dir(path);
    let out_dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => "out".into(),
    };
    let (status, result) = execute(&cfg, &base, &out_dir)?;
    println!("{}", serde_json::to_string(&json!({"e_cell": result["e_cell"], "converged": result["converged"], "result": out_dir.join("result.json")}))?);
    Ok(status)
}

/// Validates, runs and writes `result.json` (plus the convergence log)
/// into `out_dir`.
pub fn execute(cfg: &RunConfig, base: &Path, out_dir: &Path) -> Result<(Status, Value), CliError> {
    let ham = cfg.hamiltonian(base)?;
    let partition = cfg.partition(ham.n_orb)?;
    fs::create_dir_all(out_dir)?;
    let mut opts = cfg.dmet_options();
    opts.log_path = Some(out_dir.join(LOG_NAME));

    let state = run_dmet(&ham, &partition, &opts)?;
    let density = global_density(&ham, &partition, &state, &opts.solver)?;
    let spin = mulliken_spin_density(&density[0], &density[1], &ham.atom_map())?;
    let max_frag = partition.fragments.iter().map(|f| f.orbitals.len()).max().unwrap_or(0);
    let embedding_qubits = state.fragments.iter().map(|f| 2 * (f.orbitals.len() + f.n_bath)).max().unwrap_or(0);
    let solvers_ok = state.fragments.iter().all(|f| f.diagnostics.converged);
    let converged = state.converged && solvers_ok;

    if cfg.dump_pauli {
        for (c, rec) in state.fragments.iter().enumerate() {
            if rec.solver.is_correlated() {
                jordan_wigner(&state.embeddings[c])?.write_text(out_dir.join(format!("pauli_class{c}.txt")))?;
            }
        }
    }

    let result = json!({
        "schema": RESULT_SCHEMA,
        "converged": converged,
        "mode": opts.mode,
        "e_cell": state.e_cell,
        "mu": state.mu,
        "electron_count": state.electron_count,
        "cycles": state.history.len(),
        "u": state.u.to_nested(),
        "per_fragment": state.fragments,
        "spin_density": spin,
        "qubit_estimate": qubit_estimate(ham.n_orb as u64, 1, max_frag as u64),
        "embedding_qubits": embedding_qubits,
        "convergence_log_path": LOG_NAME,
    });
    write_json(&out_dir.join("result.json"), &result)?;
    if !converged {
        log::warn!("run did not converge (driver: {}, solvers: {solvers_ok})", state.converged);
    }
    Ok((if converged { Status::Ok } else { Status::Soft }, result))
}
