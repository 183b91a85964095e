use std::path::{Path, PathBuf};

use clap::Subcommand;
use dmet_core::analysis::{exchange_couplings, fm_afii_gap, qubit_estimate, read_gap_csv, tdl_extrapolate, GapPoint};
use serde_json::{json, Value};

use crate::{write_json, CliError, Status};

#[derive(Subcommand)]
pub enum Task {
    /// FM–AFII gap (meV) from exchange couplings, or from the three
    /// magnetic-state energies per formula unit.
    Gap {
        #[arg(long, allow_hyphen_values = true, requires = "j2", conflicts_with = "energies")]
        j1: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "j1")]
        j2: Option<f64>,
        /// E_FM E_AFI E_AFII
        #[arg(long, num_args = 3, value_names = ["E_FM", "E_AFI", "E_AFII"], allow_hyphen_values = true)]
        energies: Option<Vec<f64>>,
    },
    /// Thermodynamic-limit gap from `n_k:gap_mev` points or a CSV series.
    Tdl {
        #[arg(value_parser = parse_gap_point)]
        points: Vec<GapPoint>,
        #[arg(long, conflicts_with = "points")]
        csv: Option<PathBuf>,
    },
    /// Qubits without and with embedding.
    Qubits { n_orb_cell: u64, n_k: u64, max_fragment: u64 },
}

fn parse_gap_point(s: &str) -> Result<GapPoint, String> {
    let (n, g) = s.split_once(':').ok_or_else(|| format!("expected n_k:gap_mev, got {s:?}"))?;
    let n_k = n.trim().parse().map_err(|e| format!("n_k in {s:?}: {e}"))?;
    let gap_mev = g.trim().parse().map_err(|e| format!("gap in {s:?}: {e}"))?;
    Ok(GapPoint { n_k, gap_mev })
}

pub fn cmd_analyze(task: &Task, out: Option<&Path>) -> Result<Status, CliError> {
    let (name, value) = match task {
        Task::Gap { j1, j2, energies } => ("gap", gap(*j1, *j2, energies.as_deref())?),
        Task::Tdl { points, csv } => {
            let series = match csv {
                Some(p) => read_gap_csv(p)?,
                None => points.clone(),
            };
            let tdl = tdl_extrapolate(&series)?;
            ("tdl", json!({"points": series, "gap_tdl_mev": tdl}))
        }
        Task::Qubits { n_orb_cell, n_k, max_fragment } => {
            if *n_k == 0 || *max_fragment == 0 {
                return Err(CliError::Validation("n_k and max_fragment must be positive".into()));
            }
            if max_fragment > n_orb_cell {
                return Err(CliError::Validation(format!("max_fragment {max_fragment} exceeds the {n_orb_cell} cell orbitals")));
            }
            ("qubits", serde_json::to_value(qubit_estimate(*n_orb_cell, *n_k, *max_fragment))?)
        }
    };
    println!("{}", serde_json::to_string(&value)?);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join(format!("analyze_{name}.json")), &value)?;
    }
    Ok(Status::Ok)
}

fn gap(j1: Option<f64>, j2: Option<f64>, energies: Option<&[f64]>) -> Result<Value, CliError> {
    let (j1, j2) = match (j1, j2, energies) {
        (Some(a), Some(b), None) => (a, b),
        (None, None, Some(&[fm, afi, afii])) => exchange_couplings(fm, afi, afii),
        _ => return Err(CliError::Validation("gap: give --j1 and --j2, or --energies E_FM E_AFI E_AFII".into())),
    };
    Ok(json!({"j1": j1, "j2": j2, "gap_mev": fm_afii_gap(j1, j2)}))
}
