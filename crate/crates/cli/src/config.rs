//! Run and scan configurations. Both are JSON with a versioned `schema`
//! field; unknown keys are rejected with file:line:column diagnostics.

use std::fs;
use std::path::{Path, PathBuf};

use dmet_core::hamiltonian::load_orbital_labels;
use dmet_core::solvers::SolverOptions;
use dmet_core::{build_hubbard, DmetMode, DmetOptions, EquivalenceClass, Fragment, Guess, Hamiltonian, Partition, SolverKind};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub const RUN_SCHEMA: &str = "dmet.run/1";
pub const SCAN_SCHEMA: &str = "dmet.scan/1";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub hamiltonian: HamiltonianSource,
    #[serde(default)]
    pub electrons: Option<Electrons>,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub mode: DmetMode,
    #[serde(default = "default_guess")]
    pub guess: Guess,
    #[serde(default)]
    pub solver_options: SolverOptions,
    #[serde(default)]
    pub convergence: Convergence,
    /// Relative to the config file; `--out` takes precedence.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write each correlated representative's qubit Hamiltonian as text.
    #[serde(default)]
    pub dump_pauli: bool,
}

fn default_guess() -> Guess {
    Guess::Core
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum HamiltonianSource {
    Hubbard(HubbardSpec),
    Fcidump {
        path: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubbardSpec {
    pub sites: usize,
    #[serde(default = "unit")]
    pub t: f64,
    pub u: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Electrons {
    pub alpha: usize,
    pub beta: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(default)]
    pub fragments: Option<Vec<Fragment>>,
    #[serde(default)]
    pub equivalence_classes: Option<Vec<EquivalenceClass>>,
    /// Shorthand: consecutive blocks of `size` orbitals in one class.
    #[serde(default)]
    pub uniform_blocks: Option<UniformBlocks>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBlocks {
    pub size: usize,
    pub solver: SolverKind,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Convergence {
    pub max_cycles: Option<usize>,
    pub du_tol: Option<f64>,
    pub de_tol: Option<f64>,
    pub mu_tol: Option<f64>,
    pub mu_step: Option<f64>,
    pub mu_max_expansions: Option<usize>,
    pub ufit_max_iter: Option<usize>,
    pub ufit_step_tol: Option<f64>,
    pub ufit_fd_step: Option<f64>,
    pub bath_threshold: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schema: String,
    /// A run configuration without `schema`; each point supplies the
    /// Hamiltonian (and optionally electron counts).
    pub base: serde_json::Map<String, serde_json::Value>,
    pub points: Vec<ScanPoint>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanPoint {
    pub parameter: f64,
    pub hamiltonian: serde_json::Value,
    #[serde(default)]
    pub electrons: Option<serde_json::Value>,
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn check_schema(path: &Path, got: &str, want: &str) -> Result<(), CliError> {
    if got != want {
        return Err(CliError::Validation(format!("{}: schema is {got:?}, expected {want:?}", path.display())));
    }
    Ok(())
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = parse_json(path, &read(path)?)?;
    check_schema(path, &cfg.schema, RUN_SCHEMA)?;
    Ok(cfg)
}

pub fn load_scan_config(path: &Path) -> Result<ScanConfig, CliError> {
    let cfg: ScanConfig = parse_json(path, &read(path)?)?;
    check_schema(path, &cfg.schema, SCAN_SCHEMA)?;
    if cfg.points.is_empty() {
        return Err(CliError::Validation(format!("{}: scan has no points", path.display())));
    }
    Ok(cfg)
}

impl ScanConfig {
    /// Run configuration of point `i`; diagnostics point at the scan file.
    pub fn point_config(&self, path: &Path, i: usize) -> Result<RunConfig, CliError> {
        let point = &self.points[i];
        let mut obj = self.base.clone();
        obj.insert("schema".into(), RUN_SCHEMA.into());
        obj.insert("hamiltonian".into(), point.hamiltonian.clone());
        if let Some(e) = &point.electrons {
            obj.insert("electrons".into(), e.clone());
        }
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| CliError::Validation(format!("{}: point {i}: {e}", path.display())))
    }
}

impl RunConfig {
    /// Paths inside the config are taken relative to `base_dir`.
    pub fn hamiltonian(&self, base_dir: &Path) -> Result<Hamiltonian, CliError> {
        let ham = match &self.hamiltonian {
            HamiltonianSource::Hubbard(h) => {
                let (na, nb) = match self.electrons {
                    Some(e) => (e.alpha, e.beta),
                    None => (h.sites.div_ceil(2), h.sites / 2),
                };
                build_hubbard(h.sites, h.t, h.u, h.periodic, na, nb)?
            }
            HamiltonianSource::Fcidump { path, labels } => {
                let full = base_dir.join(path);
                let mut ham = Hamiltonian::load_fcidump(&full).map_err(|e| CliError::Validation(format!("{}: {e}", full.display())))?;
                if let Some(e) = self.electrons {
                    ham = Hamiltonian::new(e.alpha, e.beta, ham.e_const, ham.h, ham.g)?;
                }
                if let Some(l) = labels {
                    let full = base_dir.join(l);
                    let labels = load_orbital_labels(&full).map_err(|e| CliError::Validation(format!("{}: {e}", full.display())))?;
                    ham = ham.with_labels(labels)?;
                }
                ham
            }
        };
        Ok(ham)
    }

    /// Partition checked against the Hamiltonian size.
    pub fn partition(&self, n_orb: usize) -> Result<Partition, CliError> {
        let p = &self.partition;
        let partition = match (&p.fragments, &p.uniform_blocks) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation("partition: give either fragments or uniform_blocks, not both".into()))
            }
            (None, None) => return Err(CliError::Validation("partition: fragments or uniform_blocks required".into())),
            (None, Some(b)) => {
                if p.equivalence_classes.is_some() {
                    return Err(CliError::Validation("partition: uniform_blocks defines its own equivalence class".into()));
                }
                Partition::uniform_blocks(n_orb, b.size, b.solver)?
            }
            (Some(frags), None) => {
                for (f, frag) in frags.iter().enumerate() {
                    if let Some(&o) = frag.orbitals.iter().find(|&&o| o >= n_orb) {
                        return Err(CliError::Validation(format!(
                            "partition: fragment {f} has orbital {o} out of range (the Hamiltonian has {n_orb} orbitals)"
                        )));
                    }
                }
                match &p.equivalence_classes {
                    Some(classes) => Partition::with_classes(frags.clone(), classes.clone()),
                    None => Partition::new(frags.clone()),
                }
            }
        };
        partition.validate(n_orb)?;
        Ok(partition)
    }

    pub fn dmet_options(&self) -> DmetOptions {
        let mut o = DmetOptions { mode: self.mode, guess: self.guess.clone(), solver: self.solver_options.clone(), ..Default::default() };
        let c = &self.convergence;
        macro_rules! apply {
            ($($field:ident),*) => { $( if let Some(v) = c.$field { o.$field = v; } )* };
        }
        apply!(max_cycles, du_tol, de_tol, mu_tol, mu_step, mu_max_expansions, ufit_max_iter, ufit_step_tol, ufit_fd_step, bath_threshold);
        o
    }
}
