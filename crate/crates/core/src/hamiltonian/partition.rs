use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DmetError, Result};

/// Embedding solver assigned to a fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Fci,
    Vqe,
    #[serde(alias = "mf", alias = "hf")]
    Meanfield,
}

impl SolverKind {
    /// Correlated solvers contribute residuals to the correlation-potential fit.
    pub fn is_correlated(self) -> bool {
        matches!(self, SolverKind::Fci | SolverKind::Vqe)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Fci => "fci",
            SolverKind::Vqe => "vqe",
            SolverKind::Meanfield => "meanfield",
        })
    }
}

impl FromStr for SolverKind {
    type Err = DmetError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fci" => Ok(SolverKind::Fci),
            "vqe" | "qc" => Ok(SolverKind::Vqe),
            "meanfield" | "mf" | "hf" => Ok(SolverKind::Meanfield),
            other => Err(DmetError::InvalidPartition(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    pub orbitals: Vec<usize>,
    pub solver: SolverKind,
}

/// Fragments that are translational copies of a representative.
///
/// Member `m` maps representative orbital `fragments[rep].orbitals[a]` onto
/// `fragments[m].orbitals[a]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceClass {
    pub representative: usize,
    pub members: Vec<usize>,
}

impl EquivalenceClass {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub fragments: Vec<Fragment>,
    pub equivalence_classes: Vec<EquivalenceClass>,
}

impl Partition {
    /// Every fragment forms its own class.
    pub fn new(fragments: Vec<Fragment>) -> Self {
        let equivalence_classes =
            (0..fragments.len()).map(|i| EquivalenceClass { representative: i, members: vec![i] }).collect();
        Partition { fragments, equivalence_classes }
    }

    pub fn with_classes(fragments: Vec<Fragment>, equivalence_classes: Vec<EquivalenceClass>) -> Self {
        Partition { fragments, equivalence_classes }
    }

    /// One fragment covering every orbital.
    pub fn whole_system(n_orb: usize, solver: SolverKind) -> Self {
        Partition::new(vec![Fragment { orbitals: (0..n_orb).collect(), solver }])
    }

    /// Consecutive blocks of `size` orbitals, all one translational class.
    pub fn uniform_blocks(n_orb: usize, size: usize, solver: SolverKind) -> Result<Self> {
        if size == 0 || !n_orb.is_multiple_of(size) {
            return Err(DmetError::InvalidPartition(format!("{n_orb} orbitals cannot be split into blocks of {size}")));
        }
        let fragments: Vec<Fragment> =
            (0..n_orb / size).map(|b| Fragment { orbitals: (b * size..(b + 1) * size).collect(), solver }).collect();
        let members = (0..fragments.len()).collect();
        Ok(Partition { fragments, equivalence_classes: vec![EquivalenceClass { representative: 0, members }] })
    }

    /// Checks disjointness, coverage of `0..n_orb`, class structure and
    /// solver consistency inside each class.
    pub fn validate(&self, n_orb: usize) -> Result<()> {
        if self.fragments.is_empty() {
            return Err(DmetError::InvalidPartition("no fragments".into()));
        }
        let mut owner = vec![None; n_orb];
        for (f, frag) in self.fragments.iter().enumerate() {
            if frag.orbitals.is_empty() {
                return Err(DmetError::InvalidPartition(format!("fragment {f} is empty")));
            }
            for &o in &frag.orbitals {
                if o >= n_orb {
                    return Err(DmetError::InvalidPartition(format!(
                        "fragment {f}: orbital {o} out of range (n_orb = {n_orb})"
                    )));
                }
                if let Some(prev) = owner[o] {
                    return Err(DmetError::InvalidPartition(format!("orbital {o} appears in fragments {prev} and {f}")));
                }
                owner[o] = Some(f);
            }
        }
        if let Some(o) = owner.iter().position(Option::is_none) {
            return Err(DmetError::InvalidPartition(format!("orbital {o} is not assigned to any fragment")));
        }
        let mut class_of = vec![None; self.fragments.len()];
        for (c, class) in self.equivalence_classes.iter().enumerate() {
            if !class.members.contains(&class.representative) {
                return Err(DmetError::InvalidPartition(format!(
                    "class {c}: representative {} is not a member",
                    class.representative
                )));
            }
            let rep = self
                .fragments
                .get(class.representative)
                .ok_or_else(|| DmetError::InvalidPartition(format!("class {c}: representative out of range")))?;
            for &m in &class.members {
                let frag = self
                    .fragments
                    .get(m)
                    .ok_or_else(|| DmetError::InvalidPartition(format!("class {c}: member {m} out of range")))?;
                if frag.orbitals.len() != rep.orbitals.len() {
                    return Err(DmetError::InvalidPartition(format!(
                        "class {c}: fragment {m} has {} orbitals, representative has {}",
                        frag.orbitals.len(),
                        rep.orbitals.len()
                    )));
                }
                if frag.solver != rep.solver {
                    return Err(DmetError::InvalidPartition(format!("class {c}: fragment {m} uses a different solver")));
                }
                if let Some(prev) = class_of[m] {
                    return Err(DmetError::InvalidPartition(format!("fragment {m} is in classes {prev} and {c}")));
                }
                class_of[m] = Some(c);
            }
        }
        if let Some(f) = class_of.iter().position(Option::is_none) {
            return Err(DmetError::InvalidPartition(format!("fragment {f} belongs to no equivalence class")));
        }
        Ok(())
    }

    pub fn representative(&self, class: usize) -> &Fragment {
        &self.fragments[self.equivalence_classes[class].representative]
    }
}
