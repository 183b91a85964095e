//! FCIDUMP reader and writer.
//!
//! Header `&FCI NORB=n,NELEC=m,MS2=s, [ORBSYM=...,] [ISYM=1,] &END` (or `/`),
//! then one `value i j k l` record per line with 1-based indices:
//! `i j k l` two-electron, `i j 0 0` one-body, `0 0 0 0` core energy.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use super::{Eri, Hamiltonian};
use crate::error::Result;

/// Duplicate records must agree to this tolerance.
pub const DUPLICATE_TOL: f64 = 1e-10;
/// Entries at or below this magnitude are not written.
pub const WRITE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FcidumpError {
    #[error("malformed FCIDUMP header: {0}")]
    Header(String),
    #[error("line {line}: malformed record: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: orbital index {index} out of range 1..={norb}")]
    IndexOutOfRange { line: usize, index: usize, norb: usize },
    #[error("line {line}: record ({i} {j} {k} {l}) = {new} conflicts with earlier value {old}")]
    Conflict { line: usize, i: usize, j: usize, k: usize, l: usize, old: f64, new: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    norb: usize,
    nelec: usize,
    ms2: i64,
}

fn parse_header(text: &str) -> Result<Header, FcidumpError> {
    let body = text.trim_start();
    let body = body
        .strip_prefix("&FCI")
        .or_else(|| body.strip_prefix("&fci"))
        .ok_or_else(|| FcidumpError::Header("missing &FCI".into()))?;
    let mut values: HashMap<String, Vec<String>> = HashMap::new();
    let mut current: Option<String> = None;
    for token in body.split([',', ' ', '\t', '\n', '\r']).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            let key = key.trim().to_ascii_uppercase();
            let entry = values.entry(key.clone()).or_default();
            if !value.trim().is_empty() {
                entry.push(value.trim().to_string());
            }
            current = Some(key);
        } else if let Some(key) = &current {
            values.get_mut(key).expect("current key present").push(token.to_string());
        } else {
            return Err(FcidumpError::Header(format!("unexpected token '{token}'")));
        }
    }
    let scalar = |key: &str| -> Result<Option<i64>, FcidumpError> {
        match values.get(key) {
            None => Ok(None),
            Some(v) if v.len() == 1 => v[0]
                .parse::<i64>()
                .map(Some)
                .map_err(|_| FcidumpError::Header(format!("{key}={} is not an integer", v[0]))),
            Some(v) => Err(FcidumpError::Header(format!("{key} expects one value, got {}", v.len()))),
        }
    };
    let norb = scalar("NORB")?.ok_or_else(|| FcidumpError::Header("NORB missing".into()))?;
    let nelec = scalar("NELEC")?.ok_or_else(|| FcidumpError::Header("NELEC missing".into()))?;
    let ms2 = scalar("MS2")?.unwrap_or(0);
    if norb < 1 || nelec < 0 {
        return Err(FcidumpError::Header(format!("NORB={norb}, NELEC={nelec} not physical")));
    }
    if (nelec + ms2) % 2 != 0 || ms2.abs() > nelec {
        return Err(FcidumpError::Header(format!("NELEC={nelec} and MS2={ms2} are inconsistent")));
    }
    if let Some(orbsym) = values.get("ORBSYM") {
        if orbsym.len() != norb as usize {
            return Err(FcidumpError::Header(format!("ORBSYM has {} entries, NORB={norb}", orbsym.len())));
        }
    }
    Ok(Header { norb: norb as usize, nelec: nelec as usize, ms2 })
}

fn parse_value(s: &str) -> Option<f64> {
    s.replace(['D', 'd'], "e").parse().ok()
}

/// Parses FCIDUMP text. Integrals are symmetrized and indices converted to
/// 0-based.
pub fn parse_fcidump(text: &str) -> Result<Hamiltonian> {
    let lines: Vec<&str> = text.lines().collect();
    let end = lines
        .iter()
        .position(|l| {
            let t = l.trim();
            t.contains("&END") || t.contains("&end") || t.contains("$END") || t == "/" || t.ends_with(" /")
        })
        .ok_or_else(|| FcidumpError::Header("header terminator (&END or /) not found".into()))?;
    let mut header_text = lines[..=end].join("\n");
    for term in ["&END", "&end", "$END"] {
        header_text = header_text.replace(term, "");
    }
    let header_text = header_text.trim_end().trim_end_matches('/');
    let header = parse_header(header_text)?;
    let n = header.norb;

    let mut h = DMatrix::zeros(n, n);
    let mut g = Eri::zeros(n);
    let mut e_const = 0.0;
    let mut seen: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();

    for (offset, raw) in lines[end + 1..].iter().enumerate() {
        let line_no = end + 2 + offset;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(FcidumpError::Record { line: line_no, message: format!("expected 5 fields, found {}", fields.len()) }.into());
        }
        let value = parse_value(fields[0])
            .ok_or_else(|| FcidumpError::Record { line: line_no, message: format!("bad value '{}'", fields[0]) })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| FcidumpError::Record { line: line_no, message: format!("bad index '{f}'") })?;
            if *slot > n {
                return Err(FcidumpError::IndexOutOfRange { line: line_no, index: *slot, norb: n }.into());
            }
        }
        let [i, j, k, l] = idx;
        // canonical orbit key
        let key = match (i, j, k, l) {
            (0, 0, 0, 0) => (0, 0, 0, 0),
            (i, j, 0, 0) if i > 0 && j > 0 => (i.max(j), i.min(j), 0, 0),
            (_, 0, 0, 0) => {
                log::debug!("line {line_no}: skipping orbital-energy record");
                continue;
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (a, b) = (i.max(j), i.min(j));
                let (c, d) = (k.max(l), k.min(l));
                if (a, b) >= (c, d) {
                    (a, b, c, d)
                } else {
                    (c, d, a, b)
                }
            }
            _ => {
                return Err(FcidumpError::Record { line: line_no, message: format!("index pattern ({i} {j} {k} {l}) not recognised") }.into())
            }
        };
        if let Some(&old) = seen.get(&key) {
            if (old - value).abs() > DUPLICATE_TOL {
                return Err(FcidumpError::Conflict { line: line_no, i, j, k, l, old, new: value }.into());
            }
            continue;
        }
        seen.insert(key, value);
        match key {
            (0, 0, 0, 0) => e_const = value,
            (a, b, 0, 0) => {
                h[(a - 1, b - 1)] = value;
                h[(b - 1, a - 1)] = value;
            }
            (a, b, c, d) => g.set(a - 1, b - 1, c - 1, d - 1, value),
        }
    }

    let n_alpha = ((header.nelec as i64 + header.ms2) / 2) as usize;
    let n_beta = ((header.nelec as i64 - header.ms2) / 2) as usize;
    Hamiltonian::new(n_alpha, n_beta, e_const, h, g)
}

pub fn load_fcidump(path: impl AsRef<Path>) -> Result<Hamiltonian> {
    let text = std::fs::read_to_string(path)?;
    parse_fcidump(&text)
}

/// Canonical FCIDUMP text: symmetry-unique entries above [`WRITE_CUTOFF`],
/// two-electron records first, then one-body, then the core energy.
pub fn format_fcidump(ham: &Hamiltonian) -> String {
    let n = ham.n_orb;
    let mut out = String::new();
    let ms2 = ham.n_alpha as i64 - ham.n_beta as i64;
    let _ = writeln!(out, "&FCI NORB={n},NELEC={},MS2={ms2},", ham.n_elec());
    let orbsym = vec!["1"; n].join(",");
    let _ = writeln!(out, " ORBSYM={orbsym},");
    let _ = writeln!(out, " ISYM=1,");
    let _ = writeln!(out, "&END");
    for (i, j, k, l, v) in ham.g.unique_entries() {
        if v.abs() > WRITE_CUTOFF {
            let _ = writeln!(out, "{} {} {} {} {}", fmt_value(v), i + 1, j + 1, k + 1, l + 1);
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = ham.h[(i, j)];
            if v.abs() > WRITE_CUTOFF {
                let _ = writeln!(out, "{} {} {} 0 0", fmt_value(v), i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{} 0 0 0 0", fmt_value(ham.e_const));
    out
}

fn fmt_value(v: f64) -> String {
    // shortest representation that parses back to the same bits
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') { s } else { format!("{s}.0") }
}

pub fn write_fcidump(ham: &Hamiltonian, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_fcidump(ham))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DmetError;
    use crate::hamiltonian::build_hubbard;

    const ONE_ORBITAL: &str = "&FCI NORB=1,NELEC=2,MS2=0,\n ORBSYM=1,\n ISYM=1,\n&END\n 1.5 1 1 1 1\n -1.0 1 1 0 0\n 0.7 0 0 0 0\n";

    #[test]
    fn reads_single_orbital_records() {
        let ham = parse_fcidump(ONE_ORBITAL).unwrap();
        assert_eq!(ham.n_orb, 1);
        assert_eq!((ham.n_alpha, ham.n_beta), (1, 1));
        assert_eq!(ham.g.get(0, 0, 0, 0), 1.5);
        assert_eq!(ham.h[(0, 0)], -1.0);
        assert_eq!(ham.e_const, 0.7);
    }

    #[test]
    fn completes_all_eight_permutations() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.25 1 2 1 2\n";
        let ham = parse_fcidump(text).unwrap();
        for (i, j, k, l) in [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)] {
            assert_eq!(ham.g.get(i, j, k, l), 0.25);
            assert_eq!(ham.g.get(k, l, i, j), 0.25);
        }
        assert_eq!(ham.g.get(0, 0, 1, 1), 0.0);
    }

    #[test]
    fn slash_terminator_and_fortran_exponents() {
        let text = "&FCI NORB=2,\n NELEC=2, MS2=0,\n /\n 2.5D-01 2 2 2 2\n -1.0E+00 2 1 0 0\n";
        let ham = parse_fcidump(text).unwrap();
        assert_eq!(ham.g.get(1, 1, 1, 1), 0.25);
        assert_eq!(ham.h[(0, 1)], -1.0);
    }

    #[test]
    fn open_shell_header_sets_spin_counts() {
        let text = "&FCI NORB=3,NELEC=3,MS2=1,\n&END\n";
        let ham = parse_fcidump(text).unwrap();
        assert_eq!((ham.n_alpha, ham.n_beta), (2, 1));
    }

    #[test]
    fn malformed_header_is_reported() {
        let err = parse_fcidump("&FCI NELEC=2,\n&END\n").unwrap_err();
        assert!(matches!(err, DmetError::Fcidump(FcidumpError::Header(_))), "{err}");
        let err = parse_fcidump("NORB=2\n").unwrap_err();
        assert!(matches!(err, DmetError::Fcidump(FcidumpError::Header(_))), "{err}");
    }

    #[test]
    fn out_of_range_index_is_reported() {
        let err = parse_fcidump("&FCI NORB=1,NELEC=2,MS2=0,\n&END\n1.0 2 1 1 1\n").unwrap_err();
        assert!(matches!(err, DmetError::Fcidump(FcidumpError::IndexOutOfRange { index: 2, norb: 1, .. })), "{err}");
    }

    #[test]
    fn duplicates_within_tolerance_pass_conflicts_fail() {
        let ok = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 1 2 1 2\n0.50000000001 2 1 2 1\n";
        assert_eq!(parse_fcidump(ok).unwrap().g.get(0, 1, 0, 1), 0.5);
        let bad = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 1 2 1 2\n0.6 2 1 1 2\n";
        let err = parse_fcidump(bad).unwrap_err();
        assert!(matches!(err, DmetError::Fcidump(FcidumpError::Conflict { line: 4, .. })), "{err}");
    }

    #[test]
    fn writes_hubbard_records() {
        let ham = build_hubbard(2, 1.0, 4.0, false, 1, 1).unwrap();
        let text = format_fcidump(&ham);
        assert!(text.contains("4.0 1 1 1 1\n"), "{text}");
        assert!(text.contains("4.0 2 2 2 2\n"), "{text}");
        assert!(text.contains("-1.0 1 2 0 0\n"), "{text}");
        assert!(text.ends_with("0.0 0 0 0 0\n"), "{text}");
    }

    #[test]
    fn zero_hamiltonian_writes_only_core_record() {
        let ham = Hamiltonian::new(1, 1, 0.0, DMatrix::zeros(2, 2), Eri::zeros(2)).unwrap();
        let text = format_fcidump(&ham);
        let body: Vec<&str> = text.lines().skip_while(|l| !l.contains("&END")).skip(1).collect();
        assert_eq!(body, vec!["0.0 0 0 0 0"]);
    }
}
