use std::path::Path;

use dmet_core::analysis::{eos_analyze, write_eos_csv, EosRow};
use rayon::prelude::*;
use serde_json::json;

use crate::config::load_scan_config;
use crate::run::execute;
use crate::{config_dir, write_json, CliError, Status};

pub fn cmd_scan(path: &Path, out: Option<&Path>, jobs: usize) -> Result<Status, CliError> {
    let scan = load_scan_config(path)?;
    let base = config_dir(path);
    // Make sure the shared part is valid before spending any compute.
    let configs: Vec<_> = (0..scan.points.len()).map(|i| scan.point_config(path, i)).collect::<Result<_, _>>()?;
    let out_dir = match (out, configs[0].output_dir.as_ref()) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => "out".into(),
    };
    std::fs::create_dir_all(&out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let dir = out_dir.join(format!("point_{i:03}"));
                let r = execute(cfg, &base, &dir);
                if let Err(e) = &r {
                    log::error!("point {i} (parameter {}): {e}", scan.points[i].parameter);
                }
                r
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut all_ok = true;
    for (i, outcome) in outcomes.iter().enumerate() {
        let parameter = scan.points[i].parameter;
        let dir = format!("point_{i:03}");
        match outcome {
            Ok((status, result)) => {
                let e = result["e_cell"].as_f64().unwrap_or(f64::NAN);
                rows.push(EosRow { parameter, energy: e });
                let converged = *status == Status::Ok;
                all_ok &= converged;
                summary.push(json!({"parameter": parameter, "dir": dir, "status": if converged { "converged" } else { "not_converged" }, "e_cell": e}));
            }
            Err(e) => {
                all_ok = false;
                summary.push(json!({"parameter": parameter, "dir": dir, "status": "failed", "error": e.to_string()}));
            }
        }
    }
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    write_eos_csv(&rows, out_dir.join("eos.csv"))?;

    let analysis = match eos_analyze(&rows) {
        Ok(table) => {
            if let Some(shifted) = &table.shifted {
                write_eos_csv(shifted, out_dir.join("eos_shifted.csv"))?;
            }
            json!({"minimum": table.minimum, "diagnostic": table.diagnostic})
        }
        Err(e) => json!({"minimum": null, "diagnostic": e.to_string()}),
    };
    if let Some(d) = analysis["diagnostic"].as_str() {
        log::warn!("eos: {d}");
    }
    write_json(&out_dir.join("scan_summary.json"), &json!({"points": summary, "eos": analysis}))?;
    println!("{}", serde_json::to_string(&json!({"rows": rows.len(), "points": scan.points.len(), "out": out_dir}))?);
    Ok(if all_ok { Status::Ok } else { Status::Soft })
}
