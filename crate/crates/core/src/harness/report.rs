//! CSV, JSON and SVG output of an experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::plot;
use super::run::{ExperimentReport, SummaryRow};
use crate::error::Result;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn with_half(rows: &[SummaryRow]) -> Vec<serde_json::Value> {
    rows.iter()
        .map(|r| {
            json!({
                "lambda": r.lambda,
                "k1": r.k1,
                "k2": r.k2,
                "empirical_error": r.empirical_error,
                "empirical_error_half": r.empirical_error / 2.0,
                "theoretical_error": r.theoretical_error,
                "theoretical_error_half": r.theoretical_error / 2.0,
                "trials": r.trials,
                "aborted_count": r.aborted_count,
            })
        })
        .collect()
}

/// Writes every artifact into the configured output directory and returns the
/// list of files written.
pub fn write_report(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str| -> PathBuf {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    write_csv(&emit("trials.csv"), &report.trials)?;
    if let Some(rows) = &report.clt {
        write_csv(&emit("clt_summary.csv"), rows)?;
    } else {
        write_csv(&emit("summary.csv"), &report.summary)?;
    }
    if let Some(rows) = &report.baseline_trials {
        write_csv(&emit("baseline_trials.csv"), rows)?;
    }
    if let Some(rows) = &report.baseline_summary {
        write_csv(&emit("baseline_summary.csv"), rows)?;
    }
    if let Some(rows) = &report.confusion {
        write_csv(&emit("confusion.csv"), rows)?;
    }
    if let Some(rows) = &report.lr {
        write_csv(&emit("lr_summary.csv"), rows)?;
    }

    let summary = json!({
        "experiment": cfg.experiment.name(),
        "profile": cfg.profile.to_string(),
        "n": cfg.n,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "method": cfg.method,
        "noise": cfg.noise.tag(),
        "tolerance": cfg.tolerance,
        "functionals": cfg.transform.as_ref().map(|t| json!({
            "fh": t.functionals.fh, "fhd": t.functionals.fhd, "gh": t.functionals.gh, "w4t": t.functionals.w4t,
        })),
        "summary": with_half(&report.summary),
        "baseline_summary": report.baseline_summary.as_deref().map(with_half),
        "clt": report.clt,
        "lr": report.lr,
        "checks": report.checks(),
        "warnings": report.warnings,
    });
    fs::write(emit("summary.json"), serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n")?;

    plot::render(&emit("plot.svg"), cfg, report)?;
    Ok(written)
}
