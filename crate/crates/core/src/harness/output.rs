use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::BerRecord;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "modulation",
    "ebn0_db",
    "penalty_db",
    "bits",
    "errors",
    "ber",
    "ci_low",
    "ci_high",
    "seed",
];

/// Persisted sweep: configuration, records and provenance stamps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub config: ExperimentConfig,
    pub records: Vec<BerRecord>,
    pub version: String,
    pub started_utc: String,
}

pub fn version_string() -> String {
    format!("onebit-core {}", env!("CARGO_PKG_VERSION"))
}

/// RFC 3339 UTC time; `SOURCE_DATE_EPOCH` (seconds) overrides the clock so
/// outputs can be reproduced byte for byte.
pub fn started_utc() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok());
    let t = match secs.and_then(|s| chrono::DateTime::from_timestamp(s, 0)) {
        Some(t) => t,
        None => chrono::Utc::now(),
    };
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn write_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.scheme.name().to_string(),
            r.modulation.name().to_string(),
            r.ebn0_db.to_string(),
            r.penalty_db.to_string(),
            r.bits.to_string(),
            r.errors.to_string(),
            r.ber.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_json(result: &ResultFile, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(result)? + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<ResultFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""BER versus Eb/N0 on a log axis, one curve per (scheme, modulation).

usage: plot_ber.py [ber.csv] [ber.png]
"""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else "ber.csv"
dst = sys.argv[2] if len(sys.argv) > 2 else "ber.png"

curves = defaultdict(list)
with open(src, newline="") as f:
    for row in csv.DictReader(f):
        curves[(row["scheme"], row["modulation"])].append(
            (float(row["ebn0_db"]), float(row["ber"]), float(row["ci_low"]), float(row["ci_high"]))
        )

fig, ax = plt.subplots(figsize=(6, 4.5))
for (scheme, modulation), pts in sorted(curves.items()):
    pts.sort()
    x = [p[0] for p in pts]
    y = [max(p[1], 1e-9) for p in pts]
    lo = [max(p[1] - p[2], 0.0) for p in pts]
    hi = [max(p[3] - p[1], 0.0) for p in pts]
    ax.errorbar(x, y, yerr=[lo, hi], marker="o", capsize=3, label=f"{scheme} ({modulation})")
ax.set_yscale("log")
ax.set_xlabel("Eb/N0 (dB)")
ax.set_ylabel("BER")
ax.grid(True, which="both", alpha=0.3)
if curves:
    ax.legend()
fig.tight_layout()
fig.savefig(dst, dpi=120)
"#;

pub fn write_plot_script(path: &Path) -> Result<()> {
    std::fs::write(path, PLOT_SCRIPT)?;
    Ok(())
}

/// Paths of the three sweep artifacts inside `dir`.
pub fn output_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("ber.csv"), dir.join("ber.json"), dir.join("plot_ber.py"))
}

/// Writes CSV, JSON and the plot script into `dir`.
pub fn emit_outputs(result: &ResultFile, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (csv, json, plot) = output_paths(dir);
    write_csv(&result.records, &csv)?;
    write_json(result, &json)?;
    write_plot_script(&plot)
}
