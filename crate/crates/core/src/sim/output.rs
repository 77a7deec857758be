//! CSV time series and the companion plotting script.

use std::path::{Path, PathBuf};

use crate::SimError;

use super::diagnostics::DiagnosticsRow;

pub const CSV_HEADER: [&str; 10] =
    ["t", "E_exchange", "W1inf", "E_elastic", "m1_L2", "m3_L2", "mod_dev", "tangency_res", "iters_llg", "iters_mom"];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `rows` as CSV to `path`.
pub fn write_series(rows: &[DiagnosticsRow], path: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            sci(r.t),
            sci(r.e_exchange),
            sci(r.w1inf),
            sci(r.e_elastic),
            sci(r.m1_l2),
            sci(r.m3_l2),
            sci(r.mod_dev),
            sci(r.tangency_res),
            r.iters_llg.to_string(),
            r.iters_mom.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a series written by [`write_series`].
pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRow>, SimError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(SimError::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| SimError::Config(format!("{}: row {}: bad value in column {col}", path.display(), i + 1));
        let f = |col: usize| rec[col].parse::<f64>().map_err(|_| bad(col));
        let n = |col: usize| rec[col].parse::<usize>().map_err(|_| bad(col));
        rows.push(DiagnosticsRow {
            t: f(0)?,
            e_exchange: f(1)?,
            w1inf: f(2)?,
            e_elastic: f(3)?,
            m1_l2: f(4)?,
            m3_l2: f(5)?,
            mod_dev: f(6)?,
            tangency_res: f(7)?,
            iters_llg: n(8)?,
            iters_mom: n(9)?,
        });
    }
    Ok(rows)
}

/// Path of the plotting script that accompanies `csv_path`.
pub fn plot_script_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into());
    csv_path.with_file_name(format!("{stem}_plot.py"))
}

fn plot_script(csv_name: &str) -> String {
    format!(
        r#"import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "{csv_name}")
data = np.genfromtxt(path, delimiter=",", names=True)
t = data["t"]

fig, axes = plt.subplots(1, 3, figsize=(15, 4))
axes[0].plot(t, data["E_exchange"])
axes[0].set_title("exchange energy")
axes[1].plot(t, data["W1inf"])
axes[1].set_title("max |grad m|")
axes[2].plot(t, data["m1_L2"], label="m1")
axes[2].plot(t, data["m3_L2"], label="m3")
axes[2].set_title("L2 component averages")
axes[2].legend()
for ax in axes:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig(os.path.splitext(path)[0] + ".png", dpi=150)
"#
    )
}

/// Writes the CSV and its plotting script; returns both paths.
pub fn emit_outputs(rows: &[DiagnosticsRow], path: &Path) -> Result<Vec<PathBuf>, SimError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_series(rows, path)?;
    let script = plot_script_path(path);
    let csv_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    std::fs::write(&script, plot_script(&csv_name))?;
    Ok(vec![path.to_path_buf(), script])
}
