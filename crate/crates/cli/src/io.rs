// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and the JSON document formats the CLI reads and writes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use inspect_core::ObservationMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reads a delimiter-separated numeric matrix. Rows are coordinates and
/// columns are time points unless `transpose` is set. Ragged rows and
/// non-numeric cells are reported with their 1-based location.
pub fn read_matrix(
    path: &Path,
    delimiter: char,
    header: bool,
    transpose: bool,
) -> Result<ObservationMatrix, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("read error in {}: {e}", path.display())))?;
        if line_no == 0 && header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col_no, cell) in line.split(delimiter).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "non-numeric cell {:?} at row {}, column {} of {}",
                    cell.trim(),
                    line_no + 1,
                    col_no + 1,
                    path.display()
                ))
            })?;
            row.push(v);
        }
        if width == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(CliError::Data(format!(
                "ragged input: row {} of {} has {} columns, expected {width}",
                line_no + 1,
                path.display(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(CliError::Data(format!("{} contains no data", path.display())));
    }
    let (r, c) = (rows.len(), width);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let values = Array2::from_shape_vec((r, c), flat)
        .map_err(|e| CliError::Data(format!("shape error: {e}")))?;
    let values = if transpose { values.reversed_axes().as_standard_layout().to_owned() } else { values };
    ObservationMatrix::new(values).map_err(|e| CliError::Data(e.to_string()))
}

/// Writes a matrix in the same row-per-coordinate CSV layout.
pub fn write_matrix(path: &Path, values: &Array2<f64>, delimiter: char) -> Result<(), CliError> {
    let mut out = fs::File::create(path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
    let mut buf = String::new();
    for row in values.outer_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                buf.push(delimiter);
            }
            buf.push_str(&format!("{v}"));
            first = false;
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// One detected changepoint in a report.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ReportChangepoint {
    pub location: usize,
    pub score: f64,
    pub interval: [usize; 2],
}

/// Fully resolved configuration echoed into the report.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ReportConfig {
    pub lambda: f64,
    pub xi: Option<f64>,
    pub beta: f64,
    pub q: usize,
    pub seed: u64,
    pub method: String,
    pub nulls: usize,
    pub threads: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ReportNoise {
    pub sigma_hat: Vec<f64>,
    pub constant_rows: Vec<usize>,
}

#[derive(Serialize, Deserialize, Debug, Clone, Default)]
pub struct ReportTimings {
    pub read_ms: f64,
    pub normalize_ms: f64,
    pub calibrate_ms: f64,
    pub detect_ms: f64,
    pub total_ms: f64,
}

/// The detection report. Field order is fixed so serialisation is
/// byte-stable for a fixed seed (timings aside).
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct Report {
    pub version: String,
    pub mode: String,
    pub n: usize,
    pub p: usize,
    pub changepoints: Vec<ReportChangepoint>,
    pub config: ReportConfig,
    pub noise: ReportNoise,
    pub warnings: Vec<String>,
    pub timings: ReportTimings,
}

/// Ground-truth sidecar written next to simulated data.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TruthSidecar {
    pub n: usize,
    pub p: usize,
    pub changepoints: Vec<usize>,
    pub k: usize,
    pub varthetas: Vec<f64>,
    pub overlap: Option<String>,
    pub noise: String,
    pub sigma2: f64,
    pub rho: Option<f64>,
    pub shift_radius: Option<usize>,
    pub seed: u64,
}

/// A changepoint list extracted from either a detection report or a truth
/// sidecar.
pub struct ChangepointList {
    pub n: usize,
    pub changepoints: Vec<usize>,
}

pub fn read_changepoint_list(path: &Path) -> Result<ChangepointList, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(report) = serde_json::from_str::<Report>(&text) {
        return Ok(ChangepointList {
            n: report.n,
            changepoints: report.changepoints.iter().map(|c| c.location).collect(),
        });
    }
    if let Ok(truth) = serde_json::from_str::<TruthSidecar>(&text) {
        return Ok(ChangepointList { n: truth.n, changepoints: truth.changepoints });
    }
    // minimal schema: {"n": .., "changepoints": [..]}
    #[derive(Deserialize)]
    struct Minimal {
        n: usize,
        changepoints: Vec<usize>,
    }
    let minimal: Minimal = serde_json::from_str(&text).map_err(|e| {
        CliError::Data(format!(
            "{} is neither a detection report nor a changepoint list: {e}",
            path.display()
        ))
    })?;
    Ok(ChangepointList { n: minimal.n, changepoints: minimal.changepoints })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
