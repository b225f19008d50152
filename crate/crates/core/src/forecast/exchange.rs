//! File exchange with external forecasting systems.
//!
//! `export_windows_for_external` writes `manifest.jsonl` (one record per
//! window) and one numeric input file per window under `inputs/`. External
//! systems answer with line-delimited `{"window_id", "perturbation",
//! "predictions"}` records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{PerturbationId, WindowSample};
use crate::error::{Error, Result};
use crate::forecast::ForecastRecord;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub window_id: String,
    pub perturbation: PerturbationId,
    /// Relative to the manifest directory.
    pub input_csv: String,
    pub image_png: Option<String>,
}

/// Writes the manifest and per-window inputs; returns the manifest path.
/// `images` maps window ids to image paths as they should appear in the
/// manifest.
pub fn export_windows_for_external(
    windows: &[WindowSample],
    images: &BTreeMap<String, String>,
    out_dir: &Path,
) -> Result<PathBuf> {
    let inputs_dir = out_dir.join("inputs");
    std::fs::create_dir_all(&inputs_dir).map_err(|e| Error::io(&inputs_dir, e))?;

    let mut sorted: Vec<&WindowSample> = windows.iter().collect();
    sorted.sort_by(|a, b| a.window_id.cmp(&b.window_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].window_id == w[1].window_id) {
        return Err(Error::Argument(format!("duplicate window id {}", w[0].window_id)));
    }

    let mut manifest = String::new();
    for w in sorted {
        let rel = format!("inputs/{}.csv", w.window_id);
        let mut body = String::from("index,value\n");
        for (i, v) in w.input.iter().enumerate() {
            let _ = writeln!(body, "{i},{v:?}");
        }
        let path = out_dir.join(&rel);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        let rec = ManifestRecord {
            window_id: w.window_id.clone(),
            perturbation: w.perturbation,
            input_csv: rel,
            image_png: images.get(&w.window_id).cloned(),
        };
        manifest.push_str(&serde_json::to_string(&rec).expect("manifest record serializes"));
        manifest.push('\n');
    }
    let path = out_dir.join(MANIFEST_FILE);
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.as_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Import {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct PredictionLine {
    window_id: String,
    perturbation: PerturbationId,
    predictions: Vec<Option<f64>>,
}

/// Reads and validates an external system's predictions against the known
/// window set (`window_id -> perturbation`). Output is sorted by window id.
pub fn import_external_predictions(
    path: &Path,
    system_id: &str,
    known: &BTreeMap<String, PerturbationId>,
    d: usize,
) -> Result<Vec<ForecastRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let err = |reason: String| Error::Import { line: line_no, reason };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        match known.get(&rec.window_id) {
            None => return Err(err(format!("unknown window_id {}", rec.window_id))),
            Some(p) if *p != rec.perturbation => {
                return Err(err(format!(
                    "window {} belongs to {p}, record says {}",
                    rec.window_id, rec.perturbation
                )))
            }
            Some(_) => {}
        }
        if !seen.insert((rec.window_id.clone(), rec.perturbation)) {
            return Err(err(format!(
                "duplicate record for ({}, {})",
                rec.window_id, rec.perturbation
            )));
        }
        if rec.predictions.len() != d {
            return Err(err(format!("expected {d} predictions, got {}", rec.predictions.len())));
        }
        let predictions = rec
            .predictions
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err("non-finite prediction".into()))?;
        out.push(ForecastRecord {
            window_id: rec.window_id,
            system_id: system_id.to_string(),
            perturbation: rec.perturbation,
            predictions,
        });
    }
    out.sort_by(|a, b| a.window_id.cmp(&b.window_id));
    Ok(out)
}
