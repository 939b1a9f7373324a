//! Line-delimited JSON reports. Every line is one self-describing record;
//! floats round-trip exactly.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::models::Arch;
use crate::projection::{Diagnostics, ProjectionMethod, ProjectionResult};
use crate::training::{EpochRecord, TrainReport};

pub fn write_jsonl<R: Serialize>(path: impl AsRef<Path>, records: &[R]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<R: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed { offset: k + 1, reason: format!("{}: line {}: {e}", path.display(), k + 1) })?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TrainLine {
    Summary {
        arch: Arch,
        dataset: String,
        epochs_run: usize,
        best_epoch: usize,
        best_val_accuracy: f64,
        test_accuracy: f64,
    },
    Epoch(EpochRecord),
}

pub fn train_report_lines(r: &TrainReport) -> Vec<TrainLine> {
    let mut lines = vec![TrainLine::Summary {
        arch: r.arch,
        dataset: r.dataset.clone(),
        epochs_run: r.epochs_run,
        best_epoch: r.best_epoch,
        best_val_accuracy: r.best_val_accuracy,
        test_accuracy: r.test_accuracy,
    }];
    lines.extend(r.history.iter().copied().map(TrainLine::Epoch));
    lines
}

pub fn train_report_from_lines(lines: Vec<TrainLine>) -> Result<TrainReport> {
    let mut summary = None;
    let mut history = Vec::new();
    for l in lines {
        match l {
            TrainLine::Summary { arch, dataset, epochs_run, best_epoch, best_val_accuracy, test_accuracy } => {
                summary = Some((arch, dataset, epochs_run, best_epoch, best_val_accuracy, test_accuracy))
            }
            TrainLine::Epoch(e) => history.push(e),
        }
    }
    let (arch, dataset, epochs_run, best_epoch, best_val_accuracy, test_accuracy) =
        summary.ok_or_else(|| Error::Malformed { offset: 0, reason: "train report has no summary line".into() })?;
    Ok(TrainReport { arch, dataset, epochs_run, history, best_epoch, best_val_accuracy, test_accuracy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum CoordLine {
    Projection { method: ProjectionMethod, num_nodes: usize, diagnostics: Diagnostics },
    Point { id: usize, x: f64, y: f64 },
}

pub fn projection_lines(p: &ProjectionResult) -> Vec<CoordLine> {
    let mut lines =
        vec![CoordLine::Projection { method: p.method, num_nodes: p.coords.len(), diagnostics: p.diagnostics.clone() }];
    lines.extend(p.coords.iter().enumerate().map(|(id, c)| CoordLine::Point { id, x: c[0], y: c[1] }));
    lines
}

pub fn projection_from_lines(lines: Vec<CoordLine>) -> Result<ProjectionResult> {
    let mut header = None;
    let mut coords = Vec::new();
    for l in lines {
        match l {
            CoordLine::Projection { method, num_nodes, diagnostics } => header = Some((method, num_nodes, diagnostics)),
            CoordLine::Point { id, x, y } => {
                if id != coords.len() {
                    return Err(Error::Malformed { offset: id, reason: "coordinate ids must be consecutive".into() });
                }
                coords.push([x, y]);
            }
        }
    }
    let (method, num_nodes, diagnostics) =
        header.ok_or_else(|| Error::Malformed { offset: 0, reason: "coordinate file has no header line".into() })?;
    if num_nodes != coords.len() {
        return Err(Error::Malformed { offset: 0, reason: format!("header says {num_nodes} points, found {}", coords.len()) });
    }
    Ok(ProjectionResult { method, coords, diagnostics })
}

/// An explanation file holds a single `explanation` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ExplanationLine {
    Explanation(Explanation),
}

pub fn explanation_from_lines(lines: Vec<ExplanationLine>) -> Result<Explanation> {
    match <[ExplanationLine; 1]>::try_from(lines) {
        Ok([ExplanationLine::Explanation(e)]) => Ok(e),
        Err(lines) => Err(Error::Malformed { offset: 0, reason: format!("expected one explanation record, found {}", lines.len()) }),
    }
}
