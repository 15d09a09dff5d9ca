use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::ComparisonRow;
use crate::error::{Error, Result};
use crate::observables::{Sample, TrajectoryRecord};

use super::config::ExperimentConfig;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const STEPS_CSV: &str = "steps.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const METADATA_JSON: &str = "metadata.json";
pub const ERROR_JSON: &str = "error.json";
pub const CHECKPOINT_BIN: &str = "checkpoint.bin";

/// Shortest round-trip text; `NaN` for undefined entries.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("malformed CSV: {other:?}")),
    }
}

/// Long-format observables: `config_hash,time,key,index,value`.
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["config_hash", "time", "key", "index", "value"]).map_err(csv_err)?;
    let hash = &record.metadata.config_hash;
    for s in &record.samples {
        let t = fmt_f64(s.time);
        for (k, v) in &s.values {
            for (i, x) in v.iter().enumerate() {
                w.write_record([hash.as_str(), &t, k, &(i + 1).to_string(), &fmt_f64(*x)]).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory CSV back into samples; returns the config hash.
pub fn read_trajectory_csv(path: &Path) -> Result<(String, Vec<Sample>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut hash = String::new();
    let mut samples: Vec<Sample> = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).ok_or_else(|| Error::Config(format!("short row in {}", path.display())));
        let num = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|_| Error::Config(format!("bad number in {}", path.display())))
        };
        hash = field(0)?.to_string();
        let time = num(1)?;
        let key = field(2)?.to_string();
        let index: usize = field(3)?.parse().map_err(|_| Error::Config("bad index".into()))?;
        let value = num(4)?;
        if samples.last().is_none_or(|s| s.time.to_bits() != time.to_bits()) {
            samples.push(Sample { time, values: BTreeMap::new() });
        }
        let v = samples.last_mut().unwrap().values.entry(key).or_default();
        if index != v.len() + 1 {
            return Err(Error::Config(format!("indices out of order in {}", path.display())));
        }
        v.push(value);
    }
    Ok((hash, samples))
}

pub fn write_steps_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "config_hash",
        "time",
        "krylov_dim",
        "krylov_error",
        "r2_bound",
        "infidelity_bound",
        "discarded_weight",
        "vector_discarded",
        "max_bond",
    ])
    .map_err(csv_err)?;
    let hash = record.metadata.config_hash.as_str();
    for d in &record.steps {
        w.write_record([
            hash,
            &fmt_f64(d.time),
            &d.krylov_dim.to_string(),
            &fmt_f64(d.krylov_error),
            &fmt_f64(d.r2_bound),
            &fmt_f64(d.infidelity_bound),
            &fmt_f64(d.discarded_weight),
            &fmt_f64(d.vector_discarded),
            &d.max_bond.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `defect_hash,clean_hash,time,key,index,defect,prediction,clean,deviation`.
pub fn write_comparison_csv(path: &Path, defect_hash: &str, clean_hash: &str, rows: &[(String, ComparisonRow)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["defect_hash", "clean_hash", "time", "key", "index", "defect", "prediction", "clean", "deviation"])
        .map_err(csv_err)?;
    for (key, r) in rows {
        w.write_record([
            defect_hash,
            clean_hash,
            &fmt_f64(r.time),
            key,
            &r.index.to_string(),
            &fmt_f64(r.defect),
            &fmt_f64(r.prediction),
            &fmt_f64(r.clean),
            &fmt_f64(r.deviation),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer for reports.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar next to the trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub config_hash: String,
    pub complete: bool,
    pub representation: String,
    pub samples: usize,
    pub steps: usize,
    pub final_time: f64,
    pub max_infidelity_bound: f64,
    pub max_bond: usize,
    pub crate_version: String,
    pub config: ExperimentConfig,
}

impl RunSidecar {
    pub fn new(config: &ExperimentConfig, record: &TrajectoryRecord) -> Self {
        RunSidecar {
            config_hash: config.hash(),
            complete: record.complete,
            representation: record.metadata.representation.clone(),
            samples: record.samples.len(),
            steps: record.steps.len(),
            final_time: record.samples.last().map_or(0.0, |s| s.time),
            max_infidelity_bound: record.steps.iter().map(|d| d.infidelity_bound).fold(0.0, f64::max),
            max_bond: record.steps.iter().map(|d| d.max_bond).max().unwrap_or(0),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<RunSidecar> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Machine-readable record of a failed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
    /// Time reached before the failure, when known.
    pub time: Option<f64>,
}

impl ErrorRecord {
    pub fn new(e: &Error) -> Self {
        let (kind, time) = match e {
            Error::Incomplete { time, source, .. } => (source.kind(), Some(*time)),
            _ => (e.kind(), None),
        };
        ErrorRecord { kind: kind.to_string(), exit_code: e.exit_code(), message: e.to_string(), time }
    }
}
