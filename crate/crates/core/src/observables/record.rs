use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::StepDiagnostics;

/// Times closer than this are the same sample.
pub const TIME_TOL: f64 = 1e-9;

/// Observable values at one time. Arrays are indexed from 1 (site, bond or
/// distance) except for scalar keys; `NaN` marks an entry that is not
/// defined, such as a three-site current at an edge bond.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub values: BTreeMap<String, Vec<f64>>,
}

impl Sample {
    pub fn get(&self, key: &str) -> Result<&[f64]> {
        self.values
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::InsufficientData(format!("observable `{key}` not recorded at t = {}", self.time)))
    }

    /// Entry at 1-based `index`.
    pub fn at(&self, key: &str, index: usize) -> Result<f64> {
        let v = self.get(key)?;
        index
            .checked_sub(1)
            .and_then(|i| v.get(i))
            .copied()
            .ok_or_else(|| Error::InsufficientData(format!("`{key}` has no entry {index} at t = {}", self.time)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub name: String,
    pub model: String,
    pub length: usize,
    pub params: BTreeMap<String, f64>,
    pub defects: Vec<String>,
    pub representation: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub metadata: RunMetadata,
    pub samples: Vec<Sample>,
    pub steps: Vec<StepDiagnostics>,
    /// False when the run was aborted.
    pub complete: bool,
}

impl TrajectoryRecord {
    pub fn new(metadata: RunMetadata) -> Self {
        TrajectoryRecord { metadata, samples: Vec::new(), steps: Vec::new(), complete: false }
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if sample.time <= last.time + TIME_TOL {
                return Err(Error::Parameter(format!(
                    "sample times must increase: {} after {}",
                    sample.time, last.time
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn sample_at(&self, time: f64) -> Result<&Sample> {
        self.samples
            .iter()
            .find(|s| (s.time - time).abs() < TIME_TOL)
            .ok_or_else(|| Error::Lookup(format!("no sample at t = {time}")))
    }

    /// `(time, value)` pairs of one entry.
    pub fn series(&self, key: &str, index: usize) -> Result<Vec<(f64, f64)>> {
        self.samples.iter().map(|s| Ok((s.time, s.at(key, index)?))).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}
