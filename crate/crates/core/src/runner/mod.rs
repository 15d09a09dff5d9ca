//! Configs, presets and orchestration: prepare, evolve, measure, write.
//!
//! Each run writes into `<root>/<name>-<hash>/`:
//! `trajectory.csv` (long format `config_hash,time,key,index,value`),
//! `steps.csv` (per-step certificate), `metadata.json` (sidecar with the
//! full config), `checkpoint.bin`, and `error.json` when the run failed.

mod config;
mod output;
mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    parse_observables, Background, ComparisonConfig, CouplingsConfig, Defect, DefectKind, EvolutionConfig,
    ExperimentConfig, GroundSolver, ObservablesConfig, OutputConfig, Prep, Representation, DENSE_LIMIT,
    OUTPUT_ROOT_ENV,
};
pub use output::{
    fmt_f64, read_sidecar, read_trajectory_csv, write_trajectory_csv, ErrorRecord, RunSidecar, CHECKPOINT_BIN,
    COMPARISON_CSV, ERROR_JSON, METADATA_JSON, STEPS_CSV, TRAJECTORY_CSV,
};
pub use presets::{preset, presets, Preset, PresetInfo};

use crate::analysis::{comparison_table, ComparisonRow, Kernel};
use crate::error::{param, Error, Result};
use crate::evolve::{steps_for, Evolution, ObserverSchedule};
use crate::models::{build_bh, build_tj, build_xxz, HamiltonianRep, ModelKind, PrepPotential, SectorBasis};
use crate::observables::{keys, RunMetadata, TrajectoryRecord, TIME_TOL};
use crate::states::{
    apply_hole, apply_spin_flip, domain_wall, polarized, prepare_bh_ground, GroundMethod, QuantumState,
};
use crate::symmetry::SymmetrySector;
use crate::tensornet::DmrgConfig;

/// Hamiltonian used for the time evolution.
pub fn build_hamiltonian(cfg: &ExperimentConfig) -> Result<HamiltonianRep> {
    let c = cfg.couplings.coupling_set()?;
    match cfg.model {
        ModelKind::Xxz => build_xxz(cfg.length, c.j_perp, c.j_z),
        ModelKind::Bh => build_bh(cfg.length, &c, cfg.n_max, None),
        ModelKind::Tj => build_tj(cfg.length, &c, cfg.three_site),
    }
}

fn wants_dense(cfg: &ExperimentConfig, basis: &crate::models::SiteBasis, sector: SymmetrySector) -> bool {
    match cfg.evolution.representation {
        Representation::Dense => true,
        Representation::Mps => false,
        Representation::Auto => SectorBasis::count(basis, cfg.length, sector) <= DENSE_LIMIT,
    }
}

/// Initial state with defects applied, in the configured representation.
pub fn initial_state(cfg: &ExperimentConfig, h: &HamiltonianRep) -> Result<QuantumState> {
    cfg.validate()?;
    let mut psi = match &cfg.prep {
        Prep::Product => {
            let psi = match cfg.background {
                Background::DomainWall => domain_wall(&h.basis, cfg.length)?,
                Background::Polarized => polarized(&h.basis, cfg.length)?,
            };
            if wants_dense(cfg, &h.basis, psi.sector()) {
                psi.into_dense()?
            } else {
                psi
            }
        }
        Prep::Ground { mu, solver } => {
            let c = cfg.couplings.coupling_set()?.with_mu(*mu);
            let h_prep = build_bh(cfg.length, &c, cfg.n_max, Some(PrepPotential::domain_wall(*mu)))?;
            let sector = SymmetrySector::new(&h.basis, cfg.length, cfg.length / 2, cfg.length / 2)?;
            let dense = match solver {
                GroundSolver::Auto => wants_dense(cfg, &h.basis, sector),
                GroundSolver::Dense => true,
                GroundSolver::Sweeps => false,
            };
            let method =
                if dense { GroundMethod::DenseEigensolver } else { GroundMethod::VariationalSweeps(DmrgConfig::default()) };
            let g = prepare_bh_ground(&h_prep, sector, &method)?;
            log::info!("prepared ground state, E = {:.10}", g.energy);
            g.state
        }
    };
    for d in &cfg.defects {
        psi = match d.kind {
            DefectKind::Hole => apply_hole(&psi, d.site)?,
            DefectKind::Flip => apply_spin_flip(&psi, d.site)?,
        };
    }
    // the representation may flip after the defects change the sector
    if psi.is_dense() != wants_dense(cfg, &h.basis, psi.sector()) {
        psi = if psi.is_dense() { psi.into_mps()? } else { psi.into_dense()? };
    }
    Ok(psi)
}

/// Record header for a run of `cfg`.
pub fn metadata(cfg: &ExperimentConfig, h: &HamiltonianRep, psi: &QuantumState) -> RunMetadata {
    let c = &h.couplings;
    let k = cfg.krylov();
    let mut params = BTreeMap::new();
    for (name, x) in [
        ("t", cfg.couplings.t),
        ("u", cfg.couplings.u),
        ("j_perp", c.j_perp),
        ("j_z", c.j_z),
        ("dt", k.dt),
        ("epsilon", k.epsilon),
        ("horizon", cfg.evolution.horizon),
    ] {
        params.insert(name.to_string(), x);
    }
    RunMetadata {
        name: cfg.name.clone(),
        model: format!("{:?}", cfg.model).to_lowercase(),
        length: cfg.length,
        params,
        defects: cfg.defects.iter().map(|d| format!("{:?}@{}", d.kind, d.site).to_lowercase()).collect(),
        representation: if psi.is_dense() { "dense".into() } else { "mps".into() },
        config_hash: cfg.hash(),
    }
}

/// Outcome of a finished run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub dir: PathBuf,
    pub record: TrajectoryRecord,
}

fn write_outputs(cfg: &ExperimentConfig, dir: &Path, record: &TrajectoryRecord) -> Result<()> {
    output::write_trajectory_csv(&dir.join(TRAJECTORY_CSV), record)?;
    output::write_steps_csv(&dir.join(STEPS_CSV), record)?;
    output::write_json(&dir.join(METADATA_JSON), &RunSidecar::new(cfg, record))
}

fn drive(cfg: &ExperimentConfig, dir: &Path, mut ev: Evolution<'_>) -> Result<TrajectoryRecord> {
    let k = cfg.krylov();
    let total = steps_for(cfg.evolution.horizon, k.dt)?;
    let schedule = ObserverSchedule::every(cfg.observables.stride, cfg.observables.keys.clone())?;
    let ck = dir.join(CHECKPOINT_BIN);
    let _ = fs::remove_file(dir.join(ERROR_JSON));
    match ev.run_with_checkpoints(total, &schedule, Some((&ck, cfg.outputs.checkpoint_every))) {
        Ok(()) => {
            ev.checkpoint(&ck)?;
            let record = ev.into_record();
            write_outputs(cfg, dir, &record)?;
            Ok(record)
        }
        Err(e) => {
            if let Error::Incomplete { partial, .. } = &e {
                write_outputs(cfg, dir, partial)?;
            }
            output::write_json(&dir.join(ERROR_JSON), &ErrorRecord::new(&e))?;
            Err(e)
        }
    }
}

/// Prepares, evolves and measures one configuration and writes its files.
/// Running the same config again reproduces the CSV byte for byte.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    let h = build_hamiltonian(cfg)?;
    let psi = match initial_state(cfg, &h) {
        Ok(p) => p,
        Err(e) => {
            output::write_json(&dir.join(ERROR_JSON), &ErrorRecord::new(&e))?;
            return Err(e);
        }
    };
    log::info!("{}: L = {}, {} representation, hash {}", cfg.name, cfg.length, if psi.is_dense() { "dense" } else { "mps" }, cfg.hash());
    let ev = Evolution::new(&h, psi.clone(), cfg.krylov(), metadata(cfg, &h, &psi))?;
    let record = drive(cfg, &dir, ev)?;
    if cfg.comparison.is_some() {
        compare_with_clean(cfg, &dir, &record)?;
    }
    Ok(RunOutput { config: cfg.clone(), dir, record })
}

/// Continues a run from its last checkpoint and finishes it.
pub fn resume_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.run_dir();
    let ck = dir.join(CHECKPOINT_BIN);
    if !ck.is_file() {
        return Err(Error::Lookup(format!("no checkpoint at {}", ck.display())));
    }
    let h = build_hamiltonian(cfg)?;
    let ev = Evolution::resume(&h, &ck, cfg.krylov(), Some(&cfg.hash()))?;
    log::info!("{}: resuming at t = {}", cfg.name, ev.time());
    let record = drive(cfg, &dir, ev)?;
    if cfg.comparison.is_some() {
        compare_with_clean(cfg, &dir, &record)?;
    }
    Ok(RunOutput { config: cfg.clone(), dir, record })
}

/// Record of a finished run read back from its directory.
pub fn load_run(cfg: &ExperimentConfig) -> Result<TrajectoryRecord> {
    let dir = cfg.run_dir();
    let side = read_sidecar(&dir.join(METADATA_JSON))?;
    if side.config_hash != cfg.hash() {
        return Err(Error::Lookup(format!("{} holds config {}, not {}", dir.display(), side.config_hash, cfg.hash())));
    }
    let (hash, samples) = read_trajectory_csv(&dir.join(TRAJECTORY_CSV))?;
    if !samples.is_empty() && hash != side.config_hash {
        return Err(Error::Config(format!("trajectory hash {hash} does not match its sidecar")));
    }
    Ok(TrajectoryRecord {
        metadata: RunMetadata {
            name: cfg.name.clone(),
            model: format!("{:?}", cfg.model).to_lowercase(),
            length: cfg.length,
            representation: side.representation,
            config_hash: side.config_hash,
            ..Default::default()
        },
        samples,
        steps: Vec::new(),
        complete: side.complete,
    })
}

/// The finished run for `cfg`, computed only when no complete one is on disk.
pub fn ensure_run(cfg: &ExperimentConfig) -> Result<TrajectoryRecord> {
    match load_run(cfg) {
        Ok(r) if r.complete => Ok(r),
        _ => Ok(run_experiment(cfg)?.record),
    }
}

/// Clean counterpart of a defect config: same physics, no defects.
pub fn clean_config(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let cmp = cfg.comparison.as_ref().ok_or_else(|| Error::Config(format!("run `{}` names no clean reference", cfg.name)))?;
    let mut c = cfg.clone();
    c.name = cmp.clean.clone();
    c.defects.clear();
    c.comparison = None;
    Ok(c)
}

const COMPARED_KEYS: [&str; 3] = [keys::SZ_PROFILE, keys::ZETA, keys::CHI];

/// Defect vs shifted-average prediction for every shared time.
pub fn superposition_rows(
    cfg: &ExperimentConfig,
    defect: &TrajectoryRecord,
    clean: &TrajectoryRecord,
) -> Result<Vec<(String, ComparisonRow)>> {
    let cmp = cfg.comparison.clone().unwrap_or(ComparisonConfig { clean: String::new(), shift: None, zeta_form: Default::default() });
    let kernel = match cmp.shift {
        Some(d) => Kernel::shift(d),
        None => Kernel::for_shifts(&cfg.defects.iter().map(Defect::shift).collect::<Vec<_>>()),
    };
    let mut rows = Vec::new();
    let recorded = |r: &TrajectoryRecord, k: &str| r.samples.first().is_some_and(|s| s.values.contains_key(k));
    for key in COMPARED_KEYS {
        if !recorded(defect, key) || !recorded(clean, keys::SZ_PROFILE) {
            continue;
        }
        if key != keys::SZ_PROFILE && !recorded(clean, keys::SZSZ[0]) {
            continue;
        }
        for r in comparison_table(defect, clean, &kernel, key, cmp.zeta_form)? {
            rows.push((key.to_string(), r));
        }
    }
    Ok(rows)
}

fn compare_with_clean(cfg: &ExperimentConfig, dir: &Path, record: &TrajectoryRecord) -> Result<()> {
    let clean_cfg = clean_config(cfg)?;
    let clean = ensure_run(&clean_cfg)?;
    let rows = superposition_rows(cfg, record, &clean)?;
    output::write_comparison_csv(&dir.join(COMPARISON_CSV), &cfg.hash(), &clean_cfg.hash(), &rows)
}

/// One paired value of a model comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub time: f64,
    pub key: String,
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub a_hash: String,
    pub b_hash: String,
    pub rows: Vec<PairedRow>,
    /// Largest `|a - b|` per key.
    pub max_deviation: BTreeMap<String, f64>,
}

impl ModelComparison {
    /// Largest deviation of `key` at `index` over samples with `time <= until`.
    pub fn max_at(&self, key: &str, index: usize, until: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.key == key && r.index == index && r.time <= until + TIME_TOL)
            .map(|r| r.deviation.abs())
            .fold(0.0, f64::max)
    }
}

/// Pairs `sz_profile`, `zeta` and `chi` of two finished records at shared times.
pub fn pair_records(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<ModelComparison> {
    let mut rows = Vec::new();
    let mut max_deviation = BTreeMap::new();
    for s in &a.samples {
        let Ok(t) = b.sample_at(s.time) else { continue };
        for key in COMPARED_KEYS {
            let (Ok(x), Ok(y)) = (s.get(key), t.get(key)) else { continue };
            if x.len() != y.len() {
                return Err(Error::Shape(format!("`{key}` has {} entries in one run and {} in the other", x.len(), y.len())));
            }
            for (i, (&p, &q)) in x.iter().zip(y).enumerate() {
                if p.is_nan() || q.is_nan() {
                    continue;
                }
                let d = p - q;
                let m = max_deviation.entry(key.to_string()).or_insert(0.0f64);
                *m = m.max(d.abs());
                rows.push(PairedRow { time: s.time, key: key.to_string(), index: i + 1, a: p, b: q, deviation: d });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("the two runs share no sampled times".into()));
    }
    Ok(ModelComparison { a_hash: a.metadata.config_hash.clone(), b_hash: b.metadata.config_hash.clone(), rows, max_deviation })
}

/// Runs a Bose-Hubbard config and its t-J counterpart and pairs their
/// observables. The geometry, couplings and defects must agree.
pub fn run_model_comparison(bh: &ExperimentConfig, tj: &ExperimentConfig) -> Result<ModelComparison> {
    if bh.length != tj.length {
        return param(format!("chain lengths differ: {} vs {}", bh.length, tj.length));
    }
    if bh.defects != tj.defects || bh.background != tj.background {
        return param("defects or background differ between the two configs");
    }
    let (cb, ct) = (bh.couplings.coupling_set()?, tj.couplings.coupling_set()?);
    if (cb.t_up, cb.t_down, cb.u_up, cb.u_down, cb.v) != (ct.t_up, ct.t_down, ct.u_up, ct.u_down, ct.v) {
        return param("couplings differ between the two configs");
    }
    if bh.name == tj.name {
        return param("the two configs need distinct names");
    }
    let a = run_experiment(bh)?.record;
    let b = run_experiment(tj)?.record;
    let cmp = pair_records(&a, &b)?;
    let path = bh.output_root().join(format!("compare-{}-{}.csv", bh.name, tj.name));
    output::write_table(
        &path,
        &["a_hash", "b_hash", "time", "key", "index", "a", "b", "deviation"],
        cmp.rows.iter().map(|r| {
            vec![
                cmp.a_hash.clone(),
                cmp.b_hash.clone(),
                fmt_f64(r.time),
                r.key.clone(),
                r.index.to_string(),
                fmt_f64(r.a),
                fmt_f64(r.b),
                fmt_f64(r.deviation),
            ]
        }),
    )?;
    Ok(cmp)
}

/// Deviation between the runs at two successive thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub coarse: f64,
    pub fine: f64,
    /// Largest `|a - b|` per observable key over shared times.
    pub max_deviation: BTreeMap<String, f64>,
}

impl ConvergenceLevel {
    pub fn overall(&self) -> f64 {
        self.max_deviation.values().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub levels: Vec<ConvergenceLevel>,
    /// Keys whose deviation grew from one level to the next.
    pub non_monotone: Vec<String>,
}

impl ConvergenceReport {
    pub fn monotone(&self) -> bool {
        self.non_monotone.is_empty()
    }
}

/// Largest deviation per key between two records over shared times;
/// `NaN` entries are skipped.
pub fn record_deviation(a: &TrajectoryRecord, b: &TrajectoryRecord) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for s in &a.samples {
        let Ok(t) = b.sample_at(s.time) else { continue };
        for (k, x) in &s.values {
            let Some(y) = t.values.get(k) else { continue };
            let m = out.entry(k.clone()).or_insert(0.0f64);
            for (p, q) in x.iter().zip(y) {
                if !(p.is_nan() || q.is_nan()) {
                    *m = m.max((p - q).abs());
                }
            }
        }
    }
    out
}

/// Summarizes successive threshold levels and flags keys whose deviation grows.
pub fn convergence_report(epsilons: &[f64], records: &[TrajectoryRecord]) -> Result<ConvergenceReport> {
    if epsilons.len() < 2 || epsilons.len() != records.len() {
        return param(format!("a convergence study needs at least two thresholds, got {}", epsilons.len()));
    }
    let mut levels = Vec::new();
    for i in 1..records.len() {
        levels.push(ConvergenceLevel {
            coarse: epsilons[i - 1],
            fine: epsilons[i],
            max_deviation: record_deviation(&records[i - 1], &records[i]),
        });
    }
    let mut non_monotone = Vec::new();
    for w in levels.windows(2) {
        for (k, &d) in &w[1].max_deviation {
            let prev = w[0].max_deviation.get(k).copied().unwrap_or(f64::INFINITY);
            // deviations at round-off level carry no trend
            if d > prev && d > 1e-12 && !non_monotone.contains(k) {
                non_monotone.push(k.clone());
            }
        }
    }
    Ok(ConvergenceReport { epsilons: epsilons.to_vec(), levels, non_monotone })
}

/// Runs `cfg` at each threshold (sorted from loose to tight) and compares
/// successive levels.
pub fn run_convergence_suite(cfg: &ExperimentConfig, epsilons: &[f64]) -> Result<ConvergenceReport> {
    if epsilons.len() < 2 {
        return param(format!("a convergence study needs at least two thresholds, got {}", epsilons.len()));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    eps.dedup();
    if eps.len() < 2 {
        return param("the thresholds must differ");
    }
    let mut records = Vec::new();
    for &e in &eps {
        let mut c = cfg.clone();
        c.evolution.epsilon = e;
        c.name = format!("{}-eps{e:e}", cfg.name);
        records.push(run_experiment(&c)?.record);
    }
    let report = convergence_report(&eps, &records)?;
    let path = cfg.output_root().join(format!("converge-{}.csv", cfg.name));
    output::write_table(
        &path,
        &["config_hash", "coarse_epsilon", "fine_epsilon", "key", "max_deviation"],
        report.levels.iter().flat_map(|l| {
            l.max_deviation.iter().map(|(k, d)| {
                vec![cfg.hash(), fmt_f64(l.coarse), fmt_f64(l.fine), k.clone(), fmt_f64(*d)]
            })
        }),
    )?;
    if !report.monotone() {
        log::warn!("non-monotone convergence in {:?}", report.non_monotone);
    }
    Ok(report)
}

/// Results of a preset plan.
#[derive(Clone, Debug)]
pub enum PresetOutcome {
    Runs(Vec<RunOutput>),
    Compare(Vec<ModelComparison>),
    Converge(ConvergenceReport),
}

/// Runs a preset plan with `overrides` applied to every config.
pub fn run_preset(p: &Preset, overrides: &[String]) -> Result<PresetOutcome> {
    Ok(match p {
        Preset::Runs(v) => {
            let mut out = Vec::new();
            for c in v {
                out.push(run_experiment(&c.with_overrides(overrides)?)?);
            }
            PresetOutcome::Runs(out)
        }
        Preset::Compare(v) => {
            let mut out = Vec::new();
            for (a, b) in v {
                out.push(run_model_comparison(&a.with_overrides(overrides)?, &b.with_overrides(overrides)?)?);
            }
            PresetOutcome::Compare(out)
        }
        Preset::Converge { config, epsilons } => {
            PresetOutcome::Converge(run_convergence_suite(&config.with_overrides(overrides)?, epsilons)?)
        }
    })
}

#[cfg(test)]
mod tests;
