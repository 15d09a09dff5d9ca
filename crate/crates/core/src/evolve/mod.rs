//! Krylov time stepping with a per-step fidelity certificate.
//!
//! Each step builds a Lanczos recurrence `H K = K T + b w e_m^T + R` where
//! `R` collects the compression residuals of the Krylov vectors (zero on
//! the dense path). Integrating the error equation gives
//!
//! ```text
//! |psi(dt) - K c(dt)| <= safety * b * int |c_m| + sum_n |r_n| int |c_n|
//! ```
//!
//! with `c(s) = exp(-i T s) e_1`. Together with the final truncation this
//! bounds `r^2 = |U psi - psi'|^2 / |U psi + psi'|^2`, which must stay below
//! `epsilon`.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::krylov::VectorSpace;
use crate::models::{HamiltonianRep, ModelKind, SectorBasis, SparseOperator};
use crate::observables::{measure, ObservableSet, RunMetadata, Sample, TrajectoryRecord, TIME_TOL};
use crate::states::{DenseState, QuantumState};
use crate::tensornet::{compress_raw, compress_raw_with, CompressionReport, Mpo, Mps};

mod bound;
mod checkpoint;

use bound::{delta_max, error_bound, infidelity_of_delta, r2_of_delta, truncation_distance, weight_for_distance, Projected};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovConfig {
    pub dt: f64,
    /// Per-step bound on `r^2`.
    pub epsilon: f64,
    pub max_krylov: usize,
    /// Cap on the discarded weight of each Krylov vector; `epsilon` when
    /// absent.
    pub per_vector_budget: Option<f64>,
    /// Multiplier on the subspace tail term of the certificate.
    pub safety_factor: f64,
    /// Fraction of the allowed distance reserved for the subspace error; the
    /// rest goes to the final truncation.
    pub krylov_share: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            dt: 0.1,
            epsilon: 1e-6,
            max_krylov: 25,
            per_vector_budget: None,
            safety_factor: 10.0,
            krylov_share: 0.1,
        }
    }
}

impl KrylovConfig {
    /// Defaults with the model's usual step: 0.01 for Bose-Hubbard, 0.1 otherwise.
    pub fn for_model(kind: ModelKind) -> Self {
        let dt = if kind == ModelKind::Bh { 0.01 } else { 0.1 };
        KrylovConfig { dt, ..Default::default() }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return param(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return param(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.max_krylov < 2 {
            return param(format!("max_krylov must be at least 2, got {}", self.max_krylov));
        }
        if !(self.safety_factor >= 1.0) {
            return param(format!("safety factor must be at least 1, got {}", self.safety_factor));
        }
        if !(self.krylov_share > 0.0 && self.krylov_share < 1.0) {
            return param(format!("krylov_share must lie in (0, 1), got {}", self.krylov_share));
        }
        if let Some(b) = self.per_vector_budget {
            if !(0.0..1.0).contains(&b) {
                return param(format!("per-vector budget must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }

    fn krylov_target(&self) -> f64 {
        self.krylov_share * delta_max(self.epsilon) / 2.0
    }

    /// Discarded weight allowed when compressing `H k_n - ...` of norm `b`,
    /// where `weight` estimates `int_0^dt |c_n|`.
    fn vector_budget(&self, b: f64, weight: f64) -> f64 {
        let per = self.krylov_target() / (2.0 * self.max_krylov as f64 * (2.0 * b * weight).max(1e-300));
        (per * per).min(self.per_vector_budget.unwrap_or(self.epsilon))
    }
}

/// Per-step record of the certificate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Time at the end of the step.
    pub time: f64,
    pub krylov_dim: usize,
    /// Bound on the distance between the exact and the Krylov state.
    pub krylov_error: f64,
    pub r2_bound: f64,
    /// Bound on `1 - |<exact|step>|^2`; certified to stay below `epsilon`.
    pub infidelity_bound: f64,
    /// Weight discarded by the final truncation.
    pub discarded_weight: f64,
    /// Weight discarded summed over the Krylov vectors.
    pub vector_discarded: f64,
    pub max_bond: usize,
}

fn accuracy(delta: f64, cfg: &KrylovConfig, krylov_dim: usize) -> Error {
    Error::Accuracy {
        infidelity_bound: infidelity_of_delta(delta),
        r2_bound: r2_of_delta(delta),
        epsilon: cfg.epsilon,
        krylov_dim,
    }
}

/// One step `exp(-i H dt)` on a sector vector. The norm is preserved.
pub fn krylov_step_dense(
    psi: &DenseState,
    op: &SparseOperator,
    cfg: &KrylovConfig,
) -> Result<(DenseState, StepDiagnostics)> {
    cfg.validate()?;
    if op.dim() != psi.amps.len() {
        return Err(Error::Shape("operator and state dimensions differ".into()));
    }
    let n0 = psi.amps.norm();
    if n0 == 0.0 {
        return param("cannot evolve a zero state");
    }
    let dmax = delta_max(cfg.epsilon);
    let mut vs: Vec<Array1<C64>> = vec![psi.amps.mapv(|x| x / n0)];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut err;
    loop {
        let n = vs.len() - 1;
        let mut w = op.apply(&vs[n]);
        alpha.push(vs[n].dot(&w).re);
        for _ in 0..2 {
            for v in &vs {
                let c = VectorSpace::dot(v, &w);
                w.axpy(-c, v);
            }
        }
        let b = VectorSpace::norm(&w);
        let p = Projected::new(&alpha, &beta)?;
        let exhausted = b <= 1e-13 * (1.0 + alpha.iter().map(|a| a.abs()).fold(0.0, f64::max));
        err = if exhausted { 0.0 } else { error_bound(&p, cfg.dt, b, &[], cfg.safety_factor) };
        if exhausted || 2.0 * err <= dmax {
            let c = p.coeffs(cfg.dt);
            let mut u = Array1::<C64>::zeros(psi.amps.len());
            for (v, &cn) in vs.iter().zip(c.iter()) {
                u.axpy(cn, v);
            }
            let nu = u.norm();
            u.mapv_inplace(|x| x * (n0 / nu));
            let diag = StepDiagnostics {
                krylov_dim: vs.len(),
                krylov_error: err,
                r2_bound: r2_of_delta(2.0 * err),
                infidelity_bound: infidelity_of_delta(2.0 * err),
                ..Default::default()
            };
            return Ok((DenseState { sb: psi.sb.clone(), amps: u }, diag));
        }
        if vs.len() >= cfg.max_krylov {
            return Err(accuracy(2.0 * err, cfg, vs.len()));
        }
        w.mapv_inplace(|x| x / b);
        beta.push(b);
        vs.push(w);
    }
}

/// One step on an MPS. Krylov vectors are compressed individually and the
/// result is truncated with whatever part of the allowed distance the
/// subspace error leaves over. The output is normalized.
pub fn krylov_step_mps(psi: &Mps, h: &Mpo, cfg: &KrylovConfig) -> Result<(Mps, CompressionReport, StepDiagnostics)> {
    cfg.validate()?;
    if h.len() != psi.len() {
        return Err(Error::Shape("MPO and MPS lengths differ".into()));
    }
    let dmax = delta_max(cfg.epsilon);
    let target = cfg.krylov_target();
    let mut k0 = psi.clone();
    if k0.normalize()? == 0.0 {
        return param("cannot evolve a zero state");
    }
    let mut ks = vec![k0];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut res: Vec<f64> = Vec::new();
    let mut vec_disc = 0.0;
    let (p, err) = loop {
        let n = ks.len() - 1;
        let hk = h.apply(&ks[n])?;
        let a = ks[n].overlap(&hk)?.re;
        alpha.push(a);
        let mut terms = vec![(C64::new(1.0, 0.0), &hk), (C64::new(-a, 0.0), &ks[n])];
        if n > 0 {
            terms.push((C64::new(-beta[n - 1], 0.0), &ks[n - 1]));
        }
        let w = Mps::linear_combination(&terms)?;
        let scale = 1.0 + alpha.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let p = Projected::new(&alpha, &beta)?;
        let weight = p.abs_integrals(cfg.dt)[n];
        let compressed = match compress_raw_with(w, |b| cfg.vector_budget(b, weight)) {
            Ok((kn, rep, b)) if b > 1e-13 * scale => Some((kn, rep, b)),
            Ok(_) | Err(Error::LinAlg(_)) => None,
            Err(e) => return Err(e),
        };
        let Some((kn, rep, b)) = compressed else {
            break (p, 0.0);
        };
        let err = error_bound(&p, cfg.dt, b, &res, cfg.safety_factor);
        if err <= target {
            break (p, err);
        }
        if ks.len() >= cfg.max_krylov {
            return Err(accuracy(2.0 * err, cfg, ks.len()));
        }
        log::trace!("krylov vector {}: bond {} (raw {})", ks.len(), rep.max_bond, hk.max_bond());
        vec_disc += rep.total_discarded();
        res.push(b * truncation_distance(rep.fidelity_lower_bound));
        beta.push(b);
        ks.push(kn);
    };

    let c = p.coeffs(cfg.dt);
    let pair_budget = {
        let x = target / (2.0 * cfg.max_krylov as f64);
        x * x
    };
    let mut pair_err = 0.0;
    let mut acc = ks[0].clone();
    acc.scale(c[0]);
    for j in 1..ks.len() {
        let s = Mps::linear_combination(&[(C64::new(1.0, 0.0), &acc), (c[j], &ks[j])])?;
        if j + 1 < ks.len() {
            let (mut m, rep, nrm) = compress_raw(s, pair_budget)?;
            pair_err += nrm * truncation_distance(rep.fidelity_lower_bound);
            m.scale(C64::new(nrm, 0.0));
            acc = m;
        } else {
            acc = s;
        }
    }
    let remaining = dmax - 2.0 * err - pair_err;
    if remaining <= 0.0 {
        return Err(accuracy(2.0 * err + pair_err, cfg, ks.len()));
    }
    let budget = weight_for_distance(remaining / (1.0 + err)) * (1.0 - 1e-9);
    let (mut out, rep, nu) = compress_raw(acc, budget)?;
    out.standardize();
    let delta = 2.0 * err + pair_err + nu * truncation_distance(rep.fidelity_lower_bound);
    if infidelity_of_delta(delta) > cfg.epsilon {
        return Err(accuracy(delta, cfg, ks.len()));
    }
    let diag = StepDiagnostics {
        time: 0.0,
        krylov_dim: ks.len(),
        krylov_error: err,
        r2_bound: r2_of_delta(delta),
        infidelity_bound: infidelity_of_delta(delta),
        discarded_weight: rep.total_discarded(),
        vector_discarded: vec_disc,
        max_bond: out.max_bond(),
    };
    Ok((out, rep, diag))
}

/// Hamiltonian action matched to the state representation.
pub enum Propagator {
    Dense(SparseOperator),
    Mps(Mpo),
}

impl Propagator {
    pub fn for_state(h: &HamiltonianRep, state: &QuantumState) -> Result<Self> {
        match state {
            QuantumState::Dense(d) => Ok(Propagator::Dense(SparseOperator::from_terms(&d.sb, h.terms())?)),
            QuantumState::Mps(_) => Ok(Propagator::Mps(h.mpo().clone())),
        }
    }

    pub fn sparse(&self) -> Option<&SparseOperator> {
        match self {
            Propagator::Dense(op) => Some(op),
            Propagator::Mps(_) => None,
        }
    }
}

/// Dispatches on the representation.
pub fn krylov_step(state: &QuantumState, prop: &Propagator, cfg: &KrylovConfig) -> Result<(QuantumState, StepDiagnostics)> {
    match (state, prop) {
        (QuantumState::Dense(d), Propagator::Dense(op)) => {
            let (out, diag) = krylov_step_dense(d, op, cfg)?;
            Ok((QuantumState::Dense(out), diag))
        }
        (QuantumState::Mps(m), Propagator::Mps(w)) => {
            let (out, _, diag) = krylov_step_mps(m, w, cfg)?;
            Ok((QuantumState::Mps(out), diag))
        }
        _ => param("propagator does not match the state representation"),
    }
}

/// Steps at which observables are recorded. Samples only fall on multiples of `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverSchedule {
    stride: Option<u64>,
    steps: BTreeSet<u64>,
    pub observables: ObservableSet,
}

impl ObserverSchedule {
    /// Every `stride` steps, including step 0.
    pub fn every(stride: u64, observables: ObservableSet) -> Result<Self> {
        if stride == 0 {
            return param("sampling stride must be positive");
        }
        Ok(ObserverSchedule { stride: Some(stride), steps: BTreeSet::new(), observables })
    }

    /// At explicit times, each of which must be a multiple of `dt`.
    pub fn at_times(times: &[f64], dt: f64, observables: ObservableSet) -> Result<Self> {
        let mut steps = BTreeSet::new();
        for &t in times {
            let n = (t / dt).round();
            if t < -TIME_TOL || (n * dt - t).abs() > TIME_TOL {
                return param(format!("sample time {t} is not a non-negative multiple of dt = {dt}"));
            }
            steps.insert(n as u64);
        }
        Ok(ObserverSchedule { stride: None, steps, observables })
    }

    pub fn includes(&self, step: u64) -> bool {
        self.stride.is_some_and(|s| step.is_multiple_of(s)) || self.steps.contains(&step)
    }
}

/// Number of steps covering `horizon`, which must be a multiple of `dt`.
pub fn steps_for(horizon: f64, dt: f64) -> Result<u64> {
    let n = (horizon / dt).round();
    if horizon < -TIME_TOL || (n * dt - horizon).abs() > TIME_TOL * horizon.abs().max(1.0) {
        return param(format!("horizon {horizon} is not a non-negative multiple of dt = {dt}"));
    }
    Ok(n as u64)
}

/// A running trajectory: state, propagator, clock and record.
pub struct Evolution<'h> {
    h: &'h HamiltonianRep,
    prop: Propagator,
    cfg: KrylovConfig,
    state: QuantumState,
    step: u64,
    record: TrajectoryRecord,
}

impl<'h> Evolution<'h> {
    pub fn new(h: &'h HamiltonianRep, mut state: QuantumState, cfg: KrylovConfig, metadata: RunMetadata) -> Result<Self> {
        cfg.validate()?;
        if state.len() != h.length || state.basis() != &h.basis {
            return Err(Error::Shape("state and Hamiltonian geometries differ".into()));
        }
        state.normalize()?;
        let prop = Propagator::for_state(h, &state)?;
        Ok(Evolution { h, prop, cfg, state, step: 0, record: TrajectoryRecord::new(metadata) })
    }

    /// Continues from a checkpoint; the record must carry `config_hash` when given.
    pub fn resume(h: &'h HamiltonianRep, path: &Path, cfg: KrylovConfig, config_hash: Option<&str>) -> Result<Self> {
        let ck = read_checkpoint(path, &h.basis)?;
        if let Some(hash) = config_hash {
            if ck.record.metadata.config_hash != hash {
                return Err(Error::Checkpoint(format!(
                    "checkpoint was written for config {}, not {hash}",
                    ck.record.metadata.config_hash
                )));
            }
        }
        if (ck.dt - cfg.dt).abs() > 0.0 {
            return Err(Error::Checkpoint(format!("checkpoint dt {} differs from configured {}", ck.dt, cfg.dt)));
        }
        cfg.validate()?;
        if ck.state.len() != h.length {
            return Err(Error::Checkpoint("checkpoint chain length differs from the Hamiltonian".into()));
        }
        let prop = Propagator::for_state(h, &ck.state)?;
        Ok(Evolution { h, prop, cfg, state: ck.state, step: ck.step, record: ck.record })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn state(&self) -> &QuantumState {
        &self.state
    }

    pub fn config(&self) -> &KrylovConfig {
        &self.cfg
    }

    pub fn record(&self) -> &TrajectoryRecord {
        &self.record
    }

    pub fn into_record(self) -> TrajectoryRecord {
        self.record
    }

    pub fn step_once(&mut self) -> Result<&StepDiagnostics> {
        let (next, mut diag) = krylov_step(&self.state, &self.prop, &self.cfg)?;
        self.state = next;
        self.step += 1;
        diag.time = self.time();
        log::debug!(
            "t = {:.4}: m = {}, r2 <= {:.2e}, discarded {:.2e}, bond {}",
            diag.time,
            diag.krylov_dim,
            diag.r2_bound,
            diag.discarded_weight,
            diag.max_bond
        );
        self.record.steps.push(diag);
        Ok(self.record.steps.last().unwrap())
    }

    /// Measures `set` now and appends the sample.
    pub fn observe(&mut self, set: &ObservableSet) -> Result<()> {
        let values = measure(&self.state, self.h, self.prop.sparse(), set)?;
        self.record.push(Sample { time: self.time(), values })
    }

    /// Steps to `total_steps`, sampling per `schedule`. A step that fails
    /// aborts with the partial record attached.
    pub fn run(&mut self, total_steps: u64, schedule: &ObserverSchedule) -> Result<()> {
        self.run_with_checkpoints(total_steps, schedule, None)
    }

    /// As [`Evolution::run`], writing a checkpoint every `every` steps.
    pub fn run_with_checkpoints(
        &mut self,
        total_steps: u64,
        schedule: &ObserverSchedule,
        checkpoint: Option<(&Path, u64)>,
    ) -> Result<()> {
        let sampled_now = self.record.last().is_some_and(|s| (s.time - self.time()).abs() < TIME_TOL);
        if schedule.includes(self.step) && !sampled_now {
            self.observe(&schedule.observables).map_err(|e| self.incomplete(e))?;
        }
        while self.step < total_steps {
            if let Err(e) = self.step_once() {
                return Err(self.incomplete(e));
            }
            if schedule.includes(self.step) {
                self.observe(&schedule.observables).map_err(|e| self.incomplete(e))?;
            }
            if let Some((path, every)) = checkpoint {
                if every > 0 && self.step.is_multiple_of(every) {
                    self.checkpoint(path)?;
                }
            }
        }
        self.record.complete = true;
        Ok(())
    }

    fn incomplete(&self, e: Error) -> Error {
        let mut partial = self.record.clone();
        partial.complete = false;
        Error::Incomplete { time: self.time(), partial: Box::new(partial), source: Box::new(e) }
    }

    pub fn checkpoint(&self, path: &Path) -> Result<()> {
        write_checkpoint(
            path,
            &Checkpoint { step: self.step, dt: self.cfg.dt, state: self.state.clone(), record: self.record.clone() },
        )
    }
}

/// Evolves `state` to `horizon` and returns the record of scheduled samples.
pub fn evolve_trajectory(
    state: QuantumState,
    h: &HamiltonianRep,
    cfg: &KrylovConfig,
    horizon: f64,
    schedule: &ObserverSchedule,
    metadata: RunMetadata,
) -> Result<TrajectoryRecord> {
    let total = steps_for(horizon, cfg.dt)?;
    let mut ev = Evolution::new(h, state, cfg.clone(), metadata)?;
    ev.run(total, schedule)?;
    Ok(ev.into_record())
}

/// Dense sector state for `state`, sharing the sector basis when possible.
pub fn dense_copy(state: &QuantumState, sb: Option<&Arc<SectorBasis>>) -> Result<DenseState> {
    match (state, sb) {
        (QuantumState::Mps(m), Some(sb)) => Ok(DenseState { sb: sb.clone(), amps: m.to_dense(sb)? }),
        _ => state.to_dense(),
    }
}

#[cfg(test)]
mod tests;
