//! Interrupts a run halfway, resumes it from the checkpoint and checks the
//! finished trajectory against an uninterrupted one.

use std::fs;

use dwmelt::evolve::{steps_for, Evolution, ObserverSchedule};
use dwmelt::models::ModelKind;
use dwmelt::runner::{
    build_hamiltonian, initial_state, metadata, resume_experiment, run_experiment, Defect, ExperimentConfig,
    Representation, CHECKPOINT_BIN, TRAJECTORY_CSV,
};

fn main() -> dwmelt::Result<()> {
    let mut cfg = ExperimentConfig::new("resumable", ModelKind::Tj, 12);
    cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    cfg.defects = vec![Defect::hole(3)];
    cfg.evolution.horizon = 2.0;
    cfg.evolution.representation = Representation::Mps;
    let reference = fs::read(run_experiment(&cfg)?.dir.join(TRAJECTORY_CSV))?;

    let h = build_hamiltonian(&cfg)?;
    let psi = initial_state(&cfg, &h)?;
    let k = cfg.krylov();
    let mut ev = Evolution::new(&h, psi.clone(), k.clone(), metadata(&cfg, &h, &psi))?;
    let sched = ObserverSchedule::every(cfg.observables.stride, cfg.observables.keys.clone())?;
    ev.run(steps_for(cfg.evolution.horizon, k.dt)? / 2, &sched)?;
    fs::remove_dir_all(cfg.run_dir())?;
    fs::create_dir_all(cfg.run_dir())?;
    ev.checkpoint(&cfg.run_dir().join(CHECKPOINT_BIN))?;
    println!("interrupted at t = {}", ev.time());

    let out = resume_experiment(&cfg)?;
    println!("resumed to t = {}", out.record.samples.last().map_or(0.0, |s| s.time));
    println!("identical to the uninterrupted run: {}", fs::read(out.dir.join(TRAJECTORY_CSV))? == reference);
    Ok(())
}
