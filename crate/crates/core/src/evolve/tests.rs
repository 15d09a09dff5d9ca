use super::*;
use crate::models::{build_tj, build_xxz, CouplingSet};
use crate::observables::{default_observables, magnetization_profile, ObservableKind};
use crate::states::{apply_hole, domain_wall, polarized};
use ndarray::Array2;

fn tj(l: usize) -> HamiltonianRep {
    build_tj(l, &CouplingSet::isotropic(1.0, 15.0).unwrap(), true).unwrap()
}

fn hole_state(l: usize, j: usize) -> QuantumState {
    let h = tj(l);
    apply_hole(&domain_wall(&h.basis, l).unwrap(), j).unwrap()
}

/// `exp(-i H dt)` by Taylor series with scaling and squaring.
fn expm_taylor(h: &Array2<C64>, dt: f64) -> Array2<C64> {
    let n = h.nrows();
    let norm = h.iter().map(|x| x.norm()).fold(0.0, f64::max) * n as f64 * dt;
    let squarings = (norm.max(1.0).log2().ceil() as u32) + 2;
    let a = h.mapv(|x| x * C64::new(0.0, -dt / 2f64.powi(squarings as i32)));
    let mut term = Array2::<C64>::eye(n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = term.dot(&a).mapv(|x| x / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

#[test]
fn eigenstate_picks_up_a_phase() {
    let h = build_xxz(6, 1.0, 0.7).unwrap();
    let psi = polarized(&h.basis, 6).unwrap();
    let d = psi.to_dense().unwrap();
    let op = SparseOperator::from_terms(&d.sb, h.terms()).unwrap();
    let e0 = op.expectation(&d.amps).re;
    let cfg = KrylovConfig::default();
    let (out, diag) = krylov_step_dense(&d, &op, &cfg).unwrap();
    assert_eq!(diag.krylov_dim, 1);
    let ov = d.amps.dot(&out.amps);
    assert!((ov - C64::new(0.0, -e0 * cfg.dt).exp()).norm() < 1e-12);

    let m = psi.as_mps().unwrap();
    let (mo, _, diag) = krylov_step_mps(m, h.mpo(), &cfg).unwrap();
    assert_eq!(diag.max_bond, 1);
    assert!((m.overlap(&mo).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn two_site_wall_oscillates() {
    let h = build_xxz(2, 1.0, 0.3).unwrap();
    let cfg = KrylovConfig::default();
    for dense in [true, false] {
        let mut psi = domain_wall(&h.basis, 2).unwrap();
        if dense {
            psi = psi.into_dense().unwrap();
        }
        let prop = Propagator::for_state(&h, &psi).unwrap();
        for n in 1..=30 {
            psi = krylov_step(&psi, &prop, &cfg).unwrap().0;
            let sz = magnetization_profile(&psi).unwrap()[0];
            assert!((sz - 0.5 * (n as f64 * 0.1).cos()).abs() < 1e-8, "n = {n}: {sz}");
        }
    }
}

#[test]
fn dense_step_matches_matrix_exponential() {
    let l = 10;
    let h = tj(l);
    let d = hole_state(l, 4).to_dense().unwrap();
    let op = SparseOperator::from_terms(&d.sb, h.terms()).unwrap();
    let u = expm_taylor(&op.to_dense(), 0.1);
    let cfg = KrylovConfig::default().with_epsilon(1e-20);
    let mut psi = d.clone();
    let mut exact = d.amps.clone();
    for _ in 0..3 {
        psi = krylov_step_dense(&psi, &op, &cfg).unwrap().0;
        exact = u.dot(&exact);
        let diff = (&psi.amps - &exact).norm();
        assert!(diff < 1e-9, "{diff}");
    }
    assert!((psi.amps.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn mps_step_matches_dense_step() {
    let l = 10;
    let h = tj(l);
    let psi = hole_state(l, 4);
    let d = psi.to_dense().unwrap();
    let op = SparseOperator::from_terms(&d.sb, h.terms()).unwrap();
    let cfg = KrylovConfig::default();
    let oracle = KrylovConfig::default().with_epsilon(1e-20);
    let mut m = psi.as_mps().unwrap().clone();
    let mut v = d;
    for _ in 0..5 {
        let (m2, _, diag) = krylov_step_mps(&m, h.mpo(), &cfg).unwrap();
        let (v2, _) = krylov_step_dense(&v, &op, &oracle).unwrap();
        // compare single steps from the same input
        let from_m = krylov_step_dense(&DenseState { sb: v.sb.clone(), amps: m.to_dense(&v.sb).unwrap() }, &op, &oracle)
            .unwrap()
            .0;
        let ov = from_m.amps.dot(&m2.to_dense(&v.sb).unwrap()).norm_sqr();
        assert!(ov >= 1.0 - 1e-6, "fidelity {ov}");
        assert!(diag.infidelity_bound <= cfg.epsilon && diag.r2_bound < cfg.epsilon);
        m = m2;
        v = v2;
    }
}

#[test]
fn step_halving_is_consistent() {
    let l = 10;
    let h = tj(l);
    let psi = hole_state(l, 4);
    let m = psi.as_mps().unwrap().clone();
    let fine = KrylovConfig::default().with_dt(0.1).with_epsilon(1e-9);
    let coarse = KrylovConfig::default().with_dt(0.2).with_epsilon(1e-8);
    let (a, _, _) = krylov_step_mps(&m, h.mpo(), &fine).unwrap();
    let (a, _, _) = krylov_step_mps(&a, h.mpo(), &fine).unwrap();
    let (b, _, _) = krylov_step_mps(&m, h.mpo(), &coarse).unwrap();
    let sa = magnetization_profile(&QuantumState::Mps(a)).unwrap()[l / 2 - 1];
    let sb = magnetization_profile(&QuantumState::Mps(b)).unwrap()[l / 2 - 1];
    assert!((sa - sb).abs() < 1e-6, "{sa} vs {sb}");
}

#[test]
fn accuracy_error_when_krylov_space_too_small() {
    let h = tj(8);
    let d = hole_state(8, 3).to_dense().unwrap();
    let op = SparseOperator::from_terms(&d.sb, h.terms()).unwrap();
    let cfg = KrylovConfig { max_krylov: 2, dt: 1.0, epsilon: 1e-12, ..Default::default() };
    match krylov_step_dense(&d, &op, &cfg) {
        Err(Error::Accuracy { krylov_dim, r2_bound, .. }) => {
            assert_eq!(krylov_dim, 2);
            assert!(r2_bound > 1e-12);
        }
        other => panic!("expected accuracy error, got {other:?}"),
    }
}

#[test]
fn zero_horizon_records_initial_sample() {
    let h = tj(6);
    let psi = hole_state(6, 2);
    let sched = ObserverSchedule::every(1, default_observables()).unwrap();
    let rec = evolve_trajectory(psi, &h, &KrylovConfig::default(), 0.0, &sched, RunMetadata::default()).unwrap();
    assert_eq!(rec.times(), vec![0.0]);
    assert!(rec.complete);
    assert_eq!(rec.samples[0].at("density", 2).unwrap(), 0.0);
}

#[test]
fn trajectory_conserves_norm_and_magnetization() {
    let l = 8;
    let h = tj(l);
    let set: ObservableSet = [ObservableKind::SzProfile, ObservableKind::Norm, ObservableKind::Energy].into();
    let sched = ObserverSchedule::every(5, set).unwrap();
    for dense in [true, false] {
        let mut psi = domain_wall(&h.basis, l).unwrap();
        if dense {
            psi = psi.into_dense().unwrap();
        }
        let rec = evolve_trajectory(psi, &h, &KrylovConfig::default(), 2.0, &sched, RunMetadata::default()).unwrap();
        assert_eq!(rec.samples.len(), 5);
        let e0 = rec.samples[0].at("energy", 1).unwrap();
        for s in &rec.samples {
            let total: f64 = s.get("sz_profile").unwrap().iter().sum();
            assert!(total.abs() < 1e-10);
            assert!((s.at("norm", 1).unwrap() - 1.0).abs() < 1e-10);
            if dense {
                assert!((s.at("energy", 1).unwrap() - e0).abs() < 1e-9);
            }
        }
        assert_eq!(rec.steps.len(), 20);
    }
}

#[test]
fn schedule_rejects_off_grid_times() {
    assert!(ObserverSchedule::at_times(&[0.15], 0.1, default_observables()).is_err());
    let s = ObserverSchedule::at_times(&[0.0, 0.3], 0.1, default_observables()).unwrap();
    assert!(s.includes(3) && !s.includes(2));
    assert!(steps_for(1.05, 0.1).is_err());
    assert_eq!(steps_for(1.0, 0.1).unwrap(), 10);
}

#[test]
fn resume_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let l = 8;
    let h = tj(l);
    let cfg = KrylovConfig::default();
    let set: ObservableSet = [ObservableKind::SzProfile, ObservableKind::Currents].into();
    let sched = ObserverSchedule::every(2, set).unwrap();
    for dense in [false, true] {
        let mut psi = hole_state(l, 3);
        if dense {
            psi = psi.into_dense().unwrap();
        }
        let meta = RunMetadata { config_hash: "abc".into(), ..Default::default() };
        let mut full = Evolution::new(&h, psi.clone(), cfg.clone(), meta.clone()).unwrap();
        full.run(12, &sched).unwrap();

        let path = dir.path().join(format!("ck{dense}.bin"));
        let mut first = Evolution::new(&h, psi, cfg.clone(), meta).unwrap();
        first.run(6, &sched).unwrap();
        first.checkpoint(&path).unwrap();
        let mut resumed = Evolution::resume(&h, &path, cfg.clone(), Some("abc")).unwrap();
        assert_eq!(resumed.step_count(), 6);
        resumed.run(12, &sched).unwrap();
        let a = full.record();
        let b = resumed.record();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.time.to_bits(), y.time.to_bits());
            for (k, v) in &x.values {
                let w = &y.values[k];
                for (p, q) in v.iter().zip(w) {
                    assert_eq!(p.to_bits(), q.to_bits(), "{k} dense={dense} t={}", x.time);
                }
            }
        }
        assert_eq!(a.steps, b.steps);
        assert!(Evolution::resume(&h, &path, cfg.clone(), Some("other")).is_err());
    }
}

#[test]
fn failing_step_keeps_partial_record() {
    let h = tj(6);
    let psi = hole_state(6, 2).into_dense().unwrap();
    let cfg = KrylovConfig { max_krylov: 2, dt: 1.0, epsilon: 1e-12, ..Default::default() };
    let sched = ObserverSchedule::every(1, [ObservableKind::SzProfile].into()).unwrap();
    match evolve_trajectory(psi, &h, &cfg, 3.0, &sched, RunMetadata::default()) {
        Err(Error::Incomplete { partial, source, .. }) => {
            assert!(!partial.complete);
            assert_eq!(partial.samples.len(), 1);
            assert!(matches!(*source, Error::Accuracy { .. }));
        }
        other => panic!("expected incomplete trajectory, got {other:?}"),
    }
}

