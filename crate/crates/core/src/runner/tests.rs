use super::*;
use crate::observables::ObservableKind;

fn small(name: &str, root: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, ModelKind::Tj, 8);
    c.outputs.root = Some(root.to_path_buf());
    c.evolution.horizon = 1.0;
    c.observables.stride = 2;
    c
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn zero_horizon_writes_one_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("t0", dir.path());
    c.evolution.horizon = 0.0;
    let out = run_experiment(&c).unwrap();
    let rows = csv_rows(&out.dir.join(TRAJECTORY_CSV));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0.0")));
    assert!(rows.iter().all(|r| r.starts_with(&c.hash())));
    let side = read_sidecar(&out.dir.join(METADATA_JSON)).unwrap();
    assert!(side.complete);
    assert_eq!(side.config, c);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("again", dir.path());
    c.evolution.representation = Representation::Mps;
    let a = run_experiment(&c).unwrap();
    let first = fs::read(a.dir.join(TRAJECTORY_CSV)).unwrap();
    let steps = fs::read(a.dir.join(STEPS_CSV)).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(first, fs::read(b.dir.join(TRAJECTORY_CSV)).unwrap());
    assert_eq!(steps, fs::read(b.dir.join(STEPS_CSV)).unwrap());
    let (hash, samples) = read_trajectory_csv(&a.dir.join(TRAJECTORY_CSV)).unwrap();
    assert_eq!(hash, c.hash());
    assert_eq!(samples.len(), a.record.samples.len());
    for (x, y) in samples.iter().zip(&a.record.samples) {
        assert_eq!(x.time, y.time);
        assert_eq!(x.values.keys().collect::<Vec<_>>(), y.values.keys().collect::<Vec<_>>());
        for (u, v) in x.values.values().zip(y.values.values()) {
            assert!(u.iter().zip(v).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn resume_finishes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("resumed", dir.path());
    c.evolution.representation = Representation::Mps;
    c.defects = vec![Defect::hole(2)];
    c.outputs.checkpoint_every = 4;
    let full = run_experiment(&c).unwrap();
    let reference = fs::read(full.dir.join(TRAJECTORY_CSV)).unwrap();

    // stop early, then resume against the full horizon
    let mut short = c.clone();
    short.evolution.horizon = 0.4;
    let h = build_hamiltonian(&short).unwrap();
    let psi = initial_state(&short, &h).unwrap();
    let mut ev = Evolution::new(&h, psi.clone(), short.krylov(), metadata(&c, &h, &psi)).unwrap();
    let sched = ObserverSchedule::every(c.observables.stride, c.observables.keys.clone()).unwrap();
    ev.run(4, &sched).unwrap();
    fs::remove_dir_all(&full.dir).unwrap();
    fs::create_dir_all(&full.dir).unwrap();
    ev.checkpoint(&full.dir.join(CHECKPOINT_BIN)).unwrap();
    let out = resume_experiment(&c).unwrap();
    assert_eq!(reference, fs::read(out.dir.join(TRAJECTORY_CSV)).unwrap());

    let mut other = c.clone();
    other.evolution.epsilon = 1e-7;
    assert!(resume_experiment(&other).is_err());
}

#[test]
fn failure_leaves_error_record_and_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("fails", dir.path());
    c.defects = vec![Defect::hole(3)];
    c.evolution.dt = Some(1.0);
    c.evolution.horizon = 3.0;
    c.evolution.max_krylov = 2;
    c.evolution.epsilon = 1e-12;
    c.observables.stride = 1;
    let e = run_experiment(&c).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    let rec: ErrorRecord = serde_json::from_str(&fs::read_to_string(c.run_dir().join(ERROR_JSON)).unwrap()).unwrap();
    assert_eq!(rec.kind, "accuracy");
    assert_eq!(rec.exit_code, 3);
    assert!(!read_sidecar(&c.run_dir().join(METADATA_JSON)).unwrap().complete);
    assert!(!csv_rows(&c.run_dir().join(TRAJECTORY_CSV)).is_empty());

    let mut bad = small("bad", dir.path());
    bad.defects = vec![Defect::hole(7)];
    assert_eq!(run_experiment(&bad).unwrap_err().exit_code(), 2);
}

#[test]
fn convergence_needs_two_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let c = small("conv", dir.path());
    assert!(matches!(run_convergence_suite(&c, &[1e-6]), Err(Error::Parameter(_))));
    assert!(matches!(run_convergence_suite(&c, &[1e-6, 1e-6]), Err(Error::Parameter(_))));
}

#[test]
fn dense_convergence_shrinks_with_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("conv", dir.path());
    c.defects = vec![Defect::hole(2)];
    c.evolution.representation = Representation::Dense;
    let r = run_convergence_suite(&c, &[1e-4, 1e-6, 1e-5]).unwrap();
    assert_eq!(r.epsilons, vec![1e-4, 1e-5, 1e-6]);
    assert_eq!(r.levels.len(), 2);
    assert!(r.levels[1].overall() < r.levels[0].overall());
    assert!(r.levels[0].overall() < 1e-2, "{:?}", r.levels[0].max_deviation);
    assert!(dir.path().join("converge-conv.csv").is_file());
}

#[test]
fn report_flags_growth() {
    let mk = |x: f64| {
        let mut r = TrajectoryRecord::default();
        let values = [("a".to_string(), vec![x])].into();
        r.push(crate::observables::Sample { time: 0.0, values }).unwrap();
        r
    };
    let recs = [mk(0.0), mk(0.1), mk(0.11), mk(0.2)];
    let rep = convergence_report(&[1e-3, 1e-4, 1e-5, 1e-6], &recs).unwrap();
    assert!(!rep.monotone());
    assert_eq!(rep.non_monotone, vec!["a".to_string()]);
}

#[test]
fn identical_models_compare_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = small("left", dir.path());
    a.defects = vec![Defect::hole(2)];
    let mut b = a.clone();
    b.name = "right".into();
    let cmp = run_model_comparison(&a, &b).unwrap();
    assert!(cmp.max_deviation.values().all(|&d| d == 0.0));
    assert!(dir.path().join("compare-left-right.csv").is_file());
    let mut c = b.clone();
    c.length = 10;
    assert!(matches!(run_model_comparison(&a, &c), Err(Error::Parameter(_))));
    c = b.clone();
    c.couplings.u = 8.0;
    assert!(matches!(run_model_comparison(&a, &c), Err(Error::Parameter(_))));
}

#[test]
fn defect_run_writes_comparison_against_clean() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("hole", dir.path());
    c.defects = vec![Defect::hole(3)];
    c.observables.keys.insert(ObservableKind::Products);
    c.comparison = Some(ComparisonConfig { clean: "clean".into(), shift: None, zeta_form: Default::default() });
    let out = run_experiment(&c).unwrap();
    let clean = clean_config(&c).unwrap();
    assert!(clean.run_dir().join(TRAJECTORY_CSV).is_file());
    let rows = csv_rows(&out.dir.join(COMPARISON_CSV));
    assert!(rows.iter().any(|r| r.contains(",sz_profile,")));
    assert!(rows.iter().any(|r| r.contains(",zeta,")));
    assert!(rows.iter().all(|r| r.starts_with(&format!("{},{}", c.hash(), clean.hash()))));
    // at t = 0 the prediction is the shifted clean wall
    let first = rows.iter().find(|r| r.contains(",0.0,sz_profile,4,")).unwrap();
    assert_eq!(first.split(',').nth(6), Some("0.0"));
}

#[test]
fn every_preset_builds_valid_configs() {
    for info in presets() {
        let p = preset(info.name).unwrap();
        for c in p.configs() {
            c.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), *c);
        }
    }
    assert!(matches!(preset("nope"), Err(Error::Lookup(_))));
}

#[test]
fn two_site_preset_oscillates() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("xxz-two-site").unwrap();
    let root = format!("outputs.root=\"{}\"", dir.path().display());
    let PresetOutcome::Runs(out) = run_preset(&p, &[root]).unwrap() else { panic!() };
    for s in &out[0].record.samples {
        assert!((s.at(keys::SZ_PROFILE, 1).unwrap() - 0.5 * s.time.cos()).abs() < 1e-8);
    }
}
