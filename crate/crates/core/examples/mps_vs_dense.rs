//! The same t-J hole run as an MPS and as a dense vector.

use dwmelt::models::ModelKind;
use dwmelt::observables::ObservableKind;
use dwmelt::runner::{record_deviation, run_experiment, Defect, ExperimentConfig, Representation};

fn main() -> dwmelt::Result<()> {
    let mut cfg = ExperimentConfig::new("oracle", ModelKind::Tj, 10);
    cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    cfg.defects = vec![Defect::hole(2)];
    cfg.evolution.horizon = 3.0;
    cfg.observables.keys = [ObservableKind::SzProfile, ObservableKind::Correlators].into();
    let mut dense = cfg.clone();
    dense.name = "oracle-dense".into();
    dense.evolution.representation = Representation::Dense;
    dense.evolution.epsilon = 1e-12;
    for eps in [1e-6, 1e-8, 1e-10] {
        let mut mps = cfg.clone();
        mps.evolution.representation = Representation::Mps;
        mps.evolution.epsilon = eps;
        let a = run_experiment(&mps)?.record;
        let b = run_experiment(&dense)?.record;
        let bond = a.steps.iter().map(|d| d.max_bond).max().unwrap_or(1);
        println!("epsilon {eps:e} (max bond {bond}):");
        for (k, d) in record_deviation(&a, &b) {
            println!("  {k:<12} {d:.2e}");
        }
    }
    Ok(())
}
