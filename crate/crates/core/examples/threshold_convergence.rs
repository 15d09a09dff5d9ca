//! Repeats a run at decreasing accuracy thresholds and reports how far
//! consecutive levels differ.

use dwmelt::models::ModelKind;
use dwmelt::runner::{run_convergence_suite, Defect, ExperimentConfig, Representation};

fn main() -> dwmelt::Result<()> {
    let mut cfg = ExperimentConfig::new("converge", ModelKind::Tj, 12);
    cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    cfg.defects = vec![Defect::hole(3)];
    cfg.evolution.horizon = 3.0;
    cfg.evolution.representation = Representation::Mps;
    let report = run_convergence_suite(&cfg, &[1e-4, 1e-6, 1e-8])?;
    for l in &report.levels {
        println!("{:e} -> {:e}: {:.2e}", l.coarse, l.fine, l.overall());
    }
    println!("non-monotone keys: {:?}", report.non_monotone);
    Ok(())
}
