//! Two-species Bose-Hubbard chain against its t-J limit at increasing
//! interaction strength; the deviation shrinks as U grows.

use dwmelt::models::ModelKind;
use dwmelt::observables::keys;
use dwmelt::runner::{run_model_comparison, Defect, ExperimentConfig, Prep, Representation};

fn main() -> dwmelt::Result<()> {
    let l = 6;
    let root = std::env::temp_dir().join("dwmelt-examples");
    for u in [8.0, 15.0, 30.0] {
        let mut bh = ExperimentConfig::new(format!("bh-{u}"), ModelKind::Bh, l);
        bh.outputs.root = Some(root.clone());
        bh.couplings.u = u;
        bh.prep = Prep::Ground { mu: 10.0, solver: Default::default() };
        bh.defects = vec![Defect::hole(2)];
        bh.evolution.horizon = 3.0;
        bh.evolution.dt = Some(0.05);
        bh.evolution.representation = Representation::Dense;
        bh.observables.stride = 2;
        let mut tj = ExperimentConfig::new(format!("tj-{u}"), ModelKind::Tj, l);
        tj.outputs.root = Some(root.clone());
        tj.couplings.u = u;
        tj.defects = bh.defects.clone();
        tj.evolution.horizon = 3.0;
        tj.observables.stride = 1;
        let cmp = run_model_comparison(&bh, &tj)?;
        println!("U = {u:>4}: max |S^z_{} BH - tJ| = {:.3e}", l / 2 + 1, cmp.max_at(keys::SZ_PROFILE, l / 2 + 1, 3.0));
    }
    Ok(())
}
