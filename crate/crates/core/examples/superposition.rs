//! A hole run against the shifted average of its clean wall.

use dwmelt::analysis::{deviation, Kernel, Norm, SuperpositionPrediction, ZetaForm};
use dwmelt::models::ModelKind;
use dwmelt::observables::{keys, ObservableKind};
use dwmelt::runner::{run_experiment, Defect, ExperimentConfig};

fn main() -> dwmelt::Result<()> {
    let l = 20;
    let mut clean = ExperimentConfig::new("sp-clean", ModelKind::Tj, l);
    clean.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    clean.evolution.horizon = 6.0;
    clean.observables.keys = [ObservableKind::SzProfile, ObservableKind::Correlators, ObservableKind::Products].into();
    clean.observables.stride = 10;
    let mut hole = clean.clone();
    hole.name = "sp-hole".into();
    hole.defects = vec![Defect::hole(4)];
    let c = run_experiment(&clean)?.record;
    let h = run_experiment(&hole)?.record;
    for s in &h.samples {
        let p = SuperpositionPrediction::from_clean(&c, &Kernel::shift(1), s.time, ZetaForm::Connected)?;
        let d = deviation(s.get(keys::SZ_PROFILE)?, &p.values[keys::SZ_PROFILE], l / 2 - 3..=l / 2 + 4, Norm::Sup)?;
        println!("t = {:.0}: sup |S^z - prediction| near the wall = {d:.4}", s.time);
    }
    Ok(())
}
