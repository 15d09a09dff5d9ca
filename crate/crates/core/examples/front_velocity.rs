//! Front velocities: a hole moves at 2t, a spin flip at 4t^2/U.

use dwmelt::analysis::{front_velocity, Direction, Tracer};
use dwmelt::models::ModelKind;
use dwmelt::observables::ObservableKind;
use dwmelt::runner::{run_experiment, Background, Defect, ExperimentConfig};

fn main() -> dwmelt::Result<()> {
    let root = std::env::temp_dir().join("dwmelt-examples");
    let mut hole = ExperimentConfig::new("v-hole", ModelKind::Tj, 41);
    hole.outputs.root = Some(root.clone());
    hole.background = Background::Polarized;
    hole.defects = vec![Defect::hole(21)];
    hole.evolution.horizon = 9.0;
    hole.observables.keys = [ObservableKind::Density].into();
    hole.observables.stride = 1;
    let rec = run_experiment(&hole)?.record;
    let fit = front_velocity(&rec, &Tracer::hole_peak(Direction::Right), (2.0, 8.5))?;
    println!("hole: v = {:.3}, 2t = {:.3}", fit.velocity, 2.0 * hole.couplings.t);

    let mut flip = ExperimentConfig::new("v-flip", ModelKind::Tj, 40);
    flip.outputs.root = Some(root);
    flip.background = Background::Polarized;
    flip.defects = vec![Defect::flip(20)];
    flip.evolution.horizon = 40.0;
    flip.observables.keys = [ObservableKind::SzProfile].into();
    flip.observables.stride = 10;
    let rec = run_experiment(&flip)?.record;
    let fit = front_velocity(&rec, &Tracer::crossing(Direction::Right), (10.0, 40.0))?;
    let (t, u) = (flip.couplings.t, flip.couplings.u);
    println!("flip: v = {:.4}, 4t^2/U = {:.4}", fit.velocity, 4.0 * t * t / u);
    Ok(())
}
