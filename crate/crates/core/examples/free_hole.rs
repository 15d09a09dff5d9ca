//! A hole in a fully polarized t-J chain spreads like a free particle:
//! 1 - n_j(t) = J_{j - j0}(2t)^2.

use dwmelt::models::ModelKind;
use dwmelt::observables::{keys, ObservableKind};
use dwmelt::runner::{run_experiment, Background, Defect, ExperimentConfig, Representation};

fn bessel_j(n: i32, x: f64) -> f64 {
    let m = 512;
    let h = 2.0 * std::f64::consts::PI / m as f64;
    (0..m).map(|k| (n as f64 * (k as f64 * h) - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
}

fn main() -> dwmelt::Result<()> {
    let (l, j0) = (31, 16);
    let mut cfg = ExperimentConfig::new("free-hole", ModelKind::Tj, l);
    cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    cfg.background = Background::Polarized;
    cfg.three_site = false;
    cfg.defects = vec![Defect::hole(j0)];
    cfg.evolution.horizon = 4.0;
    cfg.evolution.representation = Representation::Dense;
    cfg.evolution.epsilon = 1e-12;
    cfg.observables.keys = [ObservableKind::Density].into();
    cfg.observables.stride = 10;
    let out = run_experiment(&cfg)?;
    for s in &out.record.samples {
        let worst = s
            .get(keys::DENSITY)?
            .iter()
            .enumerate()
            .map(|(i, n)| (1.0 - n - bessel_j(i as i32 + 1 - j0 as i32, 2.0 * s.time).powi(2)).abs())
            .fold(0.0, f64::max);
        println!("t = {:.1}: max |1 - n - J^2| = {worst:.2e}", s.time);
    }
    Ok(())
}
