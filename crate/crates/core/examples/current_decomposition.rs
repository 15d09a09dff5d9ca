//! Splits the spin-resolved currents of a hole run into nearest-neighbour and
//! three-site parts.

use dwmelt::models::ModelKind;
use dwmelt::observables::{keys, ObservableKind};
use dwmelt::runner::{run_experiment, Defect, ExperimentConfig};

fn largest(rec: &dwmelt::observables::TrajectoryRecord, key: &str) -> dwmelt::Result<f64> {
    let mut m = 0.0f64;
    for s in &rec.samples {
        m = s.get(key)?.iter().filter(|x| !x.is_nan()).fold(m, |a, x| a.max(x.abs()));
    }
    Ok(m)
}

fn main() -> dwmelt::Result<()> {
    for u in [8.0, 15.0, 60.0] {
        let mut cfg = ExperimentConfig::new(format!("currents-{u}"), ModelKind::Tj, 16);
        cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
        cfg.couplings.u = u;
        cfg.defects = vec![Defect::hole(4)];
        cfg.evolution.horizon = 4.0;
        cfg.observables.keys = [ObservableKind::Currents].into();
        cfg.observables.stride = 5;
        let rec = run_experiment(&cfg)?.record;
        print!("U = {u:>4}:");
        for (name, two, three) in [
            ("up", keys::CURRENT_UP_2SITE, keys::CURRENT_UP_3SITE),
            ("down", keys::CURRENT_DOWN_2SITE, keys::CURRENT_DOWN_3SITE),
            ("spin", keys::CURRENT_SPIN_2SITE, keys::CURRENT_SPIN_3SITE),
        ] {
            print!("  {name} 3-site/2-site {:.3}", largest(&rec, three)? / largest(&rec, two)?);
        }
        println!();
    }
    Ok(())
}
