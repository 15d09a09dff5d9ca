//! Two-site XXZ domain wall: S^z_1(t) = cos(J_perp t) / 2.

use dwmelt::observables::keys;
use dwmelt::runner::{preset, run_experiment, Preset};

fn main() -> dwmelt::Result<()> {
    let Preset::Runs(runs) = preset("xxz-two-site")? else { unreachable!() };
    let mut cfg = runs[0].clone();
    cfg.outputs.root = Some(std::env::temp_dir().join("dwmelt-examples"));
    let out = run_experiment(&cfg)?;
    println!("{:>5} {:>12} {:>12}", "t", "S^z_1", "cos(t)/2");
    for s in &out.record.samples {
        println!("{:5.2} {:12.8} {:12.8}", s.time, s.at(keys::SZ_PROFILE, 1)?, 0.5 * s.time.cos());
    }
    Ok(())
}
