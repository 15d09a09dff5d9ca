use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::observables::ObservableKind;

use super::config::{
    Background, ComparisonConfig, CouplingsConfig, Defect, ExperimentConfig, GroundSolver, Prep, Representation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
}

const INFOS: [PresetInfo; 6] = [
    PresetInfo {
        name: "fig4-desk",
        description: "t-J L=40, U=15: clean wall, hole at L/2-6 and flip at L/2-8, with shifted-average comparisons",
    },
    PresetInfo {
        name: "fig5-desk",
        description: "Bose-Hubbard vs t-J, L=12, hole at L/2-4, U=8 and U=15, T=5",
    },
    PresetInfo {
        name: "fig9-desk",
        description: "t-J L=40 hole at L/2-6 against its clean wall for U = 8, 15, 60",
    },
    PresetInfo {
        name: "appendix-converge",
        description: "t-J L=20 hole run at epsilon = 1e-4, 1e-5, 1e-6",
    },
    PresetInfo {
        name: "two-hole",
        description: "t-J L=40 with holes at L/2-10 and L/2-6 against the (1,2,1)/4 prediction",
    },
    PresetInfo {
        name: "xxz-two-site",
        description: "two-site XXZ domain wall, dense, J_perp = 1",
    },
];

pub fn presets() -> &'static [PresetInfo] {
    &INFOS
}

/// A named plan of runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    /// Independent runs; clean references come first.
    Runs(Vec<ExperimentConfig>),
    /// Bose-Hubbard / t-J pairs.
    Compare(Vec<(ExperimentConfig, ExperimentConfig)>),
    Converge { config: ExperimentConfig, epsilons: Vec<f64> },
}

impl Preset {
    pub fn configs(&self) -> Vec<&ExperimentConfig> {
        match self {
            Preset::Runs(v) => v.iter().collect(),
            Preset::Compare(v) => v.iter().flat_map(|(a, b)| [a, b]).collect(),
            Preset::Converge { config, .. } => vec![config],
        }
    }
}

fn tj_wall(name: &str, length: usize, u: f64, horizon: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, ModelKind::Tj, length);
    c.couplings = CouplingsConfig::isotropic(1.0, u);
    c.evolution.horizon = horizon;
    c.evolution.representation = Representation::Auto;
    c
}

fn with_defects(mut c: ExperimentConfig, name: &str, defects: Vec<Defect>, clean: &str) -> ExperimentConfig {
    c.name = name.to_string();
    c.defects = defects;
    c.comparison = Some(ComparisonConfig { clean: clean.to_string(), shift: None, zeta_form: Default::default() });
    c
}

fn u_tag(u: f64) -> String {
    format!("u{u}")
}

pub fn preset(name: &str) -> Result<Preset> {
    let l = 40;
    match name {
        "fig4-desk" => {
            let clean = tj_wall("fig4-clean", l, 15.0, 20.0);
            let hole = with_defects(clean.clone(), "fig4-hole", vec![Defect::hole(l / 2 - 6)], "fig4-clean");
            let flip = with_defects(clean.clone(), "fig4-flip", vec![Defect::flip(l / 2 - 8)], "fig4-clean");
            Ok(Preset::Runs(vec![clean, hole, flip]))
        }
        "fig5-desk" => {
            let l = 12;
            let mut pairs = Vec::new();
            for u in [8.0, 15.0] {
                let mut bh = ExperimentConfig::new(format!("fig5-bh-{}", u_tag(u)), ModelKind::Bh, l);
                bh.couplings = CouplingsConfig::isotropic(1.0, u);
                bh.prep = Prep::Ground { mu: 10.0, solver: GroundSolver::Auto };
                bh.defects = vec![Defect::hole(l / 2 - 4)];
                bh.evolution.horizon = 5.0;
                bh.observables.stride = 10;
                let mut tj = tj_wall(&format!("fig5-tj-{}", u_tag(u)), l, u, 5.0);
                tj.defects = bh.defects.clone();
                tj.observables.stride = 1;
                pairs.push((bh, tj));
            }
            Ok(Preset::Compare(pairs))
        }
        "fig9-desk" => {
            let mut runs = Vec::new();
            for u in [8.0, 15.0, 60.0] {
                let clean_name = format!("fig9-clean-{}", u_tag(u));
                let clean = tj_wall(&clean_name, l, u, 16.0);
                let hole = with_defects(clean.clone(), &format!("fig9-hole-{}", u_tag(u)), vec![Defect::hole(l / 2 - 6)], &clean_name);
                runs.push(clean);
                runs.push(hole);
            }
            Ok(Preset::Runs(runs))
        }
        "appendix-converge" => {
            let mut c = tj_wall("appendix-hole", 20, 15.0, 5.0);
            c.defects = vec![Defect::hole(4)];
            c.evolution.representation = Representation::Mps;
            Ok(Preset::Converge { config: c, epsilons: vec![1e-4, 1e-5, 1e-6] })
        }
        "two-hole" => {
            let clean = tj_wall("two-hole-clean", l, 15.0, 16.0);
            let holes = with_defects(
                clean.clone(),
                "two-hole",
                vec![Defect::hole(l / 2 - 10), Defect::hole(l / 2 - 6)],
                "two-hole-clean",
            );
            Ok(Preset::Runs(vec![clean, holes]))
        }
        "xxz-two-site" => {
            let mut c = ExperimentConfig::new("xxz-two-site", ModelKind::Xxz, 2);
            c.couplings.j_perp = Some(1.0);
            c.couplings.j_z = Some(0.0);
            c.background = Background::DomainWall;
            c.evolution.horizon = 3.0;
            c.evolution.representation = Representation::Dense;
            c.observables.stride = 1;
            c.observables.keys = [ObservableKind::SzProfile, ObservableKind::Norm, ObservableKind::Energy].into();
            Ok(Preset::Runs(vec![c]))
        }
        other => Err(Error::Lookup(format!(
            "unknown preset `{other}`; available: {}",
            INFOS.iter().map(|i| i.name).collect::<Vec<_>>().join(", ")
        ))),
    }
}
