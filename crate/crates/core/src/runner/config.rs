use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::ZetaForm;
use crate::error::{param, Error, Result};
use crate::evolve::KrylovConfig;
use crate::models::{CouplingSet, ModelKind};
use crate::observables::{default_observables, ObservableKind, ObservableSet};

/// One trajectory: model, initial state, integrator and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    pub length: usize,
    #[serde(default)]
    pub couplings: CouplingsConfig,
    /// Bosons per species and site (Bose-Hubbard only).
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Include the correlated three-site hops of the t-J model.
    #[serde(default = "yes")]
    pub three_site: bool,
    #[serde(default)]
    pub background: Background,
    #[serde(default)]
    pub defects: Vec<Defect>,
    #[serde(default)]
    pub prep: Prep,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonConfig>,
    /// Not part of the config hash.
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn default_n_max() -> usize {
    2
}

fn yes() -> bool {
    true
}

/// Raw Bose-Hubbard parameters; the spin couplings follow from them unless
/// given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingsConfig {
    pub t: f64,
    pub u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_down: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_perp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_z: Option<f64>,
}

impl Default for CouplingsConfig {
    fn default() -> Self {
        CouplingsConfig { t: 1.0, u: 15.0, t_up: None, t_down: None, u_up: None, u_down: None, v: None, j_perp: None, j_z: None }
    }
}

impl CouplingsConfig {
    pub fn isotropic(t: f64, u: f64) -> Self {
        CouplingsConfig { t, u, ..Default::default() }
    }

    pub fn coupling_set(&self) -> Result<CouplingSet> {
        let mut c = CouplingSet::from_bh(
            self.t_up.unwrap_or(self.t),
            self.t_down.unwrap_or(self.t),
            self.u_up.unwrap_or(self.u),
            self.u_down.unwrap_or(self.u),
            self.v.unwrap_or(self.u),
        )?;
        if let Some(j) = self.j_perp {
            c.j_perp = j;
        }
        if let Some(j) = self.j_z {
            c.j_z = j;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    #[default]
    DomainWall,
    Polarized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    Hole,
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defect {
    pub kind: DefectKind,
    pub site: usize,
}

impl Defect {
    pub fn hole(site: usize) -> Self {
        Defect { kind: DefectKind::Hole, site }
    }

    pub fn flip(site: usize) -> Self {
        Defect { kind: DefectKind::Flip, site }
    }

    /// Shift of the shifted-average prediction: one site per hole, two per flip.
    pub fn shift(&self) -> usize {
        match self.kind {
            DefectKind::Hole => 1,
            DefectKind::Flip => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundSolver {
    /// Dense Lanczos on dense runs, variational sweeps on MPS runs.
    #[default]
    Auto,
    Dense,
    Sweeps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Prep {
    #[default]
    Product,
    /// Ground state of the Bose-Hubbard chain with a wall-shaped potential.
    Ground {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        solver: GroundSolver,
    },
}

fn default_mu() -> f64 {
    10.0
}


#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Dense below [`DENSE_LIMIT`] basis states, MPS above.
    #[default]
    Auto,
    Dense,
    Mps,
}

pub const DENSE_LIMIT: u128 = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub horizon: f64,
    /// Model default (0.1, or 0.01 for Bose-Hubbard) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub epsilon: f64,
    pub max_krylov: usize,
    pub safety_factor: f64,
    pub krylov_share: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_vector_budget: Option<f64>,
    #[serde(default)]
    pub representation: Representation,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        let k = KrylovConfig::default();
        EvolutionConfig {
            horizon: 5.0,
            dt: None,
            epsilon: k.epsilon,
            max_krylov: k.max_krylov,
            safety_factor: k.safety_factor,
            krylov_share: k.krylov_share,
            per_vector_budget: None,
            representation: Representation::Auto,
        }
    }
}

impl EvolutionConfig {
    pub fn krylov(&self, model: ModelKind) -> KrylovConfig {
        let base = KrylovConfig::for_model(model);
        KrylovConfig {
            dt: self.dt.unwrap_or(base.dt),
            epsilon: self.epsilon,
            max_krylov: self.max_krylov,
            per_vector_budget: self.per_vector_budget,
            safety_factor: self.safety_factor,
            krylov_share: self.krylov_share,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservablesConfig {
    pub keys: ObservableSet,
    /// Sample every `stride` steps.
    pub stride: u64,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        ObservablesConfig { keys: default_observables(), stride: 10 }
    }
}

/// Reference to a clean run whose shifted average predicts this one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    /// Name of the clean run under the same output root.
    pub clean: String,
    /// Total shift; defaults to the sum over defects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<usize>,
    #[serde(default)]
    pub zeta_form: ZetaForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output root; falls back to `DWMELT_OUTPUT_ROOT`, then `dwmelt-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Steps between checkpoints; 0 writes only the final one.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
}

fn default_checkpoint_every() -> u64 {
    100
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { root: None, checkpoint_every: default_checkpoint_every() }
    }
}

pub const OUTPUT_ROOT_ENV: &str = "DWMELT_OUTPUT_ROOT";

impl ExperimentConfig {
    /// Clean domain wall of `model` with library defaults.
    pub fn new(name: impl Into<String>, model: ModelKind, length: usize) -> Self {
        ExperimentConfig {
            name: name.into(),
            model,
            length,
            couplings: CouplingsConfig::default(),
            n_max: default_n_max(),
            three_site: true,
            background: Background::DomainWall,
            defects: Vec::new(),
            prep: Prep::Product,
            evolution: EvolutionConfig::default(),
            observables: ObservablesConfig::default(),
            comparison: None,
            outputs: OutputConfig { root: None, checkpoint_every: default_checkpoint_every() },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies `key.path=value` overrides in order; later ones win.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o.as_ref())?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn krylov(&self) -> KrylovConfig {
        self.evolution.krylov(self.model)
    }

    /// Hex SHA-256 of the canonical JSON form without output settings.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.outputs = OutputConfig::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn output_root(&self) -> PathBuf {
        self.outputs
            .root
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("dwmelt-out"))
    }

    /// Directory holding this run's files.
    pub fn run_dir(&self) -> PathBuf {
        self.output_root().join(format!("{}-{}", self.name, self.hash()))
    }

    /// Total shift of the prediction for this run's defects.
    pub fn shift(&self) -> usize {
        self.comparison
            .as_ref()
            .and_then(|c| c.shift)
            .unwrap_or_else(|| self.defects.iter().map(Defect::shift).sum())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return param(format!("run name `{}` must be non-empty and free of path separators", self.name));
        }
        if self.length < 2 {
            return param(format!("chain length must be at least 2, got {}", self.length));
        }
        if self.background == Background::DomainWall && self.length % 2 == 1 {
            return param(format!("a domain wall needs an even chain length, got {}", self.length));
        }
        let mut sites = Vec::new();
        for d in &self.defects {
            let ok = match self.background {
                Background::DomainWall => d.site >= 2 && d.site < self.length / 2,
                Background::Polarized => d.site >= 1 && d.site <= self.length,
            };
            if !ok {
                return param(format!(
                    "defect site {} outside the allowed range for L = {} ({:?} background)",
                    d.site, self.length, self.background
                ));
            }
            if sites.contains(&d.site) {
                return param(format!("two defects on site {}", d.site));
            }
            sites.push(d.site);
        }
        if matches!(self.prep, Prep::Ground { .. }) {
            if self.model != ModelKind::Bh {
                return param("ground-state preparation is only defined for the Bose-Hubbard model");
            }
            if self.background != Background::DomainWall {
                return param("ground-state preparation prepares a domain wall");
            }
        }
        if self.model == ModelKind::Xxz && self.defects.iter().any(|d| d.kind == DefectKind::Hole) {
            return Err(Error::UnsupportedBasis("the XXZ chain has no hole states".into()));
        }
        if !(self.evolution.horizon >= 0.0) {
            return param(format!("horizon must be non-negative, got {}", self.evolution.horizon));
        }
        if self.observables.stride == 0 {
            return param("observable stride must be positive");
        }
        if self.observables.keys.is_empty() {
            return param("no observables requested");
        }
        self.krylov().validate()?;
        self.couplings.coupling_set().map(|_| ())
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))?;
    let value = parse_value(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{k}` in `{path}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Observable groups as named in config files.
pub fn parse_observables(names: &[&str]) -> Result<ObservableSet> {
    names.iter().map(|n| n.parse::<ObservableKind>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_hash() {
        let mut c = ExperimentConfig::new("hole", ModelKind::Tj, 12);
        c.defects.push(Defect::hole(2));
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut moved = c.clone();
        moved.outputs.root = Some("/elsewhere".into());
        assert_eq!(moved.hash(), c.hash());
        moved.evolution.epsilon = 1e-5;
        assert_ne!(moved.hash(), c.hash());
    }

    #[test]
    fn overrides_last_wins() {
        let c = ExperimentConfig::new("clean", ModelKind::Tj, 12);
        let o = c
            .with_overrides(&["couplings.u=60", "evolution.epsilon=1e-5", "couplings.u=8", "name=other"])
            .unwrap();
        assert_eq!(o.couplings.u, 8.0);
        assert_eq!(o.evolution.epsilon, 1e-5);
        assert_eq!(o.name, "other");
        assert!(c.with_overrides(&["couplings.w=1"]).is_err());
        assert!(c.with_overrides(&["nonsense"]).is_err());
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ExperimentConfig::from_toml(
            "name = \"h\"\nmodel = \"tj\"\nlength = 20\n[[defects]]\nkind = \"hole\"\nsite = 4\n",
        )
        .unwrap();
        assert_eq!(c.evolution.epsilon, 1e-6);
        assert_eq!(c.krylov().dt, 0.1);
        assert_eq!(c.shift(), 1);
        c.validate().unwrap();
        let bh = ExperimentConfig::new("b", ModelKind::Bh, 8);
        assert_eq!(bh.krylov().dt, 0.01);
        assert!(ExperimentConfig::from_toml("name = \"h\"\nmodel = \"tj\"\nlength = 20\nbogus = 1\n").is_err());
        let p = ExperimentConfig::from_toml(
            "name = \"p\"\nmodel = \"tj\"\nlength = 20\n[couplings]\nu = 8\n[evolution]\ndt = 0.05\n[observables]\nstride = 3\n[outputs]\n",
        )
        .unwrap();
        assert_eq!((p.couplings.t, p.couplings.u, p.krylov().dt, p.evolution.epsilon), (1.0, 8.0, 0.05, 1e-6));
        assert_eq!((p.observables.stride, p.outputs.checkpoint_every), (3, 100));
        assert_eq!(p.observables.keys, default_observables());
    }

    #[test]
    fn defect_sites_are_checked() {
        let mut c = ExperimentConfig::new("h", ModelKind::Tj, 12);
        c.defects = vec![Defect::hole(6)];
        assert!(matches!(c.validate(), Err(Error::Parameter(_))));
        c.defects = vec![Defect::hole(1)];
        assert!(c.validate().is_err());
        c.defects = vec![Defect::hole(5), Defect::flip(3)];
        c.validate().unwrap();
        assert_eq!(c.shift(), 3);
        let mut x = ExperimentConfig::new("x", ModelKind::Xxz, 12);
        x.defects = vec![Defect::hole(3)];
        assert!(matches!(x.validate(), Err(Error::UnsupportedBasis(_))));
    }
}
