//! Initial states: domain walls, hole and spin-flip defects, and the
//! Bose-Hubbard preparation ground state.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::krylov::{lanczos_ground, VectorSpace};
use crate::models::{BasisKind, HamiltonianRep, LocalOpName, SectorBasis, SiteBasis, SparseOperator};
use crate::symmetry::{Charge, SymmetrySector};
use crate::tensornet::{dmrg_ground_state, mpo_expectation, DmrgConfig, Mps};

/// Sector-resolved state vector.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub sb: Arc<SectorBasis>,
    pub amps: Array1<C64>,
}

impl DenseState {
    pub fn new(sb: Arc<SectorBasis>, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != sb.dim() {
            return Err(Error::Shape(format!("{} amplitudes for a sector of dimension {}", amps.len(), sb.dim())));
        }
        Ok(DenseState { sb, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Applies a single-site operator with definite charge `delta` at 0-based
    /// site `j`, moving to the shifted sector.
    pub fn apply_local(&self, j: usize, op: &Array2<C64>, delta: Charge) -> Result<DenseState> {
        let sb = &self.sb;
        let basis = sb.basis();
        let target = SymmetrySector::from_charge(sb.sector().charge() + delta)
            .ok_or_else(|| Error::Parameter("operator leaves the physical sectors".into()))?;
        let nsb = if delta == Charge::ZERO { sb.clone() } else { Arc::new(SectorBasis::new(basis, sb.length(), target)?) };
        let mut out = Array1::<C64>::zeros(nsb.dim());
        for (i, &key) in sb.configs().iter().enumerate() {
            let a = self.amps[i];
            if a.norm() == 0.0 {
                continue;
            }
            let s = sb.site_state(key, j);
            for s2 in 0..basis.dim() {
                let v = op[[s2, s]];
                if v.norm() == 0.0 {
                    continue;
                }
                if basis.charge(s2) - basis.charge(s) != delta {
                    return param("operator has no definite charge");
                }
                let k2 = sb.with_site(key, j, s2);
                if let Some(i2) = nsb.index_of(k2) {
                    out[i2] += v * a;
                }
            }
        }
        Ok(DenseState { sb: nsb, amps: out })
    }
}

/// Either representation of a many-body state.
#[derive(Clone, Debug)]
pub enum QuantumState {
    Dense(DenseState),
    Mps(Mps),
}

impl QuantumState {
    pub fn basis(&self) -> &SiteBasis {
        match self {
            QuantumState::Dense(d) => d.sb.basis(),
            QuantumState::Mps(m) => m.basis(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            QuantumState::Dense(d) => d.sb.length(),
            QuantumState::Mps(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, QuantumState::Dense(_))
    }

    pub fn sector(&self) -> SymmetrySector {
        match self {
            QuantumState::Dense(d) => d.sb.sector(),
            QuantumState::Mps(m) => SymmetrySector::from_charge(m.total_charge()).expect("MPS charge is physical"),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            QuantumState::Dense(d) => d.norm(),
            QuantumState::Mps(m) => m.norm(),
        }
    }

    pub fn normalize(&mut self) -> Result<f64> {
        match self {
            QuantumState::Dense(d) => {
                let n = d.norm();
                if n > 0.0 {
                    d.amps.mapv_inplace(|x| x / n);
                }
                Ok(n)
            }
            QuantumState::Mps(m) => m.normalize(),
        }
    }

    pub fn as_mps(&self) -> Option<&Mps> {
        match self {
            QuantumState::Mps(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DenseState> {
        match self {
            QuantumState::Dense(d) => Some(d),
            _ => None,
        }
    }

    /// Dense copy in the state's own sector.
    pub fn to_dense(&self) -> Result<DenseState> {
        match self {
            QuantumState::Dense(d) => Ok(d.clone()),
            QuantumState::Mps(m) => {
                let sb = Arc::new(SectorBasis::new(m.basis(), m.len(), self.sector())?);
                let amps = m.to_dense(&sb)?;
                Ok(DenseState { sb, amps })
            }
        }
    }

    pub fn to_mps(&self) -> Result<Mps> {
        match self {
            QuantumState::Dense(d) => Mps::from_dense(&d.sb, &d.amps),
            QuantumState::Mps(m) => Ok(m.clone()),
        }
    }

    pub fn into_dense(self) -> Result<QuantumState> {
        Ok(QuantumState::Dense(self.to_dense()?))
    }

    pub fn into_mps(self) -> Result<QuantumState> {
        Ok(QuantumState::Mps(self.to_mps()?))
    }

    /// `<self|other>`; mixed representations are compared densely.
    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        if self.len() != other.len() || self.basis() != other.basis() {
            return Err(Error::Shape("overlap of states with different geometry".into()));
        }
        if self.sector() != other.sector() {
            return Ok(C64::new(0.0, 0.0));
        }
        match (self, other) {
            (QuantumState::Mps(a), QuantumState::Mps(b)) => a.overlap(b),
            _ => {
                let a = self.to_dense()?;
                let b = other.to_dense()?;
                Ok(a.amps.dot(&b.amps))
            }
        }
    }

    /// Single-site operator with definite charge at 1-based `site`, not normalized.
    pub fn apply_local(&self, site: usize, op: &Array2<C64>, delta: Charge) -> Result<QuantumState> {
        check_site(site, self.len())?;
        match self {
            QuantumState::Dense(d) => Ok(QuantumState::Dense(d.apply_local(site - 1, op, delta)?)),
            QuantumState::Mps(m) => {
                let mut m = m.clone();
                m.apply_local(site - 1, op, delta)?;
                Ok(QuantumState::Mps(m))
            }
        }
    }
}

impl VectorSpace for DenseState {
    fn dot(&self, other: &Self) -> C64 {
        self.amps.dot(&other.amps)
    }

    fn axpy(&mut self, a: C64, x: &Self) {
        self.amps.axpy(a, &x.amps);
    }

    fn scale(&mut self, a: C64) {
        self.amps.scale(a);
    }
}

fn check_site(site: usize, length: usize) -> Result<()> {
    if site == 0 || site > length {
        return Err(Error::Shape(format!("site {site} outside 1..={length}")));
    }
    Ok(())
}

/// Product state from local basis indices, one per site.
pub fn product_state(basis: &SiteBasis, states: &[usize]) -> Result<QuantumState> {
    Ok(QuantumState::Mps(Mps::product(basis, states)?))
}

/// `|up ... up down ... down>` with the wall between `L/2` and `L/2 + 1`.
pub fn domain_wall(basis: &SiteBasis, length: usize) -> Result<QuantumState> {
    if length == 0 || length % 2 == 1 {
        return param(format!("domain wall needs an even chain length, got {length}"));
    }
    let states: Vec<usize> = (0..length).map(|j| if j < length / 2 { basis.up() } else { basis.down() }).collect();
    product_state(basis, &states)
}

/// Fully polarized `|up ... up>`.
pub fn polarized(basis: &SiteBasis, length: usize) -> Result<QuantumState> {
    product_state(basis, &vec![basis.up(); length])
}

/// Removes the up particle at 1-based site `j_h` and normalizes.
pub fn apply_hole(state: &QuantumState, j_h: usize) -> Result<QuantumState> {
    let basis = state.basis();
    let name = match basis.kind() {
        BasisKind::TJ => LocalOpName::AUp,
        BasisKind::Boson2Species => LocalOpName::BUp,
        BasisKind::SpinHalf => {
            return Err(Error::UnsupportedBasis("holes need a basis with an empty site state".into()))
        }
    };
    let op = basis.local_operator(name)?;
    let mut out = state.apply_local(j_h, &op.matrix, Charge::new(-1, 0))?;
    let n = out.norm();
    if n < 1e-12 {
        return Err(Error::AnnihilationOfVacuum { site: j_h, norm: n });
    }
    out.normalize()?;
    Ok(out)
}

/// Turns the up particle at 1-based site `j_f` into a down particle and normalizes.
pub fn apply_spin_flip(state: &QuantumState, j_f: usize) -> Result<QuantumState> {
    let basis = state.basis();
    let op = basis.local_operator(LocalOpName::SMinus)?;
    let mut out = state.apply_local(j_f, &op.matrix, Charge::new(-1, 1))?;
    let n = out.norm();
    if n < 1e-12 {
        return Err(Error::FlipOfDownSpin { site: j_f, norm: n });
    }
    out.normalize()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GroundMethod {
    DenseEigensolver,
    VariationalSweeps(DmrgConfig),
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub state: QuantumState,
    pub energy: f64,
    /// Sweep energies (variational) or the single converged value (dense).
    pub energies: Vec<f64>,
}

/// Lowest state of `h_prep` in `sector`, which must be the half-filled
/// `(L/2, L/2)` sector.
pub fn prepare_bh_ground(h_prep: &HamiltonianRep, sector: SymmetrySector, method: &GroundMethod) -> Result<GroundState> {
    let length = h_prep.length;
    let basis = &h_prep.basis;
    if length % 2 == 1 || sector.n_up != length / 2 || sector.n_down != length / 2 {
        return param(format!("ground-state preparation works in the (L/2, L/2) sector, got {sector}"));
    }
    let wall = domain_wall(basis, length)?;
    match method {
        GroundMethod::DenseEigensolver => {
            let sb = Arc::new(SectorBasis::new(basis, length, sector)?);
            let op = SparseOperator::from_terms(&sb, h_prep.terms())?;
            let start = wall.to_dense()?;
            // small deterministic admixture so the start overlaps every symmetry subspace
            let mut v = start.amps.clone();
            for (i, x) in v.iter_mut().enumerate() {
                *x += C64::new(1e-3 * (0.37 * i as f64 + 0.11).sin(), 0.0);
            }
            let gp = lanczos_ground(|x: &Array1<C64>| Ok(op.apply(x)), &v, 80, 40, 1e-9)?;
            if !gp.converged {
                return Err(Error::Convergence { energies: vec![gp.energy] });
            }
            let mut amps = gp.vector;
            fix_phase(&mut amps);
            let energy = op.expectation(&amps).re;
            Ok(GroundState {
                state: QuantumState::Dense(DenseState { sb, amps }),
                energy,
                energies: vec![energy],
            })
        }
        GroundMethod::VariationalSweeps(cfg) => {
            let init = wall.to_mps()?;
            let res = dmrg_ground_state(h_prep.mpo(), &init, cfg)?;
            let energy = mpo_expectation(&res.state, h_prep.mpo())?.re;
            Ok(GroundState { state: QuantumState::Mps(res.state), energy, energies: res.sweep_energies })
        }
    }
}

/// Makes the largest amplitude real and positive.
fn fix_phase(v: &mut Array1<C64>) {
    if let Some(m) = v.iter().copied().max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()) {
        if m.norm() > 0.0 {
            let ph = m.conj() / m.norm();
            v.mapv_inplace(|x| x * ph);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bh, CouplingSet, PrepPotential};

    fn sz_profile(st: &QuantumState) -> Vec<f64> {
        let d = st.to_dense().unwrap();
        let basis = d.sb.basis().clone();
        let mut out = vec![0.0; d.sb.length()];
        for (i, &key) in d.sb.configs().iter().enumerate() {
            let p = d.amps[i].norm_sqr();
            for (j, o) in out.iter_mut().enumerate() {
                let (u, dn) = basis.occupation(d.sb.site_state(key, j));
                *o += p * 0.5 * (u as f64 - dn as f64);
            }
        }
        out
    }

    #[test]
    fn domain_wall_profile() {
        let st = domain_wall(&SiteBasis::t_j(), 4).unwrap();
        assert_eq!(sz_profile(&st), vec![0.5, 0.5, -0.5, -0.5]);
        assert_eq!(st.sector(), SymmetrySector { n_up: 2, n_down: 2 });
        assert_eq!(st.as_mps().unwrap().max_bond(), 1);
        assert!(domain_wall(&SiteBasis::t_j(), 5).is_err());
    }

    #[test]
    fn hole_and_flip() {
        let b = SiteBasis::t_j();
        let wall = domain_wall(&b, 4).unwrap();
        let h = apply_hole(&wall, 1).unwrap();
        assert_eq!(sz_profile(&h), vec![0.0, 0.5, -0.5, -0.5]);
        assert_eq!(h.sector(), SymmetrySector { n_up: 1, n_down: 2 });
        assert!(matches!(apply_hole(&h, 1), Err(Error::AnnihilationOfVacuum { site: 1, .. })));
        let f = apply_spin_flip(&wall, 2).unwrap();
        assert_eq!(sz_profile(&f), vec![0.5, -0.5, -0.5, -0.5]);
        assert_eq!(f.sector(), SymmetrySector { n_up: 1, n_down: 3 });
        assert!(matches!(apply_spin_flip(&f, 2), Err(Error::FlipOfDownSpin { site: 2, .. })));
        assert!(apply_hole(&domain_wall(&SiteBasis::spin_half(), 4).unwrap(), 1).is_err());
    }

    #[test]
    fn defects_commute_with_representation() {
        let b = SiteBasis::boson(2).unwrap();
        let wall = domain_wall(&b, 6).unwrap();
        let dense = wall.clone().into_dense().unwrap();
        for (a, bst) in [
            (apply_hole(&wall, 2).unwrap(), apply_hole(&dense, 2).unwrap()),
            (apply_spin_flip(&wall, 3).unwrap(), apply_spin_flip(&dense, 3).unwrap()),
        ] {
            assert!((a.overlap(&bst).unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bh_ground_state_methods_agree() {
        let c = CouplingSet::isotropic(1.0, 15.0).unwrap();
        let h = build_bh(6, &c, 2, Some(PrepPotential::domain_wall(10.0))).unwrap();
        let sec = SymmetrySector { n_up: 3, n_down: 3 };
        let d = prepare_bh_ground(&h, sec, &GroundMethod::DenseEigensolver).unwrap();
        let v = prepare_bh_ground(&h, sec, &GroundMethod::VariationalSweeps(DmrgConfig::default())).unwrap();
        assert!((d.energy - v.energy).abs() < 1e-8, "{} vs {}", d.energy, v.energy);
        let ov = d.state.overlap(&v.state).unwrap().norm_sqr();
        assert!((ov - 1.0).abs() < 1e-8);
        let wall = domain_wall(&h.basis, 6).unwrap();
        assert!(d.state.overlap(&wall).unwrap().norm_sqr() > 0.9);
    }
}
