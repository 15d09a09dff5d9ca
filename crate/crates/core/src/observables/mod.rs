//! Magnetization and density profiles, two-point correlators, decomposed
//! currents, entanglement entropies and the trajectory record.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::models::{BasisKind, HamiltonianRep, LocalOpName, SiteBasis, SparseOperator, Term};
use crate::states::{DenseState, QuantumState};
use crate::tensornet::{entropy_of, mpo_expectation, Measurer, Mps, SiteOp};

mod record;

pub use record::{RunMetadata, Sample, TrajectoryRecord, TIME_TOL};

/// Stable observable keys; they double as the CSV `key` column.
pub mod keys {
    pub const SZ_PROFILE: &str = "sz_profile";
    pub const SX_PROFILE: &str = "sx_profile";
    pub const SY_PROFILE: &str = "sy_profile";
    pub const DENSITY: &str = "density";
    pub const ZETA: &str = "zeta";
    pub const CHI: &str = "chi";
    pub const SZSZ: [&str; 3] = ["szsz_d0", "szsz_d1", "szsz_d2"];
    pub const SXSX: [&str; 3] = ["sxsx_d0", "sxsx_d1", "sxsx_d2"];
    pub const CURRENT_UP: &str = "current_up";
    pub const CURRENT_DOWN: &str = "current_down";
    pub const CURRENT_SPIN: &str = "current_spin";
    pub const CURRENT_UP_2SITE: &str = "current_up_2site";
    pub const CURRENT_UP_3SITE: &str = "current_up_3site";
    pub const CURRENT_DOWN_2SITE: &str = "current_down_2site";
    pub const CURRENT_DOWN_3SITE: &str = "current_down_3site";
    pub const CURRENT_SPIN_2SITE: &str = "current_spin_2site";
    pub const CURRENT_SPIN_3SITE: &str = "current_spin_3site";
    pub const ENTROPY: &str = "entropy";
    pub const ENERGY: &str = "energy";
    pub const NORM: &str = "norm";
}

/// Groups of observables that can be requested for a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    SzProfile,
    SxProfile,
    SyProfile,
    Density,
    /// `zeta` and `chi`.
    Correlators,
    /// Raw `szsz_d*` and `sxsx_d*` products for shifted pairs.
    Products,
    Currents,
    Entropy,
    Energy,
    Norm,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 10] = [
        ObservableKind::SzProfile,
        ObservableKind::SxProfile,
        ObservableKind::SyProfile,
        ObservableKind::Density,
        ObservableKind::Correlators,
        ObservableKind::Products,
        ObservableKind::Currents,
        ObservableKind::Entropy,
        ObservableKind::Energy,
        ObservableKind::Norm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::SzProfile => "sz_profile",
            ObservableKind::SxProfile => "sx_profile",
            ObservableKind::SyProfile => "sy_profile",
            ObservableKind::Density => "density",
            ObservableKind::Correlators => "correlators",
            ObservableKind::Products => "products",
            ObservableKind::Currents => "currents",
            ObservableKind::Entropy => "entropy",
            ObservableKind::Energy => "energy",
            ObservableKind::Norm => "norm",
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObservableKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Lookup(format!("unknown observable group `{s}`")))
    }
}

pub type ObservableSet = BTreeSet<ObservableKind>;

/// Everything except the transverse profiles and entropies.
pub fn default_observables() -> ObservableSet {
    [
        ObservableKind::SzProfile,
        ObservableKind::Density,
        ObservableKind::Correlators,
        ObservableKind::Products,
        ObservableKind::Currents,
        ObservableKind::Energy,
        ObservableKind::Norm,
    ]
    .into_iter()
    .collect()
}

/// Central pair `(i, j) = (L/2 + 1 - dx, L/2 + dx)` (1-based).
pub fn central_pair(length: usize, dx: usize) -> Result<(usize, usize)> {
    let half = length / 2;
    if dx == 0 || dx > half {
        return param(format!("distance {dx} outside 1..={half}"));
    }
    Ok((half + 1 - dx, half + dx))
}

/// Currents through one bond, split by term length.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BondCurrents {
    pub up: f64,
    pub down: f64,
    /// `(up - down) / 2`.
    pub spin: f64,
    pub up_2site: f64,
    pub down_2site: f64,
    /// `up_2site - down_2site`, without the factor 1/2 of `spin`.
    pub spin_2site: f64,
    /// Three-site parts; `None` where a three-site window does not fit on
    /// both sides of the bond or the model has no three-site terms. The
    /// totals always include every crossing term, so at edge bonds they
    /// exceed the two-site part by the unreported three-site share.
    pub up_3site: Option<f64>,
    pub down_3site: Option<f64>,
    pub spin_3site: Option<f64>,
}

/// Expectation values of local operator products for either representation.
pub struct Probe<'a> {
    basis: SiteBasis,
    length: usize,
    inner: ProbeInner<'a>,
    rdms: HashMap<(usize, usize), Array2<C64>>,
}

enum ProbeInner<'a> {
    Mps(Measurer),
    Dense { state: &'a DenseState, norm2: f64 },
}

impl<'a> Probe<'a> {
    pub fn new(state: &'a QuantumState) -> Result<Self> {
        let inner = match state {
            QuantumState::Mps(m) => ProbeInner::Mps(Measurer::new(m)?),
            QuantumState::Dense(d) => {
                let norm2 = d.amps.iter().map(|x| x.norm_sqr()).sum();
                ProbeInner::Dense { state: d, norm2 }
            }
        };
        Ok(Probe { basis: state.basis().clone(), length: state.len(), inner, rdms: HashMap::new() })
    }

    pub fn basis(&self) -> &SiteBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    fn op(&self, name: LocalOpName) -> Result<Array2<C64>> {
        Ok(self.basis.local_operator(name)?.matrix)
    }

    /// `<prod_k O_k>` for `(1-based site, matrix)` factors on distinct sites.
    pub fn expect(&mut self, ops: &[(usize, Array2<C64>)]) -> Result<C64> {
        for (s, _) in ops {
            if *s == 0 || *s > self.length {
                return Err(Error::Shape(format!("site {s} outside 1..={}", self.length)));
            }
        }
        match &mut self.inner {
            ProbeInner::Mps(m) => {
                let so: Vec<SiteOp> = ops.iter().map(|(s, o)| SiteOp { site: s - 1, matrix: o.clone() }).collect();
                m.expect(&so)
            }
            ProbeInner::Dense { state, norm2 } => {
                let so: Vec<(usize, &Array2<C64>)> = ops.iter().map(|(s, o)| (s - 1, o)).collect();
                Ok(dense_expect(state, &so) / *norm2)
            }
        }
    }

    /// Reduced density matrix of sites `lo..=hi` (1-based), basis ordering.
    pub fn rdm(&mut self, lo: usize, hi: usize) -> Result<Array2<C64>> {
        if lo == 0 || hi > self.length || lo > hi {
            return Err(Error::Shape(format!("window {lo}..={hi} outside 1..={}", self.length)));
        }
        if let Some(r) = self.rdms.get(&(lo, hi)) {
            return Ok(r.clone());
        }
        let r = match &mut self.inner {
            ProbeInner::Mps(m) => m.rdm(lo - 1, hi - 1)?,
            ProbeInner::Dense { state, norm2 } => dense_rdm(state, lo - 1, hi - 1) / C64::new(*norm2, 0.0),
        };
        self.rdms.insert((lo, hi), r.clone());
        Ok(r)
    }

    /// Expectation value of one Hamiltonian term.
    pub fn term(&mut self, t: &Term) -> Result<C64> {
        let rho = self.rdm(t.start, t.end())?;
        let op = t.dense_local();
        Ok((0..rho.nrows()).map(|a| (0..rho.ncols()).map(|b| rho[[a, b]] * op[[b, a]]).sum::<C64>()).sum())
    }

    pub fn sz(&mut self, site: usize) -> Result<f64> {
        let o = self.op(LocalOpName::Sz)?;
        Ok(self.single(site, &o)?.re)
    }

    fn single(&mut self, site: usize, op: &Array2<C64>) -> Result<C64> {
        let rho = self.rdm(site, site)?;
        Ok((0..rho.nrows()).map(|a| (0..rho.ncols()).map(|b| rho[[a, b]] * op[[b, a]]).sum::<C64>()).sum())
    }

    pub fn profile(&mut self, name: LocalOpName) -> Result<Vec<f64>> {
        let o = self.op(name)?;
        (1..=self.length).map(|j| Ok(self.single(j, &o)?.re)).collect()
    }

    pub fn density(&mut self) -> Result<Vec<f64>> {
        if self.basis.kind() == BasisKind::SpinHalf {
            return Err(Error::UnsupportedBasis("density is undefined for a spin-1/2 chain".into()));
        }
        self.profile(LocalOpName::NTotal)
    }

    /// Von Neumann entropy across 1-based bond `b`.
    pub fn entropy(&mut self, b: usize) -> Result<f64> {
        if b == 0 || b >= self.length {
            return Err(Error::Shape(format!("bond {b} outside 1..{}", self.length)));
        }
        match &mut self.inner {
            ProbeInner::Mps(m) => m.entropy(b - 1),
            ProbeInner::Dense { state, .. } => {
                let mut mps = Mps::from_dense(&state.sb, &state.amps)?;
                let sv = mps.schmidt_values(b - 1)?;
                Ok(entropy_of(&sv))
            }
        }
    }

    /// All bond entropies; the dense path converts once.
    pub fn entropies(&mut self) -> Result<Vec<f64>> {
        if self.length < 2 {
            return Ok(vec![]);
        }
        match &mut self.inner {
            ProbeInner::Mps(m) => (0..self.length - 1).map(|b| m.entropy(b)).collect(),
            ProbeInner::Dense { state, .. } => {
                let mut mps = Mps::from_dense(&state.sb, &state.amps)?;
                (0..self.length - 1).map(|b| mps.entropy(b)).collect()
            }
        }
    }

    /// Currents through 1-based bond `i`, from the terms of `h` crossing it.
    pub fn currents(&mut self, h: &HamiltonianRep, bond: usize) -> Result<BondCurrents> {
        if bond == 0 || bond >= self.length {
            return param(format!("bond {bond} outside 1..{}", self.length));
        }
        let mut parts = [[0.0f64; 2]; 2]; // [len 2, len 3][up, down]
        for t in h.terms_crossing(bond) {
            let dq = t.charge_right_of(bond);
            if dq.up == 0 && dq.down == 0 {
                continue;
            }
            let v = self.term(t)?;
            // -i * delta * <T>
            let slot = if t.len() >= 3 { 1 } else { 0 };
            parts[slot][0] += (C64::new(0.0, -(dq.up as f64)) * v).re;
            parts[slot][1] += (C64::new(0.0, -(dq.down as f64)) * v).re;
        }
        let up = parts[0][0] + parts[1][0];
        let down = parts[0][1] + parts[1][1];
        let has3 = h.three_site && bond >= 2 && bond + 2 <= self.length;
        let (up3, down3) = if has3 { (Some(parts[1][0]), Some(parts[1][1])) } else { (None, None) };
        Ok(BondCurrents {
            up,
            down,
            spin: 0.5 * (up - down),
            up_2site: parts[0][0],
            down_2site: parts[0][1],
            spin_2site: parts[0][0] - parts[0][1],
            up_3site: up3,
            down_3site: down3,
            spin_3site: has3.then(|| parts[1][0] - parts[1][1]),
        })
    }

    pub fn energy(&mut self, h: &HamiltonianRep, sparse: Option<&SparseOperator>) -> Result<f64> {
        match &mut self.inner {
            ProbeInner::Mps(m) => {
                let psi = m.state();
                let n2 = psi.norm().powi(2);
                Ok(mpo_expectation(psi, h.mpo())?.re / n2)
            }
            ProbeInner::Dense { state, norm2 } => match sparse {
                Some(op) => Ok(op.expectation(&state.amps).re / *norm2),
                None => {
                    let n2 = *norm2;
                    let st: &DenseState = state;
                    let mut e = 0.0;
                    for t in h.terms() {
                        let so: Vec<(usize, &Array2<C64>)> =
                            t.ops.iter().enumerate().map(|(k, o)| (t.start - 1 + k, o)).collect();
                        e += (t.coefficient * dense_expect(st, &so)).re / n2;
                    }
                    Ok(e)
                }
            },
        }
    }

    pub fn norm(&self) -> f64 {
        match &self.inner {
            ProbeInner::Mps(m) => m.state().norm(),
            ProbeInner::Dense { norm2, .. } => norm2.sqrt(),
        }
    }
}

/// `<psi| prod O |psi>` for 0-based `(site, op)` factors, unnormalized.
fn dense_expect(st: &DenseState, ops: &[(usize, &Array2<C64>)]) -> C64 {
    let sb = &st.sb;
    let d = sb.basis().dim();
    // per factor: nonzero (out, value) lists for each input state; rightmost acts first
    let tables: Vec<(usize, Vec<Vec<(usize, C64)>>)> = ops
        .iter()
        .rev()
        .map(|(site, m)| {
            let t = (0..d)
                .map(|si| (0..d).filter(|&so| m[[so, si]].norm() != 0.0).map(|so| (so, m[[so, si]])).collect())
                .collect();
            (*site, t)
        })
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    let mut cur: Vec<(u128, C64)> = Vec::new();
    let mut next: Vec<(u128, C64)> = Vec::new();
    for (i, &key) in sb.configs().iter().enumerate() {
        let a = st.amps[i];
        if a.norm() == 0.0 {
            continue;
        }
        cur.clear();
        cur.push((key, a));
        for (site, table) in &tables {
            next.clear();
            for &(k, amp) in &cur {
                let s = sb.site_state(k, *site);
                for &(s2, v) in &table[s] {
                    next.push((sb.with_site(k, *site, s2), amp * v));
                }
            }
            std::mem::swap(&mut cur, &mut next);
            if cur.is_empty() {
                break;
            }
        }
        for &(k, amp) in &cur {
            if let Some(j) = sb.index_of(k) {
                acc += st.amps[j].conj() * amp;
            }
        }
    }
    acc
}

/// Reduced density matrix of 0-based sites `lo..=hi`, unnormalized.
fn dense_rdm(st: &DenseState, lo: usize, hi: usize) -> Array2<C64> {
    let sb = &st.sb;
    let d = sb.basis().dim();
    let n = hi - lo + 1;
    let dim = d.pow(n as u32);
    let window = |key: u128| -> usize { (lo..=hi).fold(0, |acc, j| acc * d + sb.site_state(key, j)) };
    let env_of = |key: u128| -> u128 { (lo..=hi).fold(key, |k, j| sb.with_site(k, j, 0)) };
    let mut groups: BTreeMap<u128, Vec<(usize, C64)>> = BTreeMap::new();
    for (i, &key) in sb.configs().iter().enumerate() {
        let a = st.amps[i];
        if a.norm() != 0.0 {
            groups.entry(env_of(key)).or_default().push((window(key), a));
        }
    }
    let mut rho = Array2::<C64>::zeros((dim, dim));
    for g in groups.values() {
        for &(wa, a) in g {
            for &(wb, b) in g {
                rho[[wa, wb]] += a * b.conj();
            }
        }
    }
    rho
}

/// Measures the requested observable groups.
pub fn measure(
    state: &QuantumState,
    h: &HamiltonianRep,
    sparse: Option<&SparseOperator>,
    set: &ObservableSet,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut p = Probe::new(state)?;
    let l = p.len();
    let mut out = BTreeMap::new();
    let has_holes = p.basis().kind() != BasisKind::SpinHalf;
    let mut sz = None;
    for kind in set {
        match kind {
            ObservableKind::SzProfile => {
                let v = p.profile(LocalOpName::Sz)?;
                sz = Some(v.clone());
                out.insert(keys::SZ_PROFILE.to_string(), v);
            }
            ObservableKind::SxProfile => {
                out.insert(keys::SX_PROFILE.to_string(), p.profile(LocalOpName::Sx)?);
            }
            ObservableKind::SyProfile => {
                out.insert(keys::SY_PROFILE.to_string(), p.profile(LocalOpName::Sy)?);
            }
            ObservableKind::Density => {
                if has_holes {
                    out.insert(keys::DENSITY.to_string(), p.density()?);
                }
            }
            ObservableKind::Correlators | ObservableKind::Products => {}
            ObservableKind::Currents => {
                if l >= 2 {
                    let cs: Vec<BondCurrents> = (1..l).map(|b| p.currents(h, b)).collect::<Result<_>>()?;
                    let opt = |x: Option<f64>| x.unwrap_or(f64::NAN);
                    let cols: [(&str, Box<dyn Fn(&BondCurrents) -> f64>); 9] = [
                        (keys::CURRENT_UP, Box::new(|c| c.up)),
                        (keys::CURRENT_DOWN, Box::new(|c| c.down)),
                        (keys::CURRENT_SPIN, Box::new(|c| c.spin)),
                        (keys::CURRENT_UP_2SITE, Box::new(|c| c.up_2site)),
                        (keys::CURRENT_DOWN_2SITE, Box::new(|c| c.down_2site)),
                        (keys::CURRENT_SPIN_2SITE, Box::new(|c| c.spin_2site)),
                        (keys::CURRENT_UP_3SITE, Box::new(move |c| opt(c.up_3site))),
                        (keys::CURRENT_DOWN_3SITE, Box::new(move |c| opt(c.down_3site))),
                        (keys::CURRENT_SPIN_3SITE, Box::new(move |c| opt(c.spin_3site))),
                    ];
                    for (k, f) in cols.iter() {
                        out.insert(k.to_string(), cs.iter().map(f).collect());
                    }
                }
            }
            ObservableKind::Entropy => {
                out.insert(keys::ENTROPY.to_string(), p.entropies()?);
            }
            ObservableKind::Energy => {
                out.insert(keys::ENERGY.to_string(), vec![p.energy(h, sparse)?]);
            }
            ObservableKind::Norm => {
                out.insert(keys::NORM.to_string(), vec![p.norm()]);
            }
        }
    }
    let want_corr = set.contains(&ObservableKind::Correlators);
    let want_prod = set.contains(&ObservableKind::Products);
    if (want_corr || want_prod) && l >= 2 {
        let szo = p.op(LocalOpName::Sz)?;
        let sxo = p.op(LocalOpName::Sx)?;
        let sz = match sz {
            Some(v) => v,
            None => p.profile(LocalOpName::Sz)?,
        };
        let half = l / 2;
        let mut zz = [Vec::new(), Vec::new(), Vec::new()];
        let mut xx = [Vec::new(), Vec::new(), Vec::new()];
        let shifts = if want_prod { 3 } else { 1 };
        for d in 0..shifts {
            for dx in 1..=half {
                let (i, j) = central_pair(l, dx)?;
                if j + d > l {
                    break;
                }
                zz[d].push(p.expect(&[(i + d, szo.clone()), (j + d, szo.clone())])?.re);
                xx[d].push(p.expect(&[(i + d, sxo.clone()), (j + d, sxo.clone())])?.re);
            }
        }
        if want_corr {
            let zeta: Vec<f64> = (1..=half)
                .map(|dx| {
                    let (i, j) = central_pair(l, dx).unwrap();
                    zz[0][dx - 1] - sz[i - 1] * sz[j - 1]
                })
                .collect();
            out.insert(keys::ZETA.to_string(), zeta);
            out.insert(keys::CHI.to_string(), xx[0].clone());
        }
        if want_prod {
            for d in 0..3 {
                out.insert(keys::SZSZ[d].to_string(), zz[d].clone());
                out.insert(keys::SXSX[d].to_string(), xx[d].clone());
            }
        }
    }
    Ok(out)
}

/// `<S^z_j>` for every site.
pub fn magnetization_profile(state: &QuantumState) -> Result<Vec<f64>> {
    Probe::new(state)?.profile(LocalOpName::Sz)
}

/// `<n_up,j + n_down,j>` for every site.
pub fn density_profile(state: &QuantumState) -> Result<Vec<f64>> {
    Probe::new(state)?.density()
}

/// Connected `S^z S^z` correlator across the chain center.
pub fn connected_zz(state: &QuantumState, dx: usize) -> Result<f64> {
    let (i, j) = central_pair(state.len(), dx)?;
    let mut p = Probe::new(state)?;
    let sz = p.op(LocalOpName::Sz)?;
    let zz = p.expect(&[(i, sz.clone()), (j, sz)])?.re;
    Ok(zz - p.sz(i)? * p.sz(j)?)
}

/// `<S^x_i S^x_j>` across the chain center.
pub fn xx_correlator(state: &QuantumState, dx: usize) -> Result<f64> {
    let (i, j) = central_pair(state.len(), dx)?;
    let mut p = Probe::new(state)?;
    let sx = p.op(LocalOpName::Sx)?;
    Ok(p.expect(&[(i, sx.clone()), (j, sx)])?.re)
}

pub fn currents(state: &QuantumState, h: &HamiltonianRep, bond: usize) -> Result<BondCurrents> {
    Probe::new(state)?.currents(h, bond)
}

pub fn entanglement_entropy(state: &QuantumState, bond: usize) -> Result<f64> {
    Probe::new(state)?.entropy(bond)
}

#[cfg(test)]
mod tests;
