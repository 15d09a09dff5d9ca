use std::fmt;
use std::sync::OnceLock;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::basis::{LocalOp, LocalOpName, SiteBasis};
use super::couplings::CouplingSet;
use crate::error::{param, Error, Result};
use crate::symmetry::Charge;
use crate::tensornet::Mpo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Xxz,
    Bh,
    Tj,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Xxz => "xxz",
            ModelKind::Bh => "bh",
            ModelKind::Tj => "tj",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Up,
    Down,
}

/// Species-selective chemical potential used to prepare the wall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepPotential {
    pub mu: f64,
    pub left_species: Species,
    pub right_species: Species,
}

impl PrepPotential {
    pub fn domain_wall(mu: f64) -> Self {
        PrepPotential { mu, left_species: Species::Up, right_species: Species::Down }
    }
}

/// `coefficient * ops[0] (x) ops[1] (x) ...` acting on sites `start, start + 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    /// First site of the window (1-based).
    pub start: usize,
    pub ops: Vec<Array2<C64>>,
    pub names: Vec<String>,
    /// Charge transfer of each factor, all definite.
    pub charges: Vec<Charge>,
    pub coefficient: C64,
}

impl Term {
    pub fn new(start: usize, ops: &[LocalOp], coefficient: C64) -> Result<Self> {
        let mut charges = Vec::with_capacity(ops.len());
        for op in ops {
            charges.push(op.charge.ok_or_else(|| {
                Error::Parameter(format!("term factor {} has no definite charge", op.name))
            })?);
        }
        Ok(Term {
            start,
            ops: ops.iter().map(|o| o.matrix.clone()).collect(),
            names: ops.iter().map(|o| o.name.clone()).collect(),
            charges,
            coefficient,
        })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Last site of the window.
    pub fn end(&self) -> usize {
        self.start + self.ops.len() - 1
    }

    pub fn adjoint(&self) -> Term {
        Term {
            start: self.start,
            ops: self.ops.iter().map(|m| m.t().mapv(|x| x.conj())).collect(),
            names: self.names.iter().map(|n| format!("{n}^dag")).collect(),
            charges: self.charges.iter().map(|&c| -c).collect(),
            coefficient: self.coefficient.conj(),
        }
    }

    /// Net charge moved onto the sites right of bond `i`.
    pub fn charge_right_of(&self, bond: usize) -> Charge {
        let mut q = Charge::ZERO;
        for (k, c) in self.charges.iter().enumerate() {
            if self.start + k > bond {
                q += *c;
            }
        }
        q
    }

    /// Dense matrix on the window, first site most significant, coefficient included.
    pub fn dense_local(&self) -> Array2<C64> {
        let mut m = Array2::from_elem((1, 1), self.coefficient);
        for op in &self.ops {
            m = kron(&m, op);
        }
        m
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .names
            .iter()
            .enumerate()
            .map(|(k, n)| format!("{n}_{}", self.start + k))
            .collect();
        format!("{} {}", self.coefficient, parts.join(" "))
    }
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), x) in a.indexed_iter() {
        if *x == C64::new(0.0, 0.0) {
            continue;
        }
        let mut blk = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        blk.zip_mut_with(b, |o, y| *o = x * y);
    }
    out
}

/// A lattice Hamiltonian as a sum of local product terms.
#[derive(Clone, Debug)]
pub struct HamiltonianRep {
    pub kind: ModelKind,
    pub basis: SiteBasis,
    pub length: usize,
    pub couplings: CouplingSet,
    pub three_site: bool,
    pub prep: Option<PrepPotential>,
    terms: Vec<Term>,
    mpo: OnceLock<Mpo>,
}

impl HamiltonianRep {
    pub fn from_terms(
        kind: ModelKind,
        basis: SiteBasis,
        length: usize,
        couplings: CouplingSet,
        terms: Vec<Term>,
    ) -> Result<Self> {
        for t in &terms {
            if t.start < 1 || t.is_empty() || t.end() > length {
                return param(format!("term window [{}, {}] outside [1, {length}]", t.start, t.end()));
            }
            if t.ops.iter().any(|m| m.dim() != (basis.dim(), basis.dim())) {
                return Err(Error::Shape("term factor does not match the site dimension".into()));
            }
        }
        Ok(HamiltonianRep {
            kind,
            basis,
            length,
            couplings,
            three_site: false,
            prep: None,
            terms,
            mpo: OnceLock::new(),
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Matrix-product form, built on first use.
    pub fn mpo(&self) -> &Mpo {
        self.mpo.get_or_init(|| Mpo::from_terms(&self.basis, self.length, &self.terms))
    }

    /// Dense matrix on the full (unconstrained) product space. Small chains only.
    pub fn dense_matrix(&self) -> Result<Array2<C64>> {
        let d = self.basis.dim();
        let total = (d as f64).powi(self.length as i32);
        if total > 4096.0 {
            return param(format!("dense expansion of dimension {total} is too large"));
        }
        let n = d.pow(self.length as u32);
        let mut h = Array2::zeros((n, n));
        for t in &self.terms {
            let left = Array2::eye(d.pow((t.start - 1) as u32));
            let right = Array2::eye(d.pow((self.length - t.end()) as u32));
            h = h + kron(&kron(&left, &t.dense_local()), &right);
        }
        Ok(h)
    }

    /// Terms whose window crosses bond `i` (between sites `i` and `i + 1`).
    pub fn terms_crossing(&self, bond: usize) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(move |t| t.start <= bond && t.end() > bond)
    }
}

struct Ops<'a> {
    basis: &'a SiteBasis,
}

impl Ops<'_> {
    fn get(&self, name: LocalOpName) -> LocalOp {
        self.basis.local_operator(name).expect("operator valid for basis")
    }

    fn custom(&self, name: &str, matrix: Array2<C64>) -> LocalOp {
        LocalOp::new(name, matrix, &self.basis.charges())
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn push(terms: &mut Vec<Term>, start: usize, ops: &[LocalOp], c: f64) {
    if c != 0.0 {
        terms.push(Term::new(start, ops, re(c)).expect("charge-definite factors"));
    }
}

fn push_with_adjoint(terms: &mut Vec<Term>, start: usize, ops: &[LocalOp], c: f64) {
    if c != 0.0 {
        let t = Term::new(start, ops, re(c)).expect("charge-definite factors");
        let a = t.adjoint();
        terms.push(t);
        terms.push(a);
    }
}

fn exchange_terms(terms: &mut Vec<Term>, ops: &Ops, length: usize, j_perp: f64, j_z: f64) {
    let (sp, sm, sz) = (ops.get(LocalOpName::SPlus), ops.get(LocalOpName::SMinus), ops.get(LocalOpName::Sz));
    for j in 1..length {
        push_with_adjoint(terms, j, &[sp.clone(), sm.clone()], 0.5 * j_perp);
        push(terms, j, &[sz.clone(), sz.clone()], j_z);
    }
}

/// Open XXZ chain `J_perp (SxSx + SySy) + J_z SzSz`.
pub fn build_xxz(length: usize, j_perp: f64, j_z: f64) -> Result<HamiltonianRep> {
    if length < 2 {
        return param(format!("XXZ chain needs L >= 2, got {length}"));
    }
    let basis = SiteBasis::spin_half();
    let mut terms = Vec::new();
    exchange_terms(&mut terms, &Ops { basis: &basis }, length, j_perp, j_z);
    HamiltonianRep::from_terms(ModelKind::Xxz, basis, length, CouplingSet::xxz(j_perp, j_z), terms)
}

/// Two-species Bose-Hubbard chain truncated at `n_max` bosons per species.
pub fn build_bh(
    length: usize,
    couplings: &CouplingSet,
    n_max: usize,
    prep: Option<PrepPotential>,
) -> Result<HamiltonianRep> {
    if length < 2 {
        return param(format!("BH chain needs L >= 2, got {length}"));
    }
    if prep.is_some() && length % 2 == 1 {
        return param("preparation potential needs an even L");
    }
    let basis = SiteBasis::boson(n_max)?;
    let ops = Ops { basis: &basis };
    let mut terms = Vec::new();
    for (t, cr, an) in [
        (couplings.t_up, LocalOpName::BUpDag, LocalOpName::BUp),
        (couplings.t_down, LocalOpName::BDownDag, LocalOpName::BDown),
    ] {
        for j in 1..length {
            push_with_adjoint(&mut terms, j, &[ops.get(cr), ops.get(an)], -t);
        }
    }

    let nu = ops.get(LocalOpName::NUp).matrix;
    let nd = ops.get(LocalOpName::NDown).matrix;
    let eye: Array2<C64> = Array2::eye(basis.dim());
    let onsite = nu.dot(&(&nu - &eye)).mapv(|x| x * 0.5 * couplings.u_up)
        + nd.dot(&(&nd - &eye)).mapv(|x| x * 0.5 * couplings.u_down)
        + nu.dot(&nd).mapv(|x| x * couplings.v);
    let onsite = ops.custom("onsite", onsite);
    let has_onsite = onsite.matrix.iter().any(|x| x.norm() > 0.0);
    for j in 1..=length {
        if has_onsite {
            push(&mut terms, j, std::slice::from_ref(&onsite), 1.0);
        }
        if let Some(p) = prep {
            let species = if j <= length / 2 { p.left_species } else { p.right_species };
            let n = match species {
                Species::Up => ops.get(LocalOpName::NUp),
                Species::Down => ops.get(LocalOpName::NDown),
            };
            push(&mut terms, j, &[n], -p.mu);
        }
    }
    let mut couplings = *couplings;
    if let Some(p) = prep {
        couplings.mu = Some(p.mu);
    }
    let mut h = HamiltonianRep::from_terms(ModelKind::Bh, basis, length, couplings, terms)?;
    h.prep = prep;
    Ok(h)
}

/// Hard-core two-species t-J chain: hopping, XXZ exchange and optional
/// second-order three-site hopping.
pub fn build_tj(length: usize, couplings: &CouplingSet, include_three_site: bool) -> Result<HamiltonianRep> {
    if length < 2 || (include_three_site && length < 3) {
        return param(format!("t-J chain too short: L = {length}"));
    }
    let basis = SiteBasis::t_j();
    let ops = Ops { basis: &basis };
    let c = couplings;
    let mut terms = Vec::new();

    use LocalOpName::*;
    let species = [
        (c.t_up, c.u_up, AUpDag, AUp, NUp, NDown),
        (c.t_down, c.u_down, ADownDag, ADown, NDown, NUp),
    ];
    for &(t, _, cr, an, _, _) in &species {
        for j in 1..length {
            push_with_adjoint(&mut terms, j, &[ops.get(cr), ops.get(an)], -t);
        }
    }
    exchange_terms(&mut terms, &ops, length, c.j_perp, c.j_z);

    if include_three_site {
        for j in 1..=length - 2 {
            for &(t, u, cr, an, n_same, n_other) in &species {
                let amp_a = if c.v > 0.0 { -t * t / c.v } else { 0.0 };
                push_with_adjoint(&mut terms, j, &[ops.get(cr), ops.get(n_other), ops.get(an)], amp_a);
                let amp_c = if u > 0.0 { -2.0 * t * t / u } else { 0.0 };
                push_with_adjoint(&mut terms, j, &[ops.get(cr), ops.get(n_same), ops.get(an)], amp_c);
            }
            let amp_b = if c.v > 0.0 { -c.t_up * c.t_down / c.v } else { 0.0 };
            // a^dag_{down,j} S^+_{j+1} a_{up,j+2} and a^dag_{up,j} S^-_{j+1} a_{down,j+2}
            push_with_adjoint(&mut terms, j, &[ops.get(ADownDag), ops.get(SPlus), ops.get(AUp)], amp_b);
            push_with_adjoint(&mut terms, j, &[ops.get(AUpDag), ops.get(SMinus), ops.get(ADown)], amp_b);
        }
    }
    let mut h = HamiltonianRep::from_terms(ModelKind::Tj, basis, length, *couplings, terms)?;
    h.three_site = include_three_site;
    Ok(h)
}
