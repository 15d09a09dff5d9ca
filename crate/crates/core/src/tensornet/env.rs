//! Environment contractions: MPO expectation values and windowed local
//! operator products.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use super::mpo::Mpo;
use super::mps::{site_leg, Mps};
use super::tensor::{BlockTensor, Dir, Leg};
use crate::error::{Error, Result};
use crate::models::SiteBasis;
use crate::symmetry::Charge;

/// Left boundary `[bra In, m Out, ket Out]` equal to the identity on `bond`
/// (an MPS left leg, direction In) with a trivial operator leg.
pub(crate) fn left_identity(bond: &Leg, m_charge: Charge) -> BlockTensor {
    let mut t = BlockTensor::new(vec![bond.clone(), Leg::trivial(Dir::Out, m_charge), bond.flipped()]);
    for (i, &(_, d)) in bond.sectors.iter().enumerate() {
        let eye: Array2<C64> = Array2::eye(d);
        let blk = eye.into_shape_with_order(IxDyn(&[d, 1, d])).unwrap();
        let key = vec![i, 0, i];
        if t.flux_ok(&key) {
            t.insert(key, blk);
        }
    }
    t
}

/// One site of a left environment sweep: `L' = conj(A) W A L`.
pub(crate) fn extend_left(env: &BlockTensor, a: &BlockTensor, w: &BlockTensor) -> Result<BlockTensor> {
    let t1 = env.contract(&[2], a, &[0])?; // [bra, m, s, r]
    let t2 = t1.contract(&[1, 2], w, &[0, 2])?; // [bra, r, so, mr]
    let t3 = a.conj().contract(&[0, 1], &t2, &[0, 2])?; // [rb, r, mr]
    Ok(t3.permute(&[0, 2, 1]))
}

/// One site of a right environment sweep, `R [bra Out, m In, ket In]`.
pub(crate) fn extend_right(env: &BlockTensor, a: &BlockTensor, w: &BlockTensor) -> Result<BlockTensor> {
    let t1 = a.contract(&[2], env, &[2])?; // [l, s, bra, m]
    let t2 = w.contract(&[2, 3], &t1, &[1, 3])?; // [ml, so, l, bra]
    let t3 = a.conj().contract(&[1, 2], &t2, &[1, 3])?; // [lb, ml, l]
    Ok(t3)
}

pub(crate) fn right_boundary(total: Charge) -> BlockTensor {
    let mut t = BlockTensor::new(vec![
        Leg::trivial(Dir::Out, total),
        Leg::trivial(Dir::In, Charge::ZERO),
        Leg::trivial(Dir::In, total),
    ]);
    t.insert(vec![0, 0, 0], ArrayD::from_elem(IxDyn(&[1, 1, 1]), C64::new(1.0, 0.0)));
    t
}

pub(crate) fn left_boundary() -> BlockTensor {
    left_identity(&Leg::trivial(Dir::In, Charge::ZERO), Charge::ZERO)
}

/// `<psi|W|psi>` (not normalized).
pub fn mpo_expectation(psi: &Mps, w: &Mpo) -> Result<C64> {
    if psi.len() != w.len() {
        return Err(Error::Shape("MPO and MPS lengths differ".into()));
    }
    let mut env = left_boundary();
    for j in 0..psi.len() {
        env = extend_left(&env, psi.tensor(j), w.tensor(j))?;
    }
    Ok(env.blocks().map(|(_, b)| b.iter().copied().sum::<C64>()).sum())
}

/// Local operator on one site, given as a dense matrix in basis ordering.
#[derive(Clone, Debug)]
pub struct SiteOp {
    pub site: usize,
    pub matrix: Array2<C64>,
}

/// Measures products of local operators; keeps its own copy of the state
/// and moves the orthogonality center as needed.
#[derive(Clone, Debug)]
pub struct Measurer {
    psi: Mps,
    norm2: f64,
}

impl Measurer {
    pub fn new(psi: &Mps) -> Result<Self> {
        let mut psi = psi.clone();
        if psi.center().is_none() {
            psi.canonicalize(0)?;
        }
        let norm2 = psi.norm().powi(2);
        Ok(Measurer { psi, norm2 })
    }

    pub fn state(&self) -> &Mps {
        &self.psi
    }

    /// `<psi| prod_k ops[k] |psi> / <psi|psi>`; sites (0-based) must be distinct.
    pub fn expect(&mut self, ops: &[SiteOp]) -> Result<C64> {
        let l = self.psi.len();
        if ops.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let mut sites: Vec<usize> = ops.iter().map(|o| o.site).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("operator product repeats a site".into()));
        }
        let (lo, hi) = (sites[0], *sites.last().unwrap());
        if hi >= l {
            return Err(Error::Shape(format!("site {} out of range for L = {l}", hi + 1)));
        }
        let c = self.psi.center().unwrap_or(0);
        let target = c.clamp(lo, hi);
        self.psi.canonicalize(target)?;

        let basis = self.psi.basis().clone();
        let ws = window_mpo(&basis, lo, hi, ops)?;
        let mut env = left_identity(self.psi.tensor(lo).leg(0), Charge::ZERO);
        for (k, w) in ws.iter().enumerate() {
            env = extend_left(&env, self.psi.tensor(lo + k), w)?;
        }
        // close with the identity on the right bond, operator charge zero
        let mut s = C64::new(0.0, 0.0);
        for (key, blk) in env.blocks() {
            if env.leg(1).charge(key[1]) != Charge::ZERO || key[0] != key[2] {
                continue;
            }
            let n = blk.shape()[0];
            for i in 0..n {
                s += blk[[i, 0, i]];
            }
        }
        Ok(s / self.norm2)
    }

    /// Reduced density matrix of the 0-based sites `lo..=hi`, in basis
    /// ordering with site `lo` most significant.
    pub fn rdm(&mut self, lo: usize, hi: usize) -> Result<Array2<C64>> {
        let l = self.psi.len();
        if lo > hi || hi >= l {
            return Err(Error::Shape(format!("window {}..={} out of range for L = {l}", lo + 1, hi + 1)));
        }
        let c = self.psi.center().unwrap_or(0);
        self.psi.canonicalize(c.clamp(lo, hi))?;
        let mut t = self.psi.tensor(lo).clone();
        for j in lo + 1..=hi {
            let r = t.rank();
            t = t.contract(&[r - 1], self.psi.tensor(j), &[0])?;
        }
        let n = hi - lo + 1;
        let rho = t.contract(&[0, n + 1], &t.conj(), &[0, n + 1])?.to_dense();
        let basis = self.psi.basis();
        let d = basis.dim();
        let phys = site_leg(basis);
        let pos: Vec<usize> = (0..d).map(|s| phys.find(basis.charge(s)).unwrap()).collect();
        let dim = d.pow(n as u32);
        let mut out = Array2::<C64>::zeros((dim, dim));
        let digits = |mut x: usize| -> Vec<usize> {
            let mut v = vec![0; n];
            for k in (0..n).rev() {
                v[k] = pos[x % d];
                x /= d;
            }
            v
        };
        for a in 0..dim {
            let da = digits(a);
            for b in 0..dim {
                let mut idx = da.clone();
                idx.extend(digits(b));
                out[[a, b]] = rho[IxDyn(&idx)] / self.norm2;
            }
        }
        Ok(out)
    }

    /// Von Neumann entropy across the bond after 0-based site `b`.
    pub fn entropy(&mut self, b: usize) -> Result<f64> {
        self.psi.entropy(b)
    }
}

/// Operator-valued window `[lo, hi]` whose bonds carry the accumulated
/// charge of the factors placed so far.
fn window_mpo(basis: &SiteBasis, lo: usize, hi: usize, ops: &[SiteOp]) -> Result<Vec<BlockTensor>> {
    let d = basis.dim();
    let charges = basis.charges();
    let phys = site_leg(basis);
    let pos: Vec<usize> = (0..d).map(|s| phys.find(charges[s]).unwrap()).collect();
    let mut reach: BTreeSet<Charge> = BTreeSet::from([Charge::ZERO]);
    let mut out = Vec::with_capacity(hi - lo + 1);
    for j in lo..=hi {
        let m = match ops.iter().find(|o| o.site == j) {
            Some(o) => {
                if o.matrix.dim() != (d, d) {
                    return Err(Error::Shape("local operator does not match the site dimension".into()));
                }
                o.matrix.clone()
            }
            None => Array2::eye(d),
        };
        let mut comps: Vec<(Charge, usize, usize, C64)> = Vec::new();
        for ((so, si), v) in m.indexed_iter() {
            if v.norm() != 0.0 {
                comps.push((charges[so] - charges[si], so, si, *v));
            }
        }
        let mut next: BTreeSet<Charge> = BTreeSet::new();
        for q in &reach {
            for c in &comps {
                next.insert(*q + c.0);
            }
        }
        if j == hi {
            next.retain(|q| *q == Charge::ZERO);
        }
        let lleg = Leg::new(Dir::In, reach.iter().map(|&q| (q, 1)).collect());
        let rleg = Leg::new(Dir::Out, next.iter().map(|&q| (q, 1)).collect());
        let mut w = BlockTensor::new(vec![lleg.clone(), phys.clone(), phys.flipped(), rleg.clone()]);
        for (li, q) in reach.iter().enumerate() {
            for &(dq, so, si, v) in &comps {
                let Some(ri) = rleg.find(*q + dq) else { continue };
                let key = vec![li, pos[so], pos[si], ri];
                let blk = w.block_or_zeros(&key);
                blk[[0, 0, 0, 0]] += v;
            }
        }
        out.push(w);
        reach = next;
    }
    Ok(out)
}

/// One-off expectation value of a local operator product.
pub fn expectation(psi: &Mps, ops: &[SiteOp]) -> Result<C64> {
    Measurer::new(psi)?.expect(ops)
}
