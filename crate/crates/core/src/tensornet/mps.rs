use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, IxDyn};
use num_complex::Complex64 as C64;

use super::fusion::{identity, lq, qr, svd, to_block_matrix, unfuse_cols, unfuse_rows, BlockMatrix};
use super::tensor::{BlockTensor, Dir, Leg};
use crate::error::{Error, Result};
use crate::models::{SectorBasis, SiteBasis};
use crate::symmetry::Charge;

/// Relative singular-value floor below which values are treated as noise.
pub const SV_FLOOR: f64 = 1e-14;

/// Physical leg of one site: one sector of size one per local state.
pub fn site_leg(basis: &SiteBasis) -> Leg {
    Leg::new(Dir::In, basis.charges().into_iter().map(|q| (q, 1)).collect())
}

/// Matrix-product state with site tensors `[left In, phys In, right Out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    basis: SiteBasis,
    tensors: Vec<BlockTensor>,
    total: Charge,
    /// Orthogonality center (0-based) when known.
    center: Option<usize>,
}

impl Mps {
    /// Assembles an MPS from site tensors without checking canonical form.
    pub fn from_tensors(basis: SiteBasis, tensors: Vec<BlockTensor>) -> Result<Self> {
        let l = tensors.len();
        if l == 0 {
            return Err(Error::Shape("MPS needs at least one site".into()));
        }
        let last = tensors[l - 1].leg(2);
        if last.num_sectors() != 1 || last.size(0) != 1 {
            return Err(Error::Shape("right boundary leg must be one-dimensional".into()));
        }
        let total = last.charge(0);
        Ok(Mps { basis, tensors, total, center: None })
    }

    /// Product state from local state indices (0-based per site).
    pub fn product(basis: &SiteBasis, states: &[usize]) -> Result<Self> {
        let phys = site_leg(basis);
        let mut q = Charge::ZERO;
        let mut tensors = Vec::with_capacity(states.len());
        for &s in states {
            if s >= basis.dim() {
                return Err(Error::Shape(format!("local state {s} out of range")));
            }
            let c = basis.charge(s);
            let left = Leg::trivial(Dir::In, q);
            let right = Leg::trivial(Dir::Out, q + c);
            let mut t = BlockTensor::new(vec![left, phys.clone(), right]);
            let block = ndarray::ArrayD::from_elem(IxDyn(&[1, 1, 1]), C64::new(1.0, 0.0));
            t.insert(vec![0, phys.find(c).unwrap(), 0], block);
            tensors.push(t);
            q += c;
        }
        let mut m = Mps::from_tensors(basis.clone(), tensors)?;
        m.center = Some(0);
        Ok(m)
    }

    pub fn basis(&self) -> &SiteBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_charge(&self) -> Charge {
        self.total
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub(crate) fn set_center(&mut self, c: Option<usize>) {
        self.center = c;
    }

    pub fn tensor(&self, j: usize) -> &BlockTensor {
        &self.tensors[j]
    }

    pub(crate) fn standardize(&mut self) {
        for t in &mut self.tensors {
            t.standardize();
        }
    }

    pub(crate) fn tensor_mut(&mut self, j: usize) -> &mut BlockTensor {
        &mut self.tensors[j]
    }

    /// Bond dimensions of the `L - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.leg(2).dim()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn scale(&mut self, c: C64) {
        let j = self.center.unwrap_or(0);
        self.tensors[j].scale(c);
    }

    /// Left-normalizes site `j` and pushes the remainder into site `j + 1`.
    fn shift_right(&mut self, j: usize) -> Result<()> {
        let (rows, cols, mats) = to_block_matrix(&self.tensors[j], &[0, 1], &[2]);
        let mut qs = BlockMatrix::new();
        let mut rs = BlockMatrix::new();
        let mut sectors = Vec::new();
        for (q, m) in &mats {
            let (qm, rm) = qr(m)?;
            sectors.push((*q, qm.ncols()));
            qs.insert(*q, qm);
            rs.insert(*q, rm);
        }
        let bond = Leg::new(Dir::Out, sectors);
        self.tensors[j] = unfuse_rows(&rows, &qs, bond.clone());
        let r = unfuse_cols(bond.flipped(), &cols, &rs);
        self.tensors[j + 1] = r.contract(&[1], &self.tensors[j + 1], &[0])?;
        Ok(())
    }

    /// Right-normalizes site `j` and pushes the remainder into site `j - 1`.
    fn shift_left(&mut self, j: usize) -> Result<()> {
        let (rows, cols, mats) = to_block_matrix(&self.tensors[j], &[0], &[1, 2]);
        let mut ls = BlockMatrix::new();
        let mut qs = BlockMatrix::new();
        let mut sectors = Vec::new();
        for (q, m) in &mats {
            let (lm, qm) = lq(m)?;
            sectors.push((*q, qm.nrows()));
            ls.insert(*q, lm);
            qs.insert(*q, qm);
        }
        let bond = Leg::new(Dir::Out, sectors);
        self.tensors[j] = unfuse_cols(bond.flipped(), &cols, &qs);
        let l = unfuse_rows(&rows, &ls, bond);
        self.tensors[j - 1] = self.tensors[j - 1].contract(&[2], &l, &[0])?;
        Ok(())
    }

    /// Moves the orthogonality center to site `c` (0-based).
    pub fn canonicalize(&mut self, c: usize) -> Result<()> {
        assert!(c < self.len());
        match self.center {
            Some(cur) => {
                for j in cur..c {
                    self.shift_right(j)?;
                }
                for j in (c + 1..=cur).rev() {
                    self.shift_left(j)?;
                }
            }
            None => {
                for j in 0..c {
                    self.shift_right(j)?;
                }
                for j in (c + 1..self.len()).rev() {
                    self.shift_left(j)?;
                }
            }
        }
        self.center = Some(c);
        Ok(())
    }

    /// Full left-to-right QR sweep followed by a right-to-left sweep, ending at `c`.
    pub fn recanonicalize(&mut self, c: usize) -> Result<()> {
        self.center = None;
        self.canonicalize(self.len() - 1)?;
        self.canonicalize(c)
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].norm(),
            None => self.overlap(self).map(|x| x.re.max(0.0).sqrt()).unwrap_or(0.0),
        }
    }

    pub fn normalize(&mut self) -> Result<f64> {
        if self.center.is_none() {
            self.canonicalize(0)?;
        }
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        Ok(n)
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() || self.basis != other.basis {
            return Err(Error::Shape("overlap of MPS with different geometry".into()));
        }
        if self.total != other.total {
            return Ok(C64::new(0.0, 0.0));
        }
        let mut e = identity(&Leg::trivial(Dir::Out, Charge::ZERO));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let t = e.contract(&[1], b, &[0])?;
            e = a.conj().contract(&[0, 1], &t, &[0, 1])?;
        }
        let v = e.blocks().next().map(|(_, b)| b.iter().copied().sum()).unwrap_or(C64::new(0.0, 0.0));
        Ok(v)
    }

    /// Schmidt coefficients across bond `b` (between 0-based sites `b` and `b + 1`),
    /// sorted descending, for the state as stored (not renormalized).
    pub fn schmidt_values(&mut self, b: usize) -> Result<Vec<f64>> {
        assert!(b + 1 < self.len());
        self.canonicalize(b)?;
        let (_, _, mats) = to_block_matrix(&self.tensors[b], &[0, 1], &[2]);
        let mut all = Vec::new();
        for m in mats.values() {
            all.extend(svd(m)?.1);
        }
        all.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(all)
    }

    /// `sum_k c_k |psi_k>` as an MPS whose bonds are direct sums of the inputs'.
pub fn linear_combination(terms: &[(C64, &Mps)]) -> Result<Mps> {
    let (_, first) = *terms.first().ok_or_else(|| Error::Shape("empty linear combination".into()))?;
    let l = first.len();
    for (_, m) in terms {
        if m.len() != l || m.basis != first.basis || m.total != first.total {
            return Err(Error::Shape("linear combination of incompatible MPS".into()));
        }
    }
    let phys = site_leg(&first.basis);
    if l == 1 {
        let mut t = BlockTensor::new(first.tensors[0].legs().to_vec());
        for (c, m) in terms {
            for (key, blk) in m.tensors[0].blocks() {
                t.block_or_zeros(key).zip_mut_with(blk, |x, y| *x += c * y);
            }
        }
        return Mps::from_tensors(first.basis.clone(), vec![t]);
    }
    // per bond: charge -> offsets of each term inside the summed sector
    let mut bonds: Vec<BTreeMap<Charge, Vec<usize>>> = Vec::with_capacity(l - 1);
    for b in 0..l - 1 {
        let mut map: BTreeMap<Charge, Vec<usize>> = BTreeMap::new();
        for (k, (_, m)) in terms.iter().enumerate() {
            let leg = m.tensors[b].leg(2);
            for &(q, d) in &leg.sectors {
                let e = map.entry(q).or_insert_with(|| vec![0; terms.len() + 1]);
                e[k + 1] = d;
            }
        }
        for v in map.values_mut() {
            for k in 0..terms.len() {
                v[k + 1] += v[k];
            }
        }
        bonds.push(map);
    }
    let bond_leg = |b: usize| Leg::new(Dir::Out, bonds[b].iter().map(|(q, v)| (*q, v[terms.len()])).collect());
    let mut tensors = Vec::with_capacity(l);
    for j in 0..l {
        let left = if j == 0 { first.tensors[0].leg(0).clone() } else { bond_leg(j - 1).flipped() };
        let right = if j == l - 1 { first.tensors[l - 1].leg(2).clone() } else { bond_leg(j) };
        let mut t = BlockTensor::new(vec![left.clone(), phys.clone(), right.clone()]);
        for (k, (c, m)) in terms.iter().enumerate() {
            let src = &m.tensors[j];
            for (key, blk) in src.blocks() {
                let qs = src.key_charges(key);
                let ol = if j == 0 { 0 } else { bonds[j - 1][&qs[0]][k] };
                let or = if j == l - 1 { 0 } else { bonds[j][&qs[2]][k] };
                let nk = vec![left.find(qs[0]).unwrap(), key[1], right.find(qs[2]).unwrap()];
                let sh = blk.shape().to_vec();
                let dst = t.block_or_zeros(&nk);
                let mut view = dst.slice_mut(s![ol..ol + sh[0], .., or..or + sh[2]]);
                if j == 0 {
                    view.zip_mut_with(blk, |x, y| *x += c * y);
                } else {
                    view.zip_mut_with(blk, |x, y| *x += y);
                }
            }
        }
        tensors.push(t);
    }
    Mps::from_tensors(first.basis.clone(), tensors)
}

/// Von Neumann entropy across bond `b` (0-based as in [`Mps::schmidt_values`]).
    pub fn entropy(&mut self, b: usize) -> Result<f64> {
        let sv = self.schmidt_values(b)?;
        Ok(entropy_of(&sv))
    }

    /// Applies a single-site operator of definite charge `delta` at 0-based site `j`.
    pub fn apply_local(&mut self, j: usize, op: &Array2<C64>, delta: Charge) -> Result<()> {
        let phys = site_leg(&self.basis);
        let charges = self.basis.charges();
        let old = &self.tensors[j];
        let mut legs = old.legs().to_vec();
        legs[2] = shifted_leg(&legs[2], delta);
        let mut t = BlockTensor::new(legs);
        for (key, blk) in old.blocks() {
            let s_in = (0..self.basis.dim()).find(|&s| phys.find(charges[s]) == Some(key[1])).unwrap();
            for s_out in 0..self.basis.dim() {
                let v = op[[s_out, s_in]];
                if v.norm() == 0.0 {
                    continue;
                }
                if charges[s_out] - charges[s_in] != delta {
                    return Err(Error::Parameter("operator has no definite charge".into()));
                }
                let nk = vec![key[0], phys.find(charges[s_out]).unwrap(), key[2]];
                let dst = t.block_or_zeros(&nk);
                dst.zip_mut_with(blk, |x, y| *x += v * y);
            }
        }
        t.prune();
        self.tensors[j] = t;
        for k in j + 1..self.len() {
            let tk = &self.tensors[k];
            let mut legs = tk.legs().to_vec();
            legs[0] = shifted_leg(&legs[0], delta);
            legs[2] = shifted_leg(&legs[2], delta);
            let mut nt = BlockTensor::new(legs);
            for (key, blk) in tk.blocks() {
                nt.insert(key.clone(), blk.clone());
            }
            self.tensors[k] = nt;
        }
        self.total += delta;
        // the center tensor changed; gauge elsewhere is intact
        if self.center != Some(j) {
            self.center = None;
        }
        Ok(())
    }

    /// Exact amplitudes in a sector basis.
    pub fn to_dense(&self, sb: &SectorBasis) -> Result<Array1<C64>> {
        if sb.length() != self.len() || sb.basis() != &self.basis {
            return Err(Error::Shape("sector basis does not match the MPS".into()));
        }
        let mut out = Array1::zeros(sb.dim());
        if sb.sector().charge() != self.total {
            return Ok(out);
        }
        let phys = site_leg(&self.basis);
        let mut env: BTreeMap<Charge, Array1<C64>> = BTreeMap::new();
        env.insert(Charge::ZERO, Array1::from_elem(1, C64::new(1.0, 0.0)));
        let mut states = Vec::with_capacity(self.len());
        self.dense_dfs(0, &env, &phys, &mut states, sb, &mut out);
        Ok(out)
    }

    fn dense_dfs(
        &self,
        j: usize,
        env: &BTreeMap<Charge, Array1<C64>>,
        phys: &Leg,
        states: &mut Vec<usize>,
        sb: &SectorBasis,
        out: &mut Array1<C64>,
    ) {
        if j == self.len() {
            let v = env.get(&self.total).map(|v| v[0]).unwrap_or_default();
            if let Some(i) = sb.index_of(sb.encode(states)) {
                out[i] = v;
            }
            return;
        }
        let t = &self.tensors[j];
        for s in 0..self.basis.dim() {
            let ps = phys.find(self.basis.charge(s)).unwrap();
            let mut next: BTreeMap<Charge, Array1<C64>> = BTreeMap::new();
            for (key, blk) in t.blocks() {
                if key[1] != ps {
                    continue;
                }
                let ql = t.leg(0).charge(key[0]);
                let Some(v) = env.get(&ql) else { continue };
                let m = blk.index_axis(ndarray::Axis(1), 0);
                let m = m.into_dimensionality::<ndarray::Ix2>().unwrap();
                let r = v.dot(&m);
                let qr = t.leg(2).charge(key[2]);
                match next.get_mut(&qr) {
                    Some(acc) => *acc += &r,
                    None => {
                        next.insert(qr, r);
                    }
                }
            }
            if next.is_empty() {
                continue;
            }
            states.push(s);
            self.dense_dfs(j + 1, &next, phys, states, sb, out);
            states.pop();
        }
    }

    /// Exact MPS of a sector vector by sequential SVDs; left-canonical.
    pub fn from_dense(sb: &SectorBasis, psi: &Array1<C64>) -> Result<Mps> {
        if psi.len() != sb.dim() {
            return Err(Error::Shape("vector length does not match the sector".into()));
        }
        let basis = sb.basis().clone();
        let l = sb.length();
        let phys = site_leg(&basis);
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let floor = SV_FLOOR * norm.max(f64::MIN_POSITIVE);
        let d = basis.dim();

        // Remaining amplitudes per left charge: matrix (bond, suffix) plus suffix keys.
        struct Part {
            mat: Array2<C64>,
            suffixes: Vec<u128>,
        }
        let mut parts: BTreeMap<Charge, Part> = BTreeMap::new();
        parts.insert(
            Charge::ZERO,
            Part { mat: psi.clone().into_shape_with_order((1, sb.dim())).unwrap(), suffixes: sb.configs().to_vec() },
        );
        let mut left = Leg::trivial(Dir::In, Charge::ZERO);
        let mut tensors = Vec::with_capacity(l);
        for j in 0..l {
            let bits_after = if j + 1 < l { sb.site_shift(j) } else { 0 };
            // rows (q_l, alpha, s) and columns (suffix after site j) grouped by q_r
            let mut rows_by: BTreeMap<Charge, Vec<(usize, usize, usize)>> = BTreeMap::new();
            let mut cols_by: BTreeMap<Charge, BTreeMap<u128, usize>> = BTreeMap::new();
            for (ql, part) in &parts {
                for &suf in &part.suffixes {
                    let s = sb.site_state(suf, j);
                    let rest = if bits_after == 0 { 0 } else { suf & ((1u128 << bits_after) - 1) };
                    let qr = *ql + basis.charge(s);
                    let cols = cols_by.entry(qr).or_default();
                    let n = cols.len();
                    cols.entry(rest).or_insert(n);
                }
                let ls = left.find(*ql).unwrap();
                for s in 0..d {
                    let qr = *ql + basis.charge(s);
                    if cols_by.contains_key(&qr) {
                        let rows = rows_by.entry(qr).or_default();
                        for a in 0..part.mat.nrows() {
                            rows.push((ls, a, s));
                        }
                    }
                }
            }
            let mut mats: BTreeMap<Charge, Array2<C64>> = BTreeMap::new();
            for (qr, rows) in &rows_by {
                let cols = &cols_by[qr];
                let mut m = Array2::zeros((rows.len(), cols.len()));
                let row_index: BTreeMap<(usize, usize, usize), usize> =
                    rows.iter().enumerate().map(|(i, r)| (*r, i)).collect();
                for (ql, part) in &parts {
                    let ls = left.find(*ql).unwrap();
                    for (ci, &suf) in part.suffixes.iter().enumerate() {
                        let s = sb.site_state(suf, j);
                        if *ql + basis.charge(s) != *qr {
                            continue;
                        }
                        let rest = if bits_after == 0 { 0 } else { suf & ((1u128 << bits_after) - 1) };
                        let c = cols[&rest];
                        for a in 0..part.mat.nrows() {
                            m[[row_index[&(ls, a, s)], c]] += part.mat[[a, ci]];
                        }
                    }
                }
                mats.insert(*qr, m);
            }

            let mut new_parts = BTreeMap::new();
            let mut sectors = Vec::new();
            let mut us: BTreeMap<Charge, Array2<C64>> = BTreeMap::new();
            for (qr, m) in &mats {
                if j + 1 == l {
                    sectors.push((*qr, 1));
                    us.insert(*qr, m.clone());
                    continue;
                }
                let (u, sv, vt) = svd(m)?;
                let k = sv.iter().filter(|&&x| x > floor).count();
                if k == 0 {
                    continue;
                }
                let mut svt = vt.slice(s![..k, ..]).to_owned();
                for (i, x) in sv[..k].iter().enumerate() {
                    svt.row_mut(i).mapv_inplace(|v| v * *x);
                }
                let cols = &cols_by[qr];
                let mut suffixes = vec![0u128; cols.len()];
                for (&rest, &c) in cols {
                    suffixes[c] = rest;
                }
                // suffix keys keep the full-width layout so site_state indexing still works
                sectors.push((*qr, k));
                us.insert(*qr, u.slice(s![.., ..k]).to_owned());
                new_parts.insert(*qr, Part { mat: svt, suffixes });
            }
            let right = Leg::new(Dir::Out, sectors);
            let mut t = BlockTensor::new(vec![left.clone(), phys.clone(), right.clone()]);
            for (qr, u) in &us {
                let Some(rs) = right.find(*qr) else { continue };
                let k = right.size(rs);
                for (ri, &(ls, a, s)) in rows_by[qr].iter().enumerate() {
                    let ps = phys.find(basis.charge(s)).unwrap();
                    let key = vec![ls, ps, rs];
                    let blk = t.block_or_zeros(&key);
                    for b in 0..k {
                        blk[[a, 0, b]] = u[[ri, b]];
                    }
                }
            }
            t.prune();
            tensors.push(t);
            left = right.flipped();
            parts = new_parts;
        }
        if tensors.last().map(|t| t.leg(2).num_sectors()) != Some(1) {
            return Err(Error::Shape("vector does not lie in a single charge sector".into()));
        }
        let mut m = Mps::from_tensors(basis, tensors)?;
        m.center = Some(l - 1);
        Ok(m)
    }
}

pub fn entropy_of(sv: &[f64]) -> f64 {
    let n: f64 = sv.iter().map(|x| x * x).sum();
    if n == 0.0 {
        return 0.0;
    }
    sv.iter()
        .map(|x| x * x / n)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

pub(crate) fn shifted_leg(leg: &Leg, delta: Charge) -> Leg {
    Leg { dir: leg.dir, sectors: leg.sectors.iter().map(|&(q, d)| (q + delta, d)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::SymmetrySector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Array1<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Array1::from_shape_fn(n, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.mapv(|x| x / n)
    }

    fn tj_sector(l: usize, u: usize, d: usize) -> SectorBasis {
        let b = SiteBasis::t_j();
        SectorBasis::new(&b, l, SymmetrySector::new(&b, l, u, d).unwrap()).unwrap()
    }

    fn max_diff(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn dense_roundtrip() {
        let sb = tj_sector(7, 3, 2);
        let v = random_vec(sb.dim(), 1);
        let m = Mps::from_dense(&sb, &v).unwrap();
        assert!(max_diff(&m.to_dense(&sb).unwrap(), &v) < 1e-12);
        assert!((m.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_forms_preserve_state() {
        let sb = tj_sector(6, 2, 2);
        let v = random_vec(sb.dim(), 2);
        let mut m = Mps::from_dense(&sb, &v).unwrap();
        for c in [0, 3, 5, 2] {
            m.canonicalize(c).unwrap();
            assert!(max_diff(&m.to_dense(&sb).unwrap(), &v) < 1e-12);
        }
        m.recanonicalize(1).unwrap();
        assert!(max_diff(&m.to_dense(&sb).unwrap(), &v) < 1e-12);
    }

    #[test]
    fn schmidt_values_normalized() {
        let sb = tj_sector(6, 2, 2);
        let v = random_vec(sb.dim(), 3);
        let mut m = Mps::from_dense(&sb, &v).unwrap();
        for b in 0..5 {
            let sv = m.schmidt_values(b).unwrap();
            assert!(sv.windows(2).all(|w| w[0] >= w[1]));
            assert!(sv.iter().all(|&x| x >= 0.0));
            let s: f64 = sv.iter().map(|x| x * x).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_state_is_trivial() {
        let b = SiteBasis::t_j();
        let mut m = Mps::product(&b, &[1, 1, 0, 2, 2]).unwrap();
        assert_eq!(m.bond_dims(), vec![1; 4]);
        for bond in 0..4 {
            assert!(m.entropy(bond).unwrap().abs() < 1e-15);
        }
        m.canonicalize(4).unwrap();
        assert_eq!(m.max_bond(), 1);
        assert_eq!(m.total_charge(), Charge::new(2, 2));
    }

    #[test]
    fn overlap_matches_dense() {
        let sb = tj_sector(6, 3, 1);
        let (a, b) = (random_vec(sb.dim(), 4), random_vec(sb.dim(), 5));
        let ma = Mps::from_dense(&sb, &a).unwrap();
        let mb = Mps::from_dense(&sb, &b).unwrap();
        let expect: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((ma.overlap(&mb).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn bell_pair_entropy() {
        let b = SiteBasis::spin_half();
        let sb = SectorBasis::new(&b, 2, SymmetrySector::new(&b, 2, 1, 1).unwrap()).unwrap();
        let v = Array1::from_elem(2, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let mut m = Mps::from_dense(&sb, &v).unwrap();
        assert!((m.entropy(0).unwrap() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn local_operator_moves_sector() {
        let b = SiteBasis::t_j();
        let mut m = Mps::product(&b, &[1, 1, 2, 2]).unwrap();
        let a = b.local_operator(crate::models::LocalOpName::AUp).unwrap();
        m.apply_local(0, &a.matrix, a.charge.unwrap()).unwrap();
        assert_eq!(m.total_charge(), Charge::new(1, 2));
        let sb = tj_sector(4, 1, 2);
        let v = m.to_dense(&sb).unwrap();
        let i = sb.index_of(sb.encode(&[0, 1, 2, 2])).unwrap();
        assert!((v[i] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((m.norm() - 1.0).abs() < 1e-15);
    }
}
