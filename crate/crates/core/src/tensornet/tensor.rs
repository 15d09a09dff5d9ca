//! Block-sparse tensors with U(1)xU(1) charge labels on every leg.

use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayD, Axis, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::symmetry::Charge;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    In,
    Out,
}

impl Dir {
    pub fn sign(self) -> i32 {
        match self {
            Dir::In => 1,
            Dir::Out => -1,
        }
    }

    pub fn flip(self) -> Dir {
        match self {
            Dir::In => Dir::Out,
            Dir::Out => Dir::In,
        }
    }
}

pub(crate) fn signed(dir: Dir, q: Charge) -> Charge {
    match dir {
        Dir::In => q,
        Dir::Out => -q,
    }
}

/// One tensor index: a direction and a sorted list of `(charge, size)` sectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Leg {
    pub dir: Dir,
    pub sectors: Vec<(Charge, usize)>,
}

impl Leg {
    pub fn new(dir: Dir, mut sectors: Vec<(Charge, usize)>) -> Self {
        sectors.retain(|s| s.1 > 0);
        sectors.sort_by_key(|s| s.0);
        debug_assert!(sectors.windows(2).all(|w| w[0].0 != w[1].0), "duplicate leg charge");
        Leg { dir, sectors }
    }

    pub fn trivial(dir: Dir, q: Charge) -> Self {
        Leg { dir, sectors: vec![(q, 1)] }
    }

    pub fn find(&self, q: Charge) -> Option<usize> {
        self.sectors.binary_search_by_key(&q, |s| s.0).ok()
    }

    pub fn charge(&self, i: usize) -> Charge {
        self.sectors[i].0
    }

    pub fn size(&self, i: usize) -> usize {
        self.sectors[i].1
    }

    pub fn dim(&self) -> usize {
        self.sectors.iter().map(|s| s.1).sum()
    }

    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn flipped(&self) -> Leg {
        Leg { dir: self.dir.flip(), sectors: self.sectors.clone() }
    }

    /// Offset of sector `i` in the dense ordering.
    pub fn offset(&self, i: usize) -> usize {
        self.sectors[..i].iter().map(|s| s.1).sum()
    }

    /// Same charges and sizes, ignoring direction.
    pub fn same_space(&self, other: &Leg) -> bool {
        self.sectors == other.sectors
    }
}

/// Tensor stored as dense blocks keyed by one sector index per leg. A block
/// may only exist when the signed charges of its sectors sum to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTensor {
    legs: Vec<Leg>,
    blocks: BTreeMap<Vec<usize>, ArrayD<C64>>,
}

impl BlockTensor {
    pub fn new(legs: Vec<Leg>) -> Self {
        BlockTensor { legs, blocks: BTreeMap::new() }
    }

    /// Every allowed block filled with zeros.
    pub fn zeros(legs: Vec<Leg>) -> Self {
        let mut t = BlockTensor::new(legs);
        for key in t.allowed_keys() {
            let shape = t.block_shape(&key);
            t.blocks.insert(key, ArrayD::zeros(IxDyn(&shape)));
        }
        t
    }

    /// Scalar (rank zero) tensor.
    pub fn scalar(x: C64) -> Self {
        let mut t = BlockTensor::new(vec![]);
        t.blocks.insert(vec![], ArrayD::from_elem(IxDyn(&[]), x));
        t
    }

    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn leg(&self, i: usize) -> &Leg {
        &self.legs[i]
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Vec<usize>, &ArrayD<C64>)> {
        self.blocks.iter()
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = (&Vec<usize>, &mut ArrayD<C64>)> {
        self.blocks.iter_mut()
    }

    /// Stores every block in row-major order, so that results do not depend
    /// on how a tensor was produced.
    pub(crate) fn standardize(&mut self) {
        for b in self.blocks.values_mut() {
            if !b.is_standard_layout() {
                *b = b.as_standard_layout().into_owned();
            }
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, key: &[usize]) -> Option<&ArrayD<C64>> {
        self.blocks.get(key)
    }

    pub fn block_mut(&mut self, key: &[usize]) -> Option<&mut ArrayD<C64>> {
        self.blocks.get_mut(key)
    }

    /// Block for `key`, created as zeros if absent.
    pub fn block_or_zeros(&mut self, key: &[usize]) -> &mut ArrayD<C64> {
        if !self.blocks.contains_key(key) {
            let shape = self.block_shape(key);
            self.blocks.insert(key.to_vec(), ArrayD::zeros(IxDyn(&shape)));
        }
        self.blocks.get_mut(key).unwrap()
    }

    pub fn block_shape(&self, key: &[usize]) -> Vec<usize> {
        key.iter().zip(&self.legs).map(|(&s, l)| l.size(s)).collect()
    }

    pub fn key_charges(&self, key: &[usize]) -> Vec<Charge> {
        key.iter().zip(&self.legs).map(|(&s, l)| l.charge(s)).collect()
    }

    pub fn flux_ok(&self, key: &[usize]) -> bool {
        let mut q = Charge::ZERO;
        for (&s, l) in key.iter().zip(&self.legs) {
            q += signed(l.dir, l.charge(s));
        }
        q == Charge::ZERO
    }

    pub fn insert(&mut self, key: Vec<usize>, block: ArrayD<C64>) {
        assert_eq!(key.len(), self.rank());
        assert!(self.flux_ok(&key), "block violates charge conservation");
        assert_eq!(block.shape(), self.block_shape(&key).as_slice());
        self.blocks.insert(key, block);
    }

    /// All sector-index tuples compatible with the flux rule.
    pub fn allowed_keys(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if self.legs.is_empty() {
            out.push(vec![]);
            return out;
        }
        let mut key = vec![0usize; self.rank()];
        self.enumerate(0, Charge::ZERO, &mut key, &mut out);
        out
    }

    fn enumerate(&self, k: usize, acc: Charge, key: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let leg = &self.legs[k];
        if k + 1 == self.rank() {
            // last leg is fixed by the flux rule
            let need = signed(leg.dir, -acc);
            if let Some(s) = leg.find(need) {
                key[k] = s;
                out.push(key.clone());
            }
            return;
        }
        for s in 0..leg.num_sectors() {
            key[k] = s;
            self.enumerate(k + 1, acc + signed(leg.dir, leg.charge(s)), key, out);
        }
    }

    pub fn permute(&self, perm: &[usize]) -> BlockTensor {
        assert_eq!(perm.len(), self.rank());
        let legs = perm.iter().map(|&p| self.legs[p].clone()).collect();
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let key = perm.iter().map(|&p| k[p]).collect();
                let b = b.view().permuted_axes(IxDyn(perm)).as_standard_layout().into_owned();
                (key, b)
            })
            .collect();
        BlockTensor { legs, blocks }
    }

    /// Complex conjugate with all directions flipped.
    pub fn conj(&self) -> BlockTensor {
        BlockTensor {
            legs: self.legs.iter().map(|l| l.flipped()).collect(),
            blocks: self.blocks.iter().map(|(k, b)| (k.clone(), b.mapv(|x| x.conj()))).collect(),
        }
    }

    /// Flip the direction of leg `i` and negate its charges; data unchanged.
    pub fn reverse_leg(&self, i: usize) -> BlockTensor {
        let old = &self.legs[i];
        let mut sectors: Vec<(Charge, usize)> = old.sectors.iter().map(|&(q, d)| (-q, d)).collect();
        sectors.sort_by_key(|s| s.0);
        let new_leg = Leg { dir: old.dir.flip(), sectors };
        let mut legs = self.legs.clone();
        legs[i] = new_leg.clone();
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let mut key = k.clone();
                key[i] = new_leg.find(-old.charge(k[i])).unwrap();
                (key, b.clone())
            })
            .collect();
        BlockTensor { legs, blocks }
    }

    pub fn scale(&mut self, c: C64) {
        for b in self.blocks.values_mut() {
            b.mapv_inplace(|x| x * c);
        }
    }

    pub fn scaled(&self, c: C64) -> BlockTensor {
        let mut t = self.clone();
        t.scale(c);
        t
    }

    /// `self += c * other`; legs must agree.
    pub fn add_scaled(&mut self, other: &BlockTensor, c: C64) {
        assert_eq!(self.legs, other.legs, "add_scaled on mismatched legs");
        for (k, b) in &other.blocks {
            let dst = self.block_or_zeros(k);
            dst.zip_mut_with(b, |x, y| *x += c * y);
        }
    }

    /// `<self|other>` with `self` conjugated; legs must agree.
    pub fn inner(&self, other: &BlockTensor) -> C64 {
        let mut s = ZERO;
        for (k, a) in &self.blocks {
            if let Some(b) = other.blocks.get(k) {
                s += a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>();
            }
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().map(|b| b.iter().map(|x| x.norm_sqr()).sum::<f64>()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Drops blocks whose entries are all exactly zero.
    pub fn prune(&mut self) {
        self.blocks.retain(|_, b| b.iter().any(|x| *x != ZERO));
    }

    /// Value of a rank-zero tensor.
    pub fn scalar_value(&self) -> C64 {
        assert_eq!(self.rank(), 0);
        self.blocks.get(&vec![]).map(|b| b[IxDyn(&[])]).unwrap_or(ZERO)
    }

    /// Dense array with sectors laid out in sorted charge order.
    pub fn to_dense(&self) -> ArrayD<C64> {
        let shape: Vec<usize> = self.legs.iter().map(|l| l.dim()).collect();
        let mut out = ArrayD::zeros(IxDyn(&shape));
        for (k, b) in &self.blocks {
            let mut view = out.view_mut();
            for (ax, (&s, l)) in k.iter().zip(&self.legs).enumerate() {
                let off = l.offset(s);
                view.slice_axis_inplace(Axis(ax), (off..off + l.size(s)).into());
            }
            view.assign(b);
        }
        out
    }

    /// Contracts legs `ax_a` of `self` with legs `ax_b` of `other`. The
    /// result carries the free legs of `self` followed by those of `other`.
    pub fn contract(&self, ax_a: &[usize], other: &BlockTensor, ax_b: &[usize]) -> Result<BlockTensor> {
        if ax_a.len() != ax_b.len() {
            return Err(Error::Shape("contraction axis lists differ in length".into()));
        }
        for (&i, &j) in ax_a.iter().zip(ax_b) {
            let (la, lb) = (&self.legs[i], &other.legs[j]);
            if la.dir == lb.dir {
                return Err(Error::Shape(format!("contracting legs {i}/{j} with equal directions")));
            }
            for &(q, d) in &la.sectors {
                if let Some(s) = lb.find(q) {
                    if lb.size(s) != d {
                        return Err(Error::Shape(format!("sector {q} has sizes {d} and {}", lb.size(s))));
                    }
                }
            }
        }
        let free_a: Vec<usize> = (0..self.rank()).filter(|i| !ax_a.contains(i)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|i| !ax_b.contains(i)).collect();
        let mut legs: Vec<Leg> = free_a.iter().map(|&i| self.legs[i].clone()).collect();
        legs.extend(free_b.iter().map(|&i| other.legs[i].clone()));

        // b blocks grouped by contracted charges, as (contracted x free) matrices
        let perm_b: Vec<usize> = ax_b.iter().chain(&free_b).copied().collect();
        let mut groups: BTreeMap<Vec<Charge>, Vec<(Vec<usize>, Array2<C64>)>> = BTreeMap::new();
        for (k, blk) in &other.blocks {
            let cq: Vec<Charge> = ax_b.iter().map(|&j| other.legs[j].charge(k[j])).collect();
            let fkey: Vec<usize> = free_b.iter().map(|&j| k[j]).collect();
            let rows: usize = ax_b.iter().map(|&j| other.legs[j].size(k[j])).product();
            let cols: usize = free_b.iter().map(|&j| other.legs[j].size(k[j])).product();
            let m = to_matrix(blk, &perm_b, rows, cols);
            groups.entry(cq).or_default().push((fkey, m));
        }

        let perm_a: Vec<usize> = free_a.iter().chain(ax_a).copied().collect();
        let mut acc: BTreeMap<Vec<usize>, Array2<C64>> = BTreeMap::new();
        for (k, blk) in &self.blocks {
            let cq: Vec<Charge> = ax_a.iter().map(|&i| self.legs[i].charge(k[i])).collect();
            let Some(group) = groups.get(&cq) else { continue };
            let rows: usize = free_a.iter().map(|&i| self.legs[i].size(k[i])).product();
            let inner: usize = ax_a.iter().map(|&i| self.legs[i].size(k[i])).product();
            let am = to_matrix(blk, &perm_a, rows, inner);
            let fkey_a: Vec<usize> = free_a.iter().map(|&i| k[i]).collect();
            for (fkey_b, bm) in group {
                let mut key = fkey_a.clone();
                key.extend_from_slice(fkey_b);
                let c = acc.entry(key).or_insert_with(|| Array2::zeros((rows, bm.ncols())));
                general_mat_mul(ONE, &am, bm, ONE, c);
            }
        }

        let mut out = BlockTensor::new(legs);
        for (key, m) in acc {
            let shape = out.block_shape(&key);
            let b = m.into_shape_with_order(IxDyn(&shape)).expect("contiguous product");
            out.blocks.insert(key, b);
        }
        Ok(out)
    }

    /// Dense tensor to block form; entries outside allowed blocks must vanish.
    pub fn from_dense(legs: Vec<Leg>, dense: &ArrayD<C64>, tol: f64) -> Result<BlockTensor> {
        let mut t = BlockTensor::new(legs);
        let expect: Vec<usize> = t.legs.iter().map(|l| l.dim()).collect();
        if dense.shape() != expect.as_slice() {
            return Err(Error::Shape("dense array does not match leg dimensions".into()));
        }
        let mut covered = 0.0;
        for key in t.allowed_keys() {
            let mut view = dense.view();
            for (ax, (&s, l)) in key.iter().zip(&t.legs).enumerate() {
                let off = l.offset(s);
                view.slice_axis_inplace(Axis(ax), (off..off + l.size(s)).into());
            }
            let b = view.to_owned();
            let n: f64 = b.iter().map(|x| x.norm_sqr()).sum();
            covered += n;
            if n > 0.0 {
                t.blocks.insert(key, b);
            }
        }
        let total: f64 = dense.iter().map(|x| x.norm_sqr()).sum();
        if total - covered > tol * tol * total.max(1.0) + 1e-12 * total {
            return Err(Error::Shape("dense array has charge-violating entries".into()));
        }
        Ok(t)
    }
}

pub(crate) fn to_matrix(blk: &ArrayD<C64>, perm: &[usize], rows: usize, cols: usize) -> Array2<C64> {
    let is_identity = perm.iter().enumerate().all(|(i, &p)| i == p);
    if is_identity && blk.is_standard_layout() {
        return blk.to_shape((rows, cols)).expect("standard layout").into_owned();
    }
    blk.view()
        .permuted_axes(IxDyn(perm))
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, cols))
        .expect("standard layout")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(u: i32, d: i32) -> Charge {
        Charge::new(u, d)
    }

    pub(crate) fn random_tensor(legs: Vec<Leg>, seed: u64) -> BlockTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = BlockTensor::zeros(legs);
        for (_, b) in t.blocks_mut() {
            b.mapv_inplace(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        }
        t
    }

    fn legs3() -> Vec<Leg> {
        vec![
            Leg::new(Dir::In, vec![(q(0, 0), 2), (q(1, 0), 3)]),
            Leg::new(Dir::In, vec![(q(0, 0), 1), (q(1, 0), 1), (q(0, 1), 1)]),
            Leg::new(Dir::Out, vec![(q(0, 0), 2), (q(1, 0), 2), (q(0, 1), 1), (q(1, 1), 2), (q(2, 0), 1)]),
        ]
    }

    #[test]
    fn contraction_matches_dense_einsum() {
        let a = random_tensor(legs3(), 1);
        let mut bl = legs3();
        bl[0] = bl[2].flipped();
        bl[2] = Leg::new(Dir::Out, vec![(q(1, 0), 2), (q(0, 1), 1), (q(1, 1), 2), (q(2, 0), 1), (q(2, 1), 3), (q(1, 2), 1), (q(3, 0), 1)]);
        let b = random_tensor(bl, 2);
        let c = a.contract(&[2], &b, &[0]).unwrap();
        let (ad, bd, cd) = (a.to_dense(), b.to_dense(), c.to_dense());
        let sa = ad.shape().to_vec();
        let sb = bd.shape().to_vec();
        for i in 0..sa[0] {
            for j in 0..sa[1] {
                for k in 0..sb[1] {
                    for l in 0..sb[2] {
                        let mut s = ZERO;
                        for m in 0..sa[2] {
                            s += ad[[i, j, m]] * bd[[m, k, l]];
                        }
                        assert!((s - cd[[i, j, k, l]]).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn full_contraction_is_inner_product() {
        let a = random_tensor(legs3(), 3);
        let b = random_tensor(legs3(), 4);
        let s = a.conj().contract(&[0, 1, 2], &b, &[0, 1, 2]).unwrap().scalar_value();
        assert!((s - a.inner(&b)).norm() < 1e-13);
    }

    #[test]
    fn permute_roundtrip() {
        let a = random_tensor(legs3(), 5);
        let p = a.permute(&[2, 0, 1]).permute(&[1, 2, 0]);
        assert_eq!(p, a);
        let d = a.to_dense();
        let pd = a.permute(&[2, 0, 1]).to_dense();
        assert_eq!(pd[[1, 0, 2]], d[[0, 2, 1]]);
    }

    #[test]
    fn dense_roundtrip() {
        let a = random_tensor(legs3(), 6);
        let b = BlockTensor::from_dense(legs3(), &a.to_dense(), 1e-14).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_block_conserves_charge() {
        let a = random_tensor(legs3(), 7);
        assert!(a.num_blocks() > 0);
        for (k, _) in a.blocks() {
            assert!(a.flux_ok(k));
        }
    }

    #[test]
    fn reverse_leg_preserves_contractions() {
        let a = random_tensor(legs3(), 8);
        let r = a.reverse_leg(2);
        assert!(r.blocks().all(|(k, _)| r.flux_ok(k)));
        assert!((r.norm() - a.norm()).abs() < 1e-14);
    }

    #[test]
    fn mismatched_directions_rejected() {
        let a = random_tensor(legs3(), 9);
        assert!(a.contract(&[0], &a, &[0]).is_err());
    }
}
