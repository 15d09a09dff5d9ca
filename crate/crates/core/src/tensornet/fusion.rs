//! Grouping several legs into one, and block-diagonal matrix factorizations.

use std::collections::BTreeMap;

use ndarray::{s, Array2, IxDyn};
use ndarray_linalg::{JobSvd, SVDDC, QR, SVD};
use num_complex::Complex64 as C64;

use super::tensor::{signed, to_matrix, BlockTensor, Dir, Leg};
use crate::error::{Error, Result};
use crate::symmetry::Charge;

/// A combination of component sectors and where it sits inside the fused sector.
#[derive(Clone, Debug)]
pub struct Combo {
    pub key: Vec<usize>,
    pub offset: usize,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Fusion {
    pub legs: Vec<Leg>,
    pub fused: Leg,
    combos: Vec<Vec<Combo>>,
    index: BTreeMap<Vec<usize>, (usize, usize)>,
}

impl Fusion {
    /// Fuses `legs` into one leg with direction `dir`.
    pub fn new(legs: Vec<Leg>, dir: Dir) -> Fusion {
        let mut by_charge: BTreeMap<Charge, Vec<(Vec<usize>, Vec<usize>)>> = BTreeMap::new();
        let mut key = vec![0usize; legs.len()];
        loop {
            let mut q = Charge::ZERO;
            let mut shape = Vec::with_capacity(legs.len());
            for (l, &s) in legs.iter().zip(&key) {
                q += signed(l.dir, l.charge(s));
                shape.push(l.size(s));
            }
            by_charge.entry(signed(dir, q)).or_default().push((key.clone(), shape));
            // lexicographic increment
            let mut k = legs.len();
            loop {
                if k == 0 {
                    return Self::assemble(legs, dir, by_charge);
                }
                k -= 1;
                key[k] += 1;
                if key[k] < legs[k].num_sectors() {
                    break;
                }
                key[k] = 0;
            }
        }
    }

    fn assemble(
        legs: Vec<Leg>,
        dir: Dir,
        by_charge: BTreeMap<Charge, Vec<(Vec<usize>, Vec<usize>)>>,
    ) -> Fusion {
        let mut sectors = Vec::new();
        let mut combos = Vec::new();
        let mut index = BTreeMap::new();
        for (si, (q, list)) in by_charge.into_iter().enumerate() {
            let mut off = 0;
            let mut cs = Vec::with_capacity(list.len());
            for (key, shape) in list {
                let size: usize = shape.iter().product();
                index.insert(key.clone(), (si, off));
                cs.push(Combo { key, offset: off, shape });
                off += size;
            }
            sectors.push((q, off));
            combos.push(cs);
        }
        Fusion { legs, fused: Leg { dir, sectors }, combos, index }
    }

    pub fn locate(&self, key: &[usize]) -> (usize, usize) {
        self.index[key]
    }

    pub fn combos(&self, fused_sector: usize) -> &[Combo] {
        &self.combos[fused_sector]
    }
}

/// Block-diagonal matrix keyed by the common row/column charge.
pub type BlockMatrix = BTreeMap<Charge, Array2<C64>>;

/// Reshapes `t` into a block-diagonal matrix. Rows fuse with direction `In`
/// and columns with `Out`, so each block has equal row and column charge.
pub fn to_block_matrix(t: &BlockTensor, row_axes: &[usize], col_axes: &[usize]) -> (Fusion, Fusion, BlockMatrix) {
    let rows = Fusion::new(row_axes.iter().map(|&i| t.leg(i).clone()).collect(), Dir::In);
    let cols = Fusion::new(col_axes.iter().map(|&i| t.leg(i).clone()).collect(), Dir::Out);
    let perm: Vec<usize> = row_axes.iter().chain(col_axes).copied().collect();
    let mut mats = BlockMatrix::new();
    for (k, blk) in t.blocks() {
        let rk: Vec<usize> = row_axes.iter().map(|&i| k[i]).collect();
        let ck: Vec<usize> = col_axes.iter().map(|&i| k[i]).collect();
        let (rs, ro) = rows.locate(&rk);
        let (cs, co) = cols.locate(&ck);
        let q = rows.fused.charge(rs);
        debug_assert_eq!(q, cols.fused.charge(cs));
        let (nr, nc) = (rows.fused.size(rs), cols.fused.size(cs));
        let rsz: usize = rk.iter().zip(&rows.legs).map(|(&s, l)| l.size(s)).product();
        let csz: usize = ck.iter().zip(&cols.legs).map(|(&s, l)| l.size(s)).product();
        let m = to_matrix(blk, &perm, rsz, csz);
        let dst = mats.entry(q).or_insert_with(|| Array2::zeros((nr, nc)));
        dst.slice_mut(s![ro..ro + rsz, co..co + csz]).assign(&m);
    }
    (rows, cols, mats)
}

/// Inverse of [`to_block_matrix`]: legs are `rows.legs` followed by `cols.legs`.
pub fn from_block_matrix(rows: &Fusion, cols: &Fusion, mats: &BlockMatrix) -> BlockTensor {
    let mut legs = rows.legs.clone();
    legs.extend(cols.legs.iter().cloned());
    let mut t = BlockTensor::new(legs);
    for (q, m) in mats {
        let (Some(rs), Some(cs)) = (rows.fused.find(*q), cols.fused.find(*q)) else { continue };
        for rc in rows.combos(rs) {
            let rsz: usize = rc.shape.iter().product();
            for cc in cols.combos(cs) {
                let csz: usize = cc.shape.iter().product();
                let sub = m.slice(s![rc.offset..rc.offset + rsz, cc.offset..cc.offset + csz]);
                if sub.iter().all(|x| x.norm() == 0.0) {
                    continue;
                }
                let mut shape = rc.shape.clone();
                shape.extend_from_slice(&cc.shape);
                let mut key = rc.key.clone();
                key.extend_from_slice(&cc.key);
                let blk = sub.as_standard_layout().into_owned().into_shape_with_order(IxDyn(&shape)).unwrap();
                t.insert(key, blk);
            }
        }
    }
    t
}

/// Tensor with legs `rows.legs ++ [new]` from blocks of shape (fused rows, k).
pub fn unfuse_rows(rows: &Fusion, mats: &BlockMatrix, new: Leg) -> BlockTensor {
    let mut legs = rows.legs.clone();
    legs.push(new.clone());
    let mut t = BlockTensor::new(legs);
    for (q, m) in mats {
        let (Some(rs), Some(ns)) = (rows.fused.find(*q), new.find(*q)) else { continue };
        for rc in rows.combos(rs) {
            let rsz: usize = rc.shape.iter().product();
            let sub = m.slice(s![rc.offset..rc.offset + rsz, ..]);
            if sub.iter().all(|x| x.norm() == 0.0) {
                continue;
            }
            let mut shape = rc.shape.clone();
            shape.push(m.ncols());
            let mut key = rc.key.clone();
            key.push(ns);
            t.insert(key, sub.as_standard_layout().into_owned().into_shape_with_order(IxDyn(&shape)).unwrap());
        }
    }
    t
}

/// Tensor with legs `[new] ++ cols.legs` from blocks of shape (k, fused cols).
pub fn unfuse_cols(new: Leg, cols: &Fusion, mats: &BlockMatrix) -> BlockTensor {
    let mut legs = vec![new.clone()];
    legs.extend(cols.legs.iter().cloned());
    let mut t = BlockTensor::new(legs);
    for (q, m) in mats {
        let (Some(cs), Some(ns)) = (cols.fused.find(*q), new.find(*q)) else { continue };
        for cc in cols.combos(cs) {
            let csz: usize = cc.shape.iter().product();
            let sub = m.slice(s![.., cc.offset..cc.offset + csz]);
            if sub.iter().all(|x| x.norm() == 0.0) {
                continue;
            }
            let mut shape = vec![m.nrows()];
            shape.extend_from_slice(&cc.shape);
            let mut key = vec![ns];
            key.extend_from_slice(&cc.key);
            t.insert(key, sub.as_standard_layout().into_owned().into_shape_with_order(IxDyn(&shape)).unwrap());
        }
    }
    t
}

/// Thin SVD of one block; falls back to the QR-iteration driver if the
/// divide-and-conquer driver fails.
pub fn svd(m: &Array2<C64>) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>)> {
    if m.is_empty() {
        let k = 0;
        return Ok((Array2::zeros((m.nrows(), k)), vec![], Array2::zeros((k, m.ncols()))));
    }
    match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) if s.iter().all(|x| x.is_finite()) => Ok((u, s.to_vec(), vt)),
        _ => {
            let (u, s, vt) = m.svd(true, true)?;
            let (u, vt) = (u.unwrap(), vt.unwrap());
            let k = s.len();
            Ok((
                u.slice(s![.., ..k]).to_owned(),
                s.to_vec(),
                vt.slice(s![..k, ..]).to_owned(),
            ))
        }
    }
}

/// Reduced QR with `R` carrying non-negative diagonal.
pub fn qr(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok((Array2::zeros((m.nrows(), 0)), Array2::zeros((0, m.ncols()))));
    }
    let (mut q, mut r) = m.qr().map_err(Error::from)?;
    let q_cols = q.ncols().min(k);
    let mut q2 = q.slice_mut(s![.., ..q_cols]).to_owned();
    let mut r2 = r.slice_mut(s![..q_cols, ..]).to_owned();
    for i in 0..q_cols {
        let d = r2[[i, i]];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            r2.row_mut(i).mapv_inplace(|x| x * ph.conj());
            q2.column_mut(i).mapv_inplace(|x| x * ph);
        }
    }
    Ok((q2, r2))
}

/// `M = L Q` with orthonormal rows in `Q`.
pub fn lq(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let mh = m.t().mapv(|x| x.conj());
    let (q, r) = qr(&mh)?;
    Ok((r.t().mapv(|x| x.conj()), q.t().mapv(|x| x.conj())))
}

/// Identity-like tensor on a leg pair `[leg.flipped(), leg]`.
pub fn identity(leg: &Leg) -> BlockTensor {
    let mut t = BlockTensor::new(vec![leg.flipped(), leg.clone()]);
    for (i, &(_, d)) in leg.sectors.iter().enumerate() {
        let eye: Array2<C64> = Array2::eye(d);
        t.insert(vec![i, i], eye.into_dyn());
    }
    t
}

/// Fuses each group of axes into one leg with the given direction. Groups
/// are listed in output order and must cover every axis exactly once.
pub fn fuse_groups(t: &BlockTensor, groups: &[Vec<usize>], dirs: &[Dir]) -> (BlockTensor, Vec<Fusion>) {
    let fusions: Vec<Fusion> = groups
        .iter()
        .zip(dirs)
        .map(|(g, &d)| Fusion::new(g.iter().map(|&i| t.leg(i).clone()).collect(), d))
        .collect();
    let perm: Vec<usize> = groups.iter().flatten().copied().collect();
    let mut out = BlockTensor::new(fusions.iter().map(|f| f.fused.clone()).collect());
    for (k, blk) in t.blocks() {
        let mut key = Vec::with_capacity(groups.len());
        let mut offs = Vec::with_capacity(groups.len());
        let mut sizes = Vec::with_capacity(groups.len());
        for (g, f) in groups.iter().zip(&fusions) {
            let sub: Vec<usize> = g.iter().map(|&i| k[i]).collect();
            let (fs, off) = f.locate(&sub);
            key.push(fs);
            offs.push(off);
            sizes.push(g.iter().map(|&i| t.leg(i).size(k[i])).product::<usize>());
        }
        let data = blk
            .view()
            .permuted_axes(IxDyn(&perm))
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(IxDyn(&sizes))
            .unwrap();
        let dst = out.block_or_zeros(&key);
        let mut view = dst.view_mut();
        for (ax, (&o, &n)) in offs.iter().zip(&sizes).enumerate() {
            view.slice_axis_inplace(ndarray::Axis(ax), (o..o + n).into());
        }
        view += &data;
    }
    (out, fusions)
}
