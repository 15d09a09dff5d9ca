//! Two-site variational ground-state search.

use ndarray::s;
use serde::{Deserialize, Serialize};

use super::env::{extend_left, extend_right, left_boundary, right_boundary};
use super::fusion::{svd, to_block_matrix, unfuse_cols, unfuse_rows, BlockMatrix};
use super::mpo::Mpo;
use super::mps::{Mps, SV_FLOOR};
use super::tensor::{BlockTensor, Dir, Leg};
use crate::error::{Error, Result};
use crate::krylov::lanczos_ground;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    pub max_bond: usize,
    /// Discarded weight allowed per bond update.
    pub truncation: f64,
    pub max_sweeps: usize,
    /// Stop once consecutive sweep energies differ by less than this.
    pub energy_tol: f64,
    pub lanczos_dim: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        DmrgConfig { max_bond: 256, truncation: 1e-12, max_sweeps: 30, energy_tol: 1e-10, lanczos_dim: 24 }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub state: Mps,
    pub energy: f64,
    /// Energy after each sweep.
    pub sweep_energies: Vec<f64>,
}

/// Local effective Hamiltonian applied to a two-site tensor `[l, s1, s2, r]`.
fn apply_two_site(
    le: &BlockTensor,
    w1: &BlockTensor,
    w2: &BlockTensor,
    re: &BlockTensor,
    theta: &BlockTensor,
) -> Result<BlockTensor> {
    let t = le.contract(&[2], theta, &[0])?; // [bra, m, s1, s2, r]
    let t = t.contract(&[1, 2], w1, &[0, 2])?; // [bra, s2, r, so1, m]
    let t = t.contract(&[4, 1], w2, &[0, 2])?; // [bra, r, so1, so2, m]
    let t = t.contract(&[1, 4], re, &[2, 1])?; // [bra, so1, so2, rb]
    Ok(t)
}

/// Splits `theta` by SVD; `left_canonical` decides which side absorbs the
/// singular values.
fn split(theta: &BlockTensor, cfg: &DmrgConfig, left_canonical: bool) -> Result<(BlockTensor, BlockTensor)> {
    let (rows, cols, mats) = to_block_matrix(theta, &[0, 1], &[2, 3]);
    let mut parts = Vec::new();
    let mut all = Vec::new();
    for (q, a) in &mats {
        let (u, sv, vt) = svd(a)?;
        all.extend(sv.iter().copied());
        parts.push((*q, u, sv, vt));
    }
    all.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let norm2: f64 = all.iter().map(|x| x * x).sum();
    let mut keep = 0;
    let mut tail: f64 = norm2;
    for &x in &all {
        if keep >= cfg.max_bond || x <= SV_FLOOR || (keep > 0 && tail / norm2 <= cfg.truncation) {
            break;
        }
        tail -= x * x;
        keep += 1;
    }
    let threshold = all[keep.max(1) - 1];
    let mut left = BlockMatrix::new();
    let mut right = BlockMatrix::new();
    let mut sectors = Vec::new();
    let mut budget = keep.max(1);
    let kept_norm = tail_kept(norm2, tail);
    for (q, u, sv, vt) in parts {
        let k = sv.iter().filter(|&&x| x >= threshold).count().min(budget);
        if k == 0 {
            continue;
        }
        budget -= k;
        let mut uk = u.slice(s![.., ..k]).to_owned();
        let mut vk = vt.slice(s![..k, ..]).to_owned();
        if left_canonical {
            for (r, x) in sv[..k].iter().enumerate() {
                vk.row_mut(r).mapv_inplace(|v| v * (*x / kept_norm));
            }
        } else {
            for (c, x) in sv[..k].iter().enumerate() {
                uk.column_mut(c).mapv_inplace(|v| v * (*x / kept_norm));
            }
        }
        sectors.push((q, k));
        left.insert(q, uk);
        right.insert(q, vk);
    }
    let bond = Leg::new(Dir::Out, sectors);
    let a = unfuse_rows(&rows, &left, bond.clone());
    let b = unfuse_cols(bond.flipped(), &cols, &right);
    Ok((a, b))
}

fn tail_kept(norm2: f64, tail: f64) -> f64 {
    (norm2 - tail.max(0.0)).sqrt().max(f64::MIN_POSITIVE)
}

/// Two-site DMRG starting from `init`, which fixes the symmetry sector.
pub fn dmrg_ground_state(h: &Mpo, init: &Mps, cfg: &DmrgConfig) -> Result<DmrgResult> {
    let l = init.len();
    if h.len() != l {
        return Err(Error::Shape("MPO and MPS lengths differ".into()));
    }
    if l < 2 {
        return Err(Error::Parameter("variational search needs at least two sites".into()));
    }
    let mut psi = init.clone();
    psi.recanonicalize(0)?;
    psi.normalize()?;

    let mut lenv: Vec<Option<BlockTensor>> = vec![None; l + 1];
    let mut renv: Vec<Option<BlockTensor>> = vec![None; l + 1];
    lenv[0] = Some(left_boundary());
    renv[l] = Some(right_boundary(psi.total_charge()));
    for j in (2..l).rev() {
        let r = extend_right(renv[j + 1].as_ref().unwrap(), psi.tensor(j), h.tensor(j))?;
        renv[j] = Some(r);
    }

    let mut energies = Vec::new();
    let mut energy = f64::NAN;
    for sweep in 0..cfg.max_sweeps {
        for j in 0..l - 1 {
            energy = optimize_pair(&mut psi, h, &lenv, &renv, j, cfg, true)?;
            let le = extend_left(lenv[j].as_ref().unwrap(), psi.tensor(j), h.tensor(j))?;
            lenv[j + 1] = Some(le);
        }
        for j in (0..l - 1).rev() {
            energy = optimize_pair(&mut psi, h, &lenv, &renv, j, cfg, false)?;
            let re = extend_right(renv[j + 2].as_ref().unwrap(), psi.tensor(j + 1), h.tensor(j + 1))?;
            renv[j + 1] = Some(re);
        }
        psi.set_center(Some(0));
        log::debug!("dmrg sweep {sweep}: E = {energy:.14}, max bond {}", psi.max_bond());
        let done = energies.last().is_some_and(|&e: &f64| (e - energy).abs() < cfg.energy_tol);
        energies.push(energy);
        if done {
            return Ok(DmrgResult { state: psi, energy, sweep_energies: energies });
        }
    }
    Err(Error::Convergence { energies })
}

fn optimize_pair(
    psi: &mut Mps,
    h: &Mpo,
    lenv: &[Option<BlockTensor>],
    renv: &[Option<BlockTensor>],
    j: usize,
    cfg: &DmrgConfig,
    to_right: bool,
) -> Result<f64> {
    let le = lenv[j].as_ref().unwrap();
    let re = renv[j + 2].as_ref().unwrap();
    let theta = psi.tensor(j).contract(&[2], psi.tensor(j + 1), &[0])?;
    let (w1, w2) = (h.tensor(j), h.tensor(j + 1));
    let gp = lanczos_ground(|x: &BlockTensor| apply_two_site(le, w1, w2, re, x), &theta, cfg.lanczos_dim, 4, 1e-10)?;
    let (e, theta) = (gp.energy, gp.vector);
    let (a, b) = split(&theta, cfg, to_right)?;
    *psi.tensor_mut(j) = a;
    *psi.tensor_mut(j + 1) = b;
    psi.set_center(Some(if to_right { j + 1 } else { j }));
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bh, build_xxz, CouplingSet, SectorBasis};
    use crate::symmetry::SymmetrySector;
    use ndarray_linalg::EigValsh;

    fn dense_ground(h: &crate::models::HamiltonianRep, nu: usize, nd: usize) -> f64 {
        let sec = SymmetrySector::new(&h.basis, h.length, nu, nd).unwrap();
        let sb = SectorBasis::new(&h.basis, h.length, sec).unwrap();
        let op = crate::models::SparseOperator::from_terms(&sb, h.terms()).unwrap();
        op.to_dense().eigvalsh(ndarray_linalg::UPLO::Lower).unwrap()[0]
    }

    #[test]
    fn heisenberg_chain_ground_energy() {
        let h = build_xxz(10, 1.0, 1.0).unwrap();
        let b = h.basis.clone();
        let states: Vec<usize> = (0..10).map(|j| if j % 2 == 0 { b.up() } else { b.down() }).collect();
        let init = Mps::product(&b, &states).unwrap();
        let res = dmrg_ground_state(h.mpo(), &init, &DmrgConfig::default()).unwrap();
        let exact = dense_ground(&h, 5, 5);
        assert!((res.energy - exact).abs() < 1e-9, "{} vs {}", res.energy, exact);
        assert!((res.state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bose_hubbard_ground_energy() {
        let c = CouplingSet::isotropic(1.0, 8.0).unwrap();
        let h = build_bh(6, &c, 2, None).unwrap();
        let b = h.basis.clone();
        let one_up = b.state_index(1, 0).unwrap();
        let one_dn = b.state_index(0, 1).unwrap();
        let states: Vec<usize> = (0..6).map(|j| if j < 3 { one_up } else { one_dn }).collect();
        let init = Mps::product(&b, &states).unwrap();
        let res = dmrg_ground_state(h.mpo(), &init, &DmrgConfig::default()).unwrap();
        let exact = dense_ground(&h, 3, 3);
        assert!((res.energy - exact).abs() < 1e-9, "{} vs {}", res.energy, exact);
    }
}
