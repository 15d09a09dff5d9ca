use std::collections::BTreeMap;

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::fusion::{svd, to_block_matrix, unfuse_cols, unfuse_rows, BlockMatrix};
use super::mps::{Mps, SV_FLOOR};
use super::tensor::{Dir, Leg};
use crate::error::{Error, Result};
use crate::symmetry::Charge;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    /// Discarded squared Schmidt weight per bond.
    pub discarded_weight: Vec<f64>,
    pub max_bond: usize,
    pub fidelity_lower_bound: f64,
}

impl CompressionReport {
    pub fn total_discarded(&self) -> f64 {
        self.discarded_weight.iter().sum()
    }
}

/// Truncates `state` so that the summed discarded weight stays within
/// `budget`; the result is normalized and left-canonical.
pub fn compress(state: &Mps, budget: f64) -> Result<(Mps, CompressionReport)> {
    let (m, rep, _) = compress_raw(state.clone(), budget)?;
    Ok((m, rep))
}

/// As [`compress`], also returning the norm of the input.
pub(crate) fn compress_raw(m: Mps, budget: f64) -> Result<(Mps, CompressionReport, f64)> {
    compress_raw_with(m, |_| budget)
}

/// As [`compress_raw`] with the budget chosen from the input norm.
pub(crate) fn compress_raw_with(mut m: Mps, budget: impl FnOnce(f64) -> f64) -> Result<(Mps, CompressionReport, f64)> {
    let l = m.len();
    m.canonicalize(l - 1)?;
    let norm = m.norm();
    let budget = budget(norm);
    if !(budget >= 0.0) {
        return Err(Error::Parameter(format!("weight budget must be non-negative, got {budget}")));
    }
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::LinAlg(format!("cannot compress a state of norm {norm}")));
    }
    m.scale(C64::new(1.0 / norm, 0.0));
    if l == 1 {
        let rep = CompressionReport { discarded_weight: vec![], max_bond: 1, fidelity_lower_bound: 1.0 };
        return Ok((m, rep, norm));
    }

    // right-to-left sweep: exact spectra, noise floor removed
    let mut floor_loss = vec![0.0; l - 1];
    let mut spectra: Vec<Vec<f64>> = vec![Vec::new(); l - 1];
    for j in (1..l).rev() {
        let (rows, cols, mats) = to_block_matrix(m.tensor(j), &[0], &[1, 2]);
        let mut us = BlockMatrix::new();
        let mut vs = BlockMatrix::new();
        let mut sectors = Vec::new();
        for (q, a) in &mats {
            let (u, sv, vt) = svd(a)?;
            let k = sv.iter().filter(|&&x| x > SV_FLOOR).count();
            floor_loss[j - 1] += sv[k..].iter().map(|x| x * x).sum::<f64>();
            spectra[j - 1].extend_from_slice(&sv[..k]);
            if k == 0 {
                continue;
            }
            let mut us_q = u.slice(s![.., ..k]).to_owned();
            for (c, x) in sv[..k].iter().enumerate() {
                us_q.column_mut(c).mapv_inplace(|v| v * *x);
            }
            sectors.push((*q, k));
            us.insert(*q, us_q);
            vs.insert(*q, vt.slice(s![..k, ..]).to_owned());
        }
        let bond = Leg::new(Dir::Out, sectors);
        *m.tensor_mut(j) = unfuse_cols(bond.flipped(), &cols, &vs);
        let left = unfuse_rows(&rows, &us, bond);
        let prev = m.tensor(j - 1).contract(&[2], &left, &[0])?;
        *m.tensor_mut(j - 1) = prev;
    }
    m.set_center(Some(0));

    // budget split proportional to the weight each bond could give up
    let discardable: Vec<f64> = spectra.iter().map(|sp| tail_within(sp, budget)).collect();
    let total: f64 = discardable.iter().sum();
    let alloc: Vec<f64> = discardable
        .iter()
        .map(|&t| if total > 0.0 { budget * t / total } else { 0.0 })
        .collect();

    // left-to-right truncating sweep with carry-over
    let mut carry = 0.0;
    let mut discarded = floor_loss;
    for j in 0..l - 1 {
        let allowed = alloc[j] + carry;
        let (rows, cols, mats) = to_block_matrix(m.tensor(j), &[0, 1], &[2]);
        let mut parts: BTreeMap<Charge, (Array2<C64>, Vec<f64>, Array2<C64>)> = BTreeMap::new();
        for (q, a) in &mats {
            parts.insert(*q, svd(a)?);
        }
        let mut all: Vec<(f64, Charge, usize)> = parts
            .iter()
            .flat_map(|(q, (_, sv, _))| sv.iter().enumerate().map(move |(i, &x)| (x, *q, i)))
            .collect();
        let norm2: f64 = all.iter().map(|e| e.0 * e.0).sum();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut cut = 0.0;
        let mut ndrop = 0;
        for e in &all[..all.len().saturating_sub(1)] {
            let w = e.0 * e.0 / norm2;
            if e.0 > SV_FLOOR && cut + w > allowed {
                break;
            }
            cut += w;
            ndrop += 1;
        }
        let mut keep: BTreeMap<Charge, usize> = BTreeMap::new();
        for (q, (_, sv, _)) in &parts {
            keep.insert(*q, sv.len());
        }
        // values are dropped smallest first, so each sector keeps a prefix
        for e in &all[..ndrop] {
            *keep.get_mut(&e.1).unwrap() -= 1;
        }
        let kept_norm = (norm2 * (1.0 - cut)).sqrt().max(f64::MIN_POSITIVE);
        let mut us = BlockMatrix::new();
        let mut rs = BlockMatrix::new();
        let mut sectors = Vec::new();
        for (q, (u, sv, vt)) in &parts {
            let k = keep[q];
            if k == 0 {
                continue;
            }
            let mut svt = vt.slice(s![..k, ..]).to_owned();
            for (r, x) in sv[..k].iter().enumerate() {
                svt.row_mut(r).mapv_inplace(|v| v * (*x / kept_norm));
            }
            sectors.push((*q, k));
            us.insert(*q, u.slice(s![.., ..k]).to_owned());
            rs.insert(*q, svt);
        }
        let bond = Leg::new(Dir::Out, sectors);
        *m.tensor_mut(j) = unfuse_rows(&rows, &us, bond.clone());
        let r = unfuse_cols(bond.flipped(), &cols, &rs);
        let next = r.contract(&[1], m.tensor(j + 1), &[0])?;
        *m.tensor_mut(j + 1) = next;
        discarded[j] += cut;
        carry = (allowed - cut).max(0.0);
    }
    m.set_center(Some(l - 1));
    let total_disc: f64 = discarded.iter().sum();
    let rep = CompressionReport {
        max_bond: m.max_bond(),
        discarded_weight: discarded,
        fidelity_lower_bound: 1.0 - total_disc,
    };
    Ok((m, rep, norm))
}

/// Largest sum of smallest squared values not exceeding `budget`, with at
/// least one value always kept.
fn tail_within(sv: &[f64], budget: f64) -> f64 {
    let mut w: Vec<f64> = sv.iter().map(|x| x * x).collect();
    let n: f64 = w.iter().sum();
    if n == 0.0 {
        return 0.0;
    }
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut acc = 0.0;
    for x in &w[..w.len().saturating_sub(1)] {
        if acc + x / n > budget {
            break;
        }
        acc += x / n;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SectorBasis, SiteBasis};
    use crate::symmetry::SymmetrySector;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_overlap2(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
        let ov: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
        ov.norm_sqr() / (na * nb)
    }

    #[test]
    fn product_state_unchanged() {
        let b = SiteBasis::t_j();
        let psi = Mps::product(&b, &[1, 2, 0, 1]).unwrap();
        let (out, rep) = compress(&psi, 0.5).unwrap();
        assert_eq!(rep.max_bond, 1);
        assert_eq!(rep.total_discarded(), 0.0);
        assert!((psi.overlap(&out).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_pair_is_kept() {
        let b = SiteBasis::spin_half();
        let sb = SectorBasis::new(&b, 2, SymmetrySector::new(&b, 2, 1, 1).unwrap()).unwrap();
        let v = Array1::from_elem(2, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let psi = Mps::from_dense(&sb, &v).unwrap();
        let (out, rep) = compress(&psi, 0.4).unwrap();
        assert_eq!(rep.max_bond, 2);
        assert_eq!(rep.total_discarded(), 0.0);
        assert!((dense_overlap2(&out.to_dense(&sb).unwrap(), &v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_states_respect_budget() {
        let b = SiteBasis::t_j();
        let sb = SectorBasis::new(&b, 8, SymmetrySector::new(&b, 8, 3, 3).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for budget in [1e-1, 1e-2, 1e-3] {
            // decaying amplitudes give a nontrivial spectrum
            let v = Array1::from_shape_fn(sb.dim(), |i| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * (-(i as f64) / 40.0).exp()
            });
            let psi = Mps::from_dense(&sb, &v).unwrap();
            let (out, rep) = compress(&psi, budget).unwrap();
            assert!(rep.total_discarded() <= budget * (1.0 + 1e-12));
            assert!(rep.fidelity_lower_bound <= 1.0);
            let f = dense_overlap2(&out.to_dense(&sb).unwrap(), &v);
            assert!(f >= 1.0 - budget - 1e-12, "budget {budget}: overlap {f}");
            assert!(f >= rep.fidelity_lower_bound - 1e-12);
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }
}
