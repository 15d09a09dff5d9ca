//! Sector-resolved configuration bases and sparse operators for exact
//! reference calculations.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::basis::SiteBasis;
use super::hamiltonian::Term;
use crate::error::{param, Error, Result};
use crate::symmetry::{Charge, SymmetrySector};

/// Largest sector the dense path will enumerate.
pub const MAX_SECTOR_DIM: u128 = 80_000_000;

/// Sorted list of product configurations with fixed particle numbers.
///
/// A configuration is packed into a `u128` with `bits` bits per site and
/// site 1 in the most significant position, so numeric order equals
/// lexicographic order of the local state indices.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    basis: SiteBasis,
    length: usize,
    sector: SymmetrySector,
    bits: u32,
    configs: Vec<u128>,
}

impl SectorBasis {
    pub fn new(basis: &SiteBasis, length: usize, sector: SymmetrySector) -> Result<Self> {
        let bits = usize::BITS - (basis.dim() - 1).leading_zeros();
        if bits as usize * length > 128 {
            return param(format!("L = {length} does not fit the packed configuration key"));
        }
        let count = Self::count(basis, length, sector);
        if count == 0 {
            return param(format!("sector {sector} is empty for L = {length}"));
        }
        if count > MAX_SECTOR_DIM {
            return param(format!("sector dimension {count} exceeds the dense limit {MAX_SECTOR_DIM}"));
        }
        let mut sb = SectorBasis {
            basis: basis.clone(),
            length,
            sector,
            bits,
            configs: Vec::with_capacity(count as usize),
        };
        let occ: Vec<(usize, usize)> = (0..basis.dim()).map(|s| basis.occupation(s)).collect();
        let cap = basis.max_species_occupation();
        let mut configs = std::mem::take(&mut sb.configs);
        fill(&occ, cap, length, bits, 0, 0, sector.n_up, sector.n_down, &mut configs);
        debug_assert!(configs.windows(2).all(|w| w[0] < w[1]));
        sb.configs = configs;
        Ok(sb)
    }

    /// Number of configurations in the sector, without enumerating them.
    pub fn count(basis: &SiteBasis, length: usize, sector: SymmetrySector) -> u128 {
        let (nu, nd) = (sector.n_up, sector.n_down);
        // ways[u][d] for the sites processed so far
        let mut ways = vec![vec![0u128; nd + 1]; nu + 1];
        ways[0][0] = 1;
        for _ in 0..length {
            let mut next = vec![vec![0u128; nd + 1]; nu + 1];
            for u in 0..=nu {
                for d in 0..=nd {
                    if ways[u][d] == 0 {
                        continue;
                    }
                    for s in 0..basis.dim() {
                        let (a, b) = basis.occupation(s);
                        if u + a <= nu && d + b <= nd {
                            next[u + a][d + b] = next[u + a][d + b].saturating_add(ways[u][d]);
                        }
                    }
                }
            }
            ways = next;
        }
        ways[nu][nd]
    }

    pub fn basis(&self) -> &SiteBasis {
        &self.basis
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sector(&self) -> SymmetrySector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u128] {
        &self.configs
    }

    pub fn index_of(&self, key: u128) -> Option<usize> {
        self.configs.binary_search(&key).ok()
    }

    fn shift(&self, site0: usize) -> u32 {
        self.bits * (self.length - 1 - site0) as u32
    }

    /// Number of key bits holding the sites after `site0`.
    pub fn site_shift(&self, site0: usize) -> u32 {
        self.shift(site0)
    }

    /// Local state at 0-based site `site0`.
    pub fn site_state(&self, key: u128, site0: usize) -> usize {
        ((key >> self.shift(site0)) & ((1u128 << self.bits) - 1)) as usize
    }

    pub fn with_site(&self, key: u128, site0: usize, state: usize) -> u128 {
        let sh = self.shift(site0);
        let mask = ((1u128 << self.bits) - 1) << sh;
        (key & !mask) | ((state as u128) << sh)
    }

    pub fn encode(&self, states: &[usize]) -> u128 {
        states.iter().fold(0u128, |k, &s| (k << self.bits) | s as u128)
    }

    pub fn decode(&self, key: u128) -> Vec<usize> {
        (0..self.length).map(|j| self.site_state(key, j)).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn fill(
    occ: &[(usize, usize)],
    cap: usize,
    length: usize,
    bits: u32,
    site: usize,
    prefix: u128,
    rem_up: usize,
    rem_down: usize,
    out: &mut Vec<u128>,
) {
    if site == length {
        if rem_up == 0 && rem_down == 0 {
            out.push(prefix);
        }
        return;
    }
    let sites_after = length - site - 1;
    for (s, &(a, b)) in occ.iter().enumerate() {
        if a > rem_up || b > rem_down {
            continue;
        }
        let (ru, rd) = (rem_up - a, rem_down - b);
        if ru > sites_after * cap || rd > sites_after * cap || ru + rd > sites_after * max_total(occ) {
            continue;
        }
        fill(occ, cap, length, bits, site + 1, (prefix << bits) | s as u128, ru, rd, out);
    }
}

fn max_total(occ: &[(usize, usize)]) -> usize {
    occ.iter().map(|(a, b)| a + b).max().unwrap_or(0)
}

#[derive(Clone, Debug)]
enum Values {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

/// Particle-number conserving operator on one sector: diagonal plus
/// off-diagonal entries in compressed-column form.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    diag: Vec<C64>,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Values,
}

struct LocalAction {
    start0: usize,
    width: usize,
    /// For each input window state, the nonzero outputs.
    columns: Vec<Vec<(usize, C64)>>,
}

impl SparseOperator {
    pub fn from_terms(sb: &SectorBasis, terms: &[Term]) -> Result<Self> {
        let d = sb.basis().dim();
        let mut actions = Vec::with_capacity(terms.len());
        for t in terms {
            let net = t.charges.iter().fold(Charge::ZERO, |a, &c| a + c);
            if net != Charge::ZERO {
                return param(format!("term {} changes particle numbers", t.label()));
            }
            if t.end() > sb.length() {
                return Err(Error::Shape(format!("term {} exceeds the chain", t.label())));
            }
            let m = t.dense_local();
            let n = m.nrows();
            let columns = (0..n)
                .map(|c| {
                    (0..n)
                        .filter(|&r| m[[r, c]].norm() != 0.0)
                        .map(|r| (r, m[[r, c]]))
                        .collect()
                })
                .collect();
            actions.push(LocalAction { start0: t.start - 1, width: t.len(), columns });
        }
        let real = terms.iter().all(|t| {
            t.coefficient.im == 0.0 && t.ops.iter().all(|m| m.iter().all(|x| x.im == 0.0))
        });

        let dim = sb.dim();
        if dim > u32::MAX as usize {
            return param("sector too large for 32-bit row indices");
        }
        let mut diag = vec![C64::new(0.0, 0.0); dim];
        let mut col_ptr = Vec::with_capacity(dim + 1);
        col_ptr.push(0);
        let mut rows: Vec<u32> = Vec::new();
        let mut rvals: Vec<f64> = Vec::new();
        let mut cvals: Vec<C64> = Vec::new();
        let mut scratch: Vec<(usize, C64)> = Vec::new();

        for (col, &key) in sb.configs().iter().enumerate() {
            scratch.clear();
            for a in &actions {
                let mut local = 0usize;
                for k in 0..a.width {
                    local = local * d + sb.site_state(key, a.start0 + k);
                }
                for &(out, v) in &a.columns[local] {
                    if out == local {
                        diag[col] += v;
                        continue;
                    }
                    let mut new_key = key;
                    let mut rest = out;
                    for k in (0..a.width).rev() {
                        new_key = sb.with_site(new_key, a.start0 + k, rest % d);
                        rest /= d;
                    }
                    let row = sb
                        .index_of(new_key)
                        .expect("charge-neutral term stays inside the sector");
                    scratch.push((row, v));
                }
            }
            scratch.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let row = scratch[i].0;
                let mut v = C64::new(0.0, 0.0);
                while i < scratch.len() && scratch[i].0 == row {
                    v += scratch[i].1;
                    i += 1;
                }
                if v.norm() == 0.0 {
                    continue;
                }
                if row == col {
                    diag[col] += v;
                    continue;
                }
                rows.push(row as u32);
                if real {
                    rvals.push(v.re);
                } else {
                    cvals.push(v);
                }
            }
            col_ptr.push(rows.len());
        }
        rows.shrink_to_fit();
        let vals = if real {
            rvals.shrink_to_fit();
            Values::Real(rvals)
        } else {
            Values::Complex(cvals)
        };
        Ok(SparseOperator { dim, diag, col_ptr, rows, vals })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.len() + self.diag.iter().filter(|x| x.norm() != 0.0).count()
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
        match &self.vals {
            Values::Real(v) => {
                for col in 0..self.dim {
                    let xc = x[col];
                    for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                        y[self.rows[k] as usize] += xc * v[k];
                    }
                }
            }
            Values::Complex(v) => {
                for col in 0..self.dim {
                    let xc = x[col];
                    for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                        y[self.rows[k] as usize] += xc * v[k];
                    }
                }
            }
        }
    }

    pub fn apply(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.dim);
        let xs = x.as_slice().expect("contiguous vector");
        self.apply_into(xs, y.as_slice_mut().unwrap());
        y
    }

    /// `<x|A|x>`.
    pub fn expectation(&self, x: &Array1<C64>) -> C64 {
        let ax = self.apply(x);
        x.iter().zip(ax.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            m[[i, i]] = self.diag[i];
        }
        for col in 0..self.dim {
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                let v = match &self.vals {
                    Values::Real(v) => C64::new(v[k], 0.0),
                    Values::Complex(v) => v[k],
                };
                m[[self.rows[k] as usize, col]] += v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bh, build_tj, build_xxz, CouplingSet};
    use ndarray_linalg::{EigValsh, UPLO};

    fn sector(basis: &SiteBasis, l: usize, u: usize, d: usize) -> SectorBasis {
        SectorBasis::new(basis, l, SymmetrySector::new(basis, l, u, d).unwrap()).unwrap()
    }

    fn spectrum(m: &Array2<C64>) -> Vec<f64> {
        let mut ev = m.eigvalsh(UPLO::Lower).unwrap().to_vec();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn sector_counts() {
        let bh = SiteBasis::boson(1).unwrap();
        assert_eq!(sector(&bh, 2, 1, 1).dim(), 4);
        assert_eq!(sector(&SiteBasis::t_j(), 3, 2, 0).dim(), 3);
        assert_eq!(sector(&SiteBasis::spin_half(), 6, 3, 3).dim(), 20);
        let b2 = SiteBasis::boson(2).unwrap();
        let s = SymmetrySector::new(&b2, 4, 2, 2).unwrap();
        assert_eq!(SectorBasis::count(&b2, 4, s) as usize, SectorBasis::new(&b2, 4, s).unwrap().dim());
    }

    #[test]
    fn encode_decode_roundtrip() {
        let sb = sector(&SiteBasis::t_j(), 5, 2, 2);
        for &k in sb.configs() {
            assert_eq!(sb.encode(&sb.decode(k)), k);
            assert_eq!(sb.index_of(k).map(|i| sb.configs()[i]), Some(k));
        }
    }

    /// Sector blocks of the full dense matrix must equal the sparse operator.
    #[test]
    fn sparse_matches_dense_projection() {
        let c = CouplingSet::from_bh(1.0, 0.6, 9.0, 11.0, 10.0).unwrap();
        let h = build_tj(5, &c, true).unwrap();
        let full = h.dense_matrix().unwrap();
        let sb = sector(&h.basis, 5, 2, 1);
        let sp = SparseOperator::from_terms(&sb, h.terms()).unwrap().to_dense();
        let d = h.basis.dim();
        let flat = |k: u128| sb.decode(k).iter().fold(0, |a, &s| a * d + s);
        for (i, &ki) in sb.configs().iter().enumerate() {
            for (j, &kj) in sb.configs().iter().enumerate() {
                assert!((sp[[i, j]] - full[[flat(ki), flat(kj)]]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn tj_zero_hole_sector_is_xxz() {
        let c = CouplingSet::isotropic(1.0, 15.0).unwrap();
        let l = 6;
        let tj = build_tj(l, &c, true).unwrap();
        let xxz = build_xxz(l, c.j_perp, c.j_z).unwrap();
        for n_up in 0..=l {
            let a = SparseOperator::from_terms(&sector(&tj.basis, l, n_up, l - n_up), tj.terms()).unwrap();
            let b = SparseOperator::from_terms(&sector(&xxz.basis, l, n_up, l - n_up), xxz.terms()).unwrap();
            let (ea, eb) = (spectrum(&a.to_dense()), spectrum(&b.to_dense()));
            assert_eq!(ea.len(), eb.len());
            for (x, y) in ea.iter().zip(&eb) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn apply_matches_dense() {
        let c = CouplingSet::isotropic(1.0, 8.0).unwrap();
        let h = build_bh(4, &c, 2, None).unwrap();
        let sb = sector(&h.basis, 4, 2, 2);
        let op = SparseOperator::from_terms(&sb, h.terms()).unwrap();
        let x = Array1::from_iter((0..sb.dim()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())));
        let y1 = op.apply(&x);
        let y2 = op.to_dense().dot(&x);
        for (a, b) in y1.iter().zip(y2.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
