use std::collections::BTreeMap;

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use super::fusion::fuse_groups;
use super::mps::{site_leg, Mps};
use super::tensor::{BlockTensor, Dir, Leg};
use crate::error::{Error, Result};
use crate::models::{SiteBasis, Term};
use crate::symmetry::Charge;

/// Matrix-product operator with site tensors `[ml In, out In, in Out, mr Out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    basis: SiteBasis,
    tensors: Vec<BlockTensor>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum State {
    Start,
    Done,
    /// First factor placed.
    Open(usize),
    /// First factor and the factors still to come.
    Pending(usize, Vec<usize>),
}

impl Mpo {
    /// Builds the operator `sum_k terms[k]` as a finite-state automaton.
    pub fn from_terms(basis: &SiteBasis, length: usize, terms: &[Term]) -> Mpo {
        let d = basis.dim();
        let phys = site_leg(basis);
        // map basis state -> position on the physical leg
        let pos: Vec<usize> = (0..d).map(|s| phys.find(basis.charge(s)).unwrap()).collect();

        let mut ops: Vec<(Array2<C64>, Charge)> = Vec::new();
        let mut op_id = |m: &Array2<C64>, q: Charge| -> usize {
            match ops.iter().position(|(o, c)| o == m && *c == q) {
                Some(i) => i,
                None => {
                    ops.push((m.clone(), q));
                    ops.len() - 1
                }
            }
        };
        struct T {
            start0: usize,
            ids: Vec<usize>,
            coeff: C64,
        }
        let ts: Vec<T> = terms
            .iter()
            .map(|t| T {
                start0: t.start - 1,
                ids: t.ops.iter().zip(&t.charges).map(|(m, &q)| op_id(m, q)).collect(),
                coeff: t.coefficient,
            })
            .collect();
        let done_charge = terms
            .first()
            .map(|t| t.charges.iter().fold(Charge::ZERO, |a, &c| a + c))
            .unwrap_or(Charge::ZERO);

        let charge_of = |st: &State| -> Charge {
            match st {
                State::Start => Charge::ZERO,
                State::Done => done_charge,
                State::Open(a) => ops[*a].1,
                State::Pending(_, rest) => done_charge - rest.iter().fold(Charge::ZERO, |q, &i| q + ops[i].1),
            }
        };

        // transitions[j]: (from state, to state) -> summed local matrix
        let mut trans: Vec<BTreeMap<(State, State), Array2<C64>>> = vec![BTreeMap::new(); length];
        let eye: Array2<C64> = Array2::eye(d);
        let add = |trans: &mut [BTreeMap<(State, State), Array2<C64>>], j: usize, from: State, to: State, m: Array2<C64>| {
            let e = trans[j].entry((from, to)).or_insert_with(|| Array2::zeros((d, d)));
            *e += &m;
        };
        let set = |trans: &mut [BTreeMap<(State, State), Array2<C64>>], j: usize, from: State, to: State, m: Array2<C64>| {
            trans[j].insert((from, to), m);
        };
        for j in 0..length {
            if j + 1 < length {
                add(&mut trans, j, State::Start, State::Start, eye.clone());
            }
            if j > 0 {
                add(&mut trans, j, State::Done, State::Done, eye.clone());
            }
        }
        for t in &ts {
            let k = t.ids.len();
            if k == 1 {
                add(&mut trans, t.start0, State::Start, State::Done, ops[t.ids[0]].0.mapv(|x| x * t.coeff));
                continue;
            }
            // only the coefficient-carrying step accumulates; shared
            // prefixes and suffixes are single transitions
            let a = t.ids[0];
            set(&mut trans, t.start0, State::Start, State::Open(a), ops[a].0.clone());
            for p in 1..k {
                let from = if p == 1 { State::Open(a) } else { State::Pending(a, t.ids[p..].to_vec()) };
                let to = if p == k - 1 { State::Done } else { State::Pending(a, t.ids[p + 1..].to_vec()) };
                if p == 1 {
                    add(&mut trans, t.start0 + p, from, to, ops[t.ids[p]].0.mapv(|x| x * t.coeff));
                } else {
                    set(&mut trans, t.start0 + p, from, to, ops[t.ids[p]].0.clone());
                }
            }
        }

        // keep only transitions reachable from Start that can still reach Done
        let mut bonds: Vec<Vec<State>> = vec![vec![State::Start]];
        for tr in trans.iter_mut() {
            let from: Vec<State> = bonds.last().unwrap().clone();
            tr.retain(|(f, _), _| from.contains(f));
            let mut set: Vec<State> = tr.keys().map(|(_, to)| to.clone()).collect();
            set.sort();
            set.dedup();
            bonds.push(set);
        }
        bonds[length].retain(|s| *s == State::Done);
        for j in (0..length).rev() {
            let alive = bonds[j + 1].clone();
            trans[j].retain(|(_, t), _| alive.contains(t));
            if j > 0 {
                let mut set: Vec<State> = trans[j].keys().map(|(f, _)| f.clone()).collect();
                set.sort();
                set.dedup();
                bonds[j] = set;
            }
        }
        let leg_of = |states: &[State], dir: Dir| -> (Leg, Vec<usize>) {
            let mut counts: BTreeMap<Charge, usize> = BTreeMap::new();
            let mut local = Vec::with_capacity(states.len());
            for st in states {
                let c = counts.entry(charge_of(st)).or_insert(0);
                local.push(*c);
                *c += 1;
            }
            let leg = Leg::new(dir, counts.into_iter().collect());
            let dense: Vec<usize> = states
                .iter()
                .zip(&local)
                .map(|(st, &i)| leg.offset(leg.find(charge_of(st)).unwrap()) + i)
                .collect();
            (leg, dense)
        };

        let mut tensors = Vec::with_capacity(length);
        for j in 0..length {
            let (lleg, lpos) = leg_of(&bonds[j], Dir::In);
            let (rleg, rpos) = leg_of(&bonds[j + 1], Dir::Out);
            let mut w = ArrayD::zeros(IxDyn(&[lleg.dim(), d, d, rleg.dim()]));
            for ((from, to), m) in &trans[j] {
                let a = bonds[j].iter().position(|s| s == from).expect("source state on bond");
                let b = bonds[j + 1].iter().position(|s| s == to).unwrap();
                for so in 0..d {
                    for si in 0..d {
                        w[[lpos[a], pos[so], pos[si], rpos[b]]] += m[[so, si]];
                    }
                }
            }
            let legs = vec![lleg, phys.clone(), phys.flipped(), rleg];
            tensors.push(BlockTensor::from_dense(legs, &w, 1e-12).expect("charge-conserving terms"));
        }
        Mpo { basis: basis.clone(), tensors }
    }

    pub fn identity(basis: &SiteBasis, length: usize) -> Mpo {
        let d = basis.dim();
        let phys = site_leg(basis);
        let mut w = ArrayD::zeros(IxDyn(&[1, d, d, 1]));
        for s in 0..d {
            w[[0, s, s, 0]] = C64::new(1.0, 0.0);
        }
        let legs = vec![
            Leg::trivial(Dir::In, Charge::ZERO),
            phys.clone(),
            phys.flipped(),
            Leg::trivial(Dir::Out, Charge::ZERO),
        ];
        let t = BlockTensor::from_dense(legs, &w, 0.0).expect("identity conserves charge");
        Mpo { basis: basis.clone(), tensors: vec![t; length] }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn basis(&self) -> &SiteBasis {
        &self.basis
    }

    pub fn tensor(&self, j: usize) -> &BlockTensor {
        &self.tensors[j]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.leg(3).dim()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Dense matrix on the full product space in basis ordering, site 1 most
    /// significant. Small chains only.
    pub fn to_dense(&self) -> Array2<C64> {
        let d = self.basis.dim();
        let phys = site_leg(&self.basis);
        let pos: Vec<usize> = (0..d).map(|s| phys.find(self.basis.charge(s)).unwrap()).collect();
        // acc[(out, in)] as a row vector over the current right MPO bond
        let mut acc: Vec<((usize, usize), Vec<C64>)> = vec![((0, 0), vec![C64::new(1.0, 0.0)])];
        for w in &self.tensors {
            let wd = w.to_dense();
            let dr = wd.shape()[3];
            let mut next = Vec::with_capacity(acc.len() * d * d);
            for ((o, i), v) in &acc {
                for so in 0..d {
                    for si in 0..d {
                        let mut nv = vec![C64::new(0.0, 0.0); dr];
                        let mut any = false;
                        for (a, x) in v.iter().enumerate() {
                            if x.norm() == 0.0 {
                                continue;
                            }
                            for (b, y) in nv.iter_mut().enumerate() {
                                let wv = wd[[a, pos[so], pos[si], b]];
                                if wv.norm() != 0.0 {
                                    *y += x * wv;
                                    any = true;
                                }
                            }
                        }
                        if any {
                            next.push(((o * d + so, i * d + si), nv));
                        }
                    }
                }
            }
            acc = next;
        }
        let n = d.pow(self.len() as u32);
        let mut m = Array2::zeros((n, n));
        for ((o, i), v) in acc {
            m[[o, i]] += v[0];
        }
        m
    }

    /// Exact product `W |psi>`; bond dimensions multiply.
    pub fn apply(&self, psi: &Mps) -> Result<Mps> {
        if psi.len() != self.len() || psi.basis() != &self.basis {
            return Err(Error::Shape("MPO and MPS geometry differ".into()));
        }
        let mut tensors = Vec::with_capacity(self.len());
        for j in 0..self.len() {
            // [ml, out, mr, l, r]
            let t = self.tensors[j].contract(&[2], psi.tensor(j), &[1])?;
            let (f, _) = fuse_groups(&t, &[vec![3, 0], vec![1], vec![4, 2]], &[Dir::In, Dir::In, Dir::Out]);
            tensors.push(f);
        }
        Mps::from_tensors(self.basis.clone(), tensors)
    }
}

/// `W |psi>` without compression.
pub fn apply_mpo(mpo: &Mpo, psi: &Mps) -> Result<Mps> {
    mpo.apply(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bh, build_tj, build_xxz, CouplingSet, SectorBasis};
    use crate::symmetry::SymmetrySector;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_frob(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        let n: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let d: f64 = (a - b).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        d / n.max(1e-300)
    }

    #[test]
    fn xxz_terms_equal_mpo() {
        let h = build_xxz(4, 1.0, 0.7).unwrap();
        assert!(rel_frob(&h.mpo().to_dense(), &h.dense_matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn tj_and_bh_terms_equal_mpo() {
        let c = CouplingSet::from_bh(1.0, 0.7, 12.0, 9.0, 10.0).unwrap();
        let h = build_tj(6, &c, true).unwrap();
        assert!(rel_frob(&h.mpo().to_dense(), &h.dense_matrix().unwrap()) < 1e-12);
        assert_eq!(h.mpo().max_bond(), 17);
        let h = build_bh(3, &c, 2, None).unwrap();
        assert!(rel_frob(&h.mpo().to_dense(), &h.dense_matrix().unwrap()) < 1e-12);
    }

    #[test]
    fn polarized_state_is_eigenstate() {
        let (jp, jz) = (1.0, 0.7);
        let h = build_xxz(4, jp, jz).unwrap();
        let psi = Mps::product(&h.basis, &[0; 4]).unwrap();
        let hpsi = h.mpo().apply(&psi).unwrap();
        let e = jz * 3.0 / 4.0;
        let ov = psi.overlap(&hpsi).unwrap();
        assert!((ov - C64::new(e, 0.0)).norm() < 1e-14);
        assert!((hpsi.overlap(&hpsi).unwrap().re - e * e).abs() < 1e-14);
    }

    #[test]
    fn apply_matches_sparse_product() {
        let c = CouplingSet::isotropic(1.0, 15.0).unwrap();
        let h = build_tj(6, &c, true).unwrap();
        let b = &h.basis;
        let sb = SectorBasis::new(b, 6, SymmetrySector::new(b, 6, 2, 3).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = Array1::from_shape_fn(sb.dim(), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let psi = Mps::from_dense(&sb, &v).unwrap();
        let hv = crate::models::SparseOperator::from_terms(&sb, h.terms()).unwrap().apply(&v);
        let got = h.mpo().apply(&psi).unwrap().to_dense(&sb).unwrap();
        let err = (&got - &hv).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn identity_mpo_keeps_state() {
        let b = SiteBasis::t_j();
        let psi = Mps::product(&b, &[1, 0, 2]).unwrap();
        let out = Mpo::identity(&b, 3).apply(&psi).unwrap();
        assert!((psi.overlap(&out).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
