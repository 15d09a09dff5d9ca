//! Single-site Hilbert spaces and their operators.
//!
//! Orderings are fixed because every operator matrix depends on them:
//!
//! * `SpinHalf`: `(up, down)`
//! * `TJ`: `(empty, up, down)`
//! * `Boson2Species`: lexicographic in `(n_up, n_down)`, index `n_up * (n_max + 1) + n_down`

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmetry::Charge;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    SpinHalf,
    TJ,
    Boson2Species,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteBasis {
    kind: BasisKind,
    n_max: usize,
    labels: Vec<String>,
}

impl SiteBasis {
    pub fn spin_half() -> Self {
        SiteBasis {
            kind: BasisKind::SpinHalf,
            n_max: 1,
            labels: vec!["up".into(), "down".into()],
        }
    }

    pub fn t_j() -> Self {
        SiteBasis {
            kind: BasisKind::TJ,
            n_max: 1,
            labels: vec!["empty".into(), "up".into(), "down".into()],
        }
    }

    /// Two boson species with at most `n_max` bosons of each species per site.
    pub fn boson(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Parameter("boson cutoff n_max must be >= 1".into()));
        }
        let mut labels = Vec::with_capacity((n_max + 1) * (n_max + 1));
        for nu in 0..=n_max {
            for nd in 0..=n_max {
                labels.push(format!("{nu},{nd}"));
            }
        }
        Ok(SiteBasis { kind: BasisKind::Boson2Species, n_max, labels })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Per-species occupation cutoff (1 for the hard-core bases).
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Occupation numbers `(n_up, n_down)` of local state `i`.
    pub fn occupation(&self, i: usize) -> (usize, usize) {
        match self.kind {
            BasisKind::SpinHalf => [(1, 0), (0, 1)][i],
            BasisKind::TJ => [(0, 0), (1, 0), (0, 1)][i],
            BasisKind::Boson2Species => (i / (self.n_max + 1), i % (self.n_max + 1)),
        }
    }

    pub fn charge(&self, i: usize) -> Charge {
        let (u, d) = self.occupation(i);
        Charge::new(u as i32, d as i32)
    }

    pub fn charges(&self) -> Vec<Charge> {
        (0..self.dim()).map(|i| self.charge(i)).collect()
    }

    pub fn state_index(&self, n_up: usize, n_down: usize) -> Option<usize> {
        (0..self.dim()).find(|&i| self.occupation(i) == (n_up, n_down))
    }

    /// Index of the singly occupied `up` state.
    pub fn up(&self) -> usize {
        self.state_index(1, 0).expect("every basis has a single up particle state")
    }

    pub fn down(&self) -> usize {
        self.state_index(0, 1).expect("every basis has a single down particle state")
    }

    pub fn empty(&self) -> Option<usize> {
        self.state_index(0, 0)
    }

    /// Largest local occupation of one species.
    pub fn max_species_occupation(&self) -> usize {
        match self.kind {
            BasisKind::Boson2Species => self.n_max,
            _ => 1,
        }
    }

    pub fn local_operator(&self, name: LocalOpName) -> Result<LocalOp> {
        use LocalOpName::*;
        let d = self.dim();
        let invalid = || {
            Err(Error::Lookup(format!("operator {name} is not defined on basis {:?}", self.kind)))
        };
        let matrix = match name {
            Identity => Array2::eye(d),
            NUp => self.diag(|(u, _)| u as f64),
            NDown => self.diag(|(_, dn)| dn as f64),
            NTotal => self.diag(|(u, dn)| (u + dn) as f64),
            Sz => self.diag(|(u, dn)| 0.5 * (u as f64 - dn as f64)),
            SPlus => self.spin_raise(),
            SMinus => self.spin_raise().t().to_owned(),
            Sx => {
                let p = self.spin_raise();
                (&p + &p.t()).mapv(|x| x * 0.5)
            }
            Sy => {
                let p = self.spin_raise();
                // (S+ - S-) / 2i
                (&p - &p.t()).mapv(|x| x * C64::new(0.0, -0.5))
            }
            AUp | ADown | AUpDag | ADownDag => {
                if self.kind != BasisKind::TJ {
                    return invalid();
                }
                self.annihilator(name.species(), name.is_creation())
            }
            BUp | BDown | BUpDag | BDownDag => {
                if self.kind != BasisKind::Boson2Species {
                    return invalid();
                }
                self.annihilator(name.species(), name.is_creation())
            }
        };
        Ok(LocalOp::new(name.to_string(), matrix, &self.charges()))
    }

    fn diag(&self, f: impl Fn((usize, usize)) -> f64) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            m[[i, i]] = C64::new(f(self.occupation(i)), 0.0);
        }
        m
    }

    /// `b_sigma` (or its adjoint) truncated to the local space.
    fn annihilator(&self, species_up: bool, creation: bool) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            let (u, dn) = self.occupation(i);
            let (n, target) = if species_up {
                (u, u.checked_sub(1).and_then(|u2| self.state_index(u2, dn)))
            } else {
                (dn, dn.checked_sub(1).and_then(|d2| self.state_index(u, d2)))
            };
            if let Some(j) = target {
                if self.kind == BasisKind::SpinHalf {
                    continue;
                }
                m[[j, i]] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        if creation {
            m.t().to_owned()
        } else {
            m
        }
    }

    /// `S^+ = b^dag_up b_down` (the plain raising operator on a spin-1/2).
    fn spin_raise(&self) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            let (u, dn) = self.occupation(i);
            if dn == 0 {
                continue;
            }
            if let Some(j) = self.state_index(u + 1, dn - 1) {
                m[[j, i]] = C64::new((dn as f64 * (u + 1) as f64).sqrt(), 0.0);
            }
        }
        m
    }
}

/// Names accepted by [`SiteBasis::local_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalOpName {
    Identity,
    Sx,
    Sy,
    Sz,
    SPlus,
    SMinus,
    NUp,
    NDown,
    NTotal,
    AUp,
    ADown,
    AUpDag,
    ADownDag,
    BUp,
    BDown,
    BUpDag,
    BDownDag,
}

impl LocalOpName {
    fn species(self) -> bool {
        use LocalOpName::*;
        matches!(self, AUp | AUpDag | BUp | BUpDag)
    }

    fn is_creation(self) -> bool {
        use LocalOpName::*;
        matches!(self, AUpDag | ADownDag | BUpDag | BDownDag)
    }

    const ALL: [(LocalOpName, &'static str); 17] = [
        (LocalOpName::Identity, "Id"),
        (LocalOpName::Sx, "Sx"),
        (LocalOpName::Sy, "Sy"),
        (LocalOpName::Sz, "Sz"),
        (LocalOpName::SPlus, "S+"),
        (LocalOpName::SMinus, "S-"),
        (LocalOpName::NUp, "n_up"),
        (LocalOpName::NDown, "n_down"),
        (LocalOpName::NTotal, "n"),
        (LocalOpName::AUp, "a_up"),
        (LocalOpName::ADown, "a_down"),
        (LocalOpName::AUpDag, "a_up_dag"),
        (LocalOpName::ADownDag, "a_down_dag"),
        (LocalOpName::BUp, "b_up"),
        (LocalOpName::BDown, "b_down"),
        (LocalOpName::BUpDag, "b_up_dag"),
        (LocalOpName::BDownDag, "b_down_dag"),
    ];
}

impl fmt::Display for LocalOpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = LocalOpName::ALL.iter().find(|(n, _)| n == self).map(|(_, s)| *s).unwrap();
        f.write_str(s)
    }
}

impl FromStr for LocalOpName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let alias = match s {
            "S^x" => "Sx",
            "S^y" => "Sy",
            "S^z" => "Sz",
            "S^+" | "Sp" => "S+",
            "S^-" | "Sm" => "S-",
            other => other,
        };
        LocalOpName::ALL
            .iter()
            .find(|(_, n)| *n == alias)
            .map(|(op, _)| *op)
            .ok_or_else(|| Error::Lookup(format!("unknown local operator '{s}'")))
    }
}

/// A named single-site operator with its matrix in the basis ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    pub name: String,
    pub matrix: Array2<C64>,
    /// `q(out) - q(in)` when every nonzero element shares it.
    pub charge: Option<Charge>,
}

impl LocalOp {
    pub fn new(name: impl Into<String>, matrix: Array2<C64>, charges: &[Charge]) -> Self {
        let mut charge: Option<Option<Charge>> = None;
        for ((o, i), v) in matrix.indexed_iter() {
            if v.norm() == 0.0 {
                continue;
            }
            let c = charges[o] - charges[i];
            charge = match charge {
                None => Some(Some(c)),
                Some(Some(prev)) if prev == c => Some(Some(c)),
                _ => Some(None),
            };
        }
        LocalOp {
            name: name.into(),
            matrix,
            charge: charge.unwrap_or(Some(Charge::ZERO)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Splits the operator into pieces of definite charge transfer.
    pub fn charge_components(&self, charges: &[Charge]) -> Vec<(Charge, Array2<C64>)> {
        let mut parts: Vec<(Charge, Array2<C64>)> = Vec::new();
        for ((o, i), v) in self.matrix.indexed_iter() {
            if v.norm() == 0.0 {
                continue;
            }
            let c = charges[o] - charges[i];
            let slot = match parts.iter().position(|(q, _)| *q == c) {
                Some(p) => p,
                None => {
                    parts.push((c, Array2::zeros(self.matrix.raw_dim())));
                    parts.len() - 1
                }
            };
            parts[slot].1[[o, i]] = *v;
        }
        parts.sort_by_key(|(q, _)| *q);
        parts
    }

    pub fn adjoint(&self) -> LocalOp {
        LocalOp {
            name: format!("{}^dag", self.name),
            matrix: self.matrix.t().mapv(|x| x.conj()),
            charge: self.charge.map(|c| -c),
        }
    }

    /// Product `self * other` acting on the same site.
    pub fn compose(&self, other: &LocalOp, charges: &[Charge]) -> LocalOp {
        LocalOp::new(
            format!("{}*{}", self.name, other.name),
            self.matrix.dot(&other.matrix),
            charges,
        )
    }

    pub fn scaled(&self, c: C64) -> LocalOp {
        LocalOp { name: self.name.clone(), matrix: self.matrix.mapv(|x| x * c), charge: self.charge }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
        a.dot(b) - b.dot(a)
    }

    fn max_abs(m: &Array2<C64>) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_sz_is_diagonal_half() {
        let b = SiteBasis::spin_half();
        let sz = b.local_operator(LocalOpName::Sz).unwrap().matrix;
        assert_eq!(sz[[0, 0]], C64::new(0.5, 0.0));
        assert_eq!(sz[[1, 1]], C64::new(-0.5, 0.0));
        assert_eq!(sz[[0, 1]], C64::new(0.0, 0.0));
    }

    #[test]
    fn tj_sz_annihilates_empty() {
        let b = SiteBasis::t_j();
        let sz = b.local_operator(LocalOpName::Sz).unwrap().matrix;
        let expect = [0.0, 0.5, -0.5];
        for i in 0..3 {
            assert_eq!(sz[[i, i]].re, expect[i]);
        }
        for name in [LocalOpName::Sx, LocalOpName::Sy, LocalOpName::SPlus, LocalOpName::SMinus] {
            let m = b.local_operator(name).unwrap().matrix;
            assert!(m.row(0).iter().chain(m.column(0).iter()).all(|x| x.norm() == 0.0));
        }
    }

    #[test]
    fn spin_algebra_hard_core_bases() {
        for b in [SiteBasis::spin_half(), SiteBasis::t_j()] {
            let sx = b.local_operator(LocalOpName::Sx).unwrap().matrix;
            let sy = b.local_operator(LocalOpName::Sy).unwrap().matrix;
            let sz = b.local_operator(LocalOpName::Sz).unwrap().matrix;
            let diff = commutator(&sx, &sy) - sz.mapv(|x| x * C64::i());
            assert!(max_abs(&diff) < 1e-14);
        }
    }

    /// The species cutoff truncates Schwinger-boson multiplets with
    /// `n_up + n_down > n_max`; the algebra holds exactly below that.
    #[test]
    fn spin_algebra_bosons_on_complete_multiplets() {
        for n_max in 1..=3 {
            let b = SiteBasis::boson(n_max).unwrap();
            let sx = b.local_operator(LocalOpName::Sx).unwrap().matrix;
            let sy = b.local_operator(LocalOpName::Sy).unwrap().matrix;
            let sz = b.local_operator(LocalOpName::Sz).unwrap().matrix;
            let diff = commutator(&sx, &sy) - sz.mapv(|x| x * C64::i());
            for i in 0..b.dim() {
                let (u, d) = b.occupation(i);
                if u + d <= n_max {
                    for j in 0..b.dim() {
                        assert!(diff[[i, j]].norm() < 1e-14, "n_max={n_max} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn boson_bilinears_match_definition() {
        let b = SiteBasis::boson(2).unwrap();
        let bu = b.local_operator(LocalOpName::BUp).unwrap().matrix;
        let bd = b.local_operator(LocalOpName::BDown).unwrap().matrix;
        let sp = b.local_operator(LocalOpName::SPlus).unwrap().matrix;
        let expect = bu.t().mapv(|x| x.conj()).dot(&bd);
        assert!(max_abs(&(sp - expect)) < 1e-14);
        let n = b.local_operator(LocalOpName::NUp).unwrap().matrix;
        let nn = bu.t().mapv(|x| x.conj()).dot(&bu);
        assert!(max_abs(&(n - nn)) < 1e-14);
    }

    #[test]
    fn invalid_names_are_lookup_errors() {
        assert!(matches!(
            SiteBasis::t_j().local_operator(LocalOpName::BUp),
            Err(Error::Lookup(_))
        ));
        assert!(matches!(
            SiteBasis::boson(2).unwrap().local_operator(LocalOpName::AUp),
            Err(Error::Lookup(_))
        ));
        assert!(matches!(
            SiteBasis::spin_half().local_operator(LocalOpName::ADown),
            Err(Error::Lookup(_))
        ));
        assert!("Q".parse::<LocalOpName>().is_err());
        assert_eq!("S^+".parse::<LocalOpName>().unwrap(), LocalOpName::SPlus);
    }

    #[test]
    fn operator_shapes_match_dim() {
        for b in [SiteBasis::spin_half(), SiteBasis::t_j(), SiteBasis::boson(3).unwrap()] {
            assert_eq!(b.dim(), b.labels().len());
            let op = b.local_operator(LocalOpName::Sz).unwrap();
            assert_eq!(op.matrix.dim(), (b.dim(), b.dim()));
        }
        assert_eq!(SiteBasis::boson(2).unwrap().dim(), 9);
        assert!(SiteBasis::boson(0).is_err());
    }

    #[test]
    fn charges_of_ladder_operators() {
        let b = SiteBasis::t_j();
        let q = b.charges();
        assert_eq!(b.local_operator(LocalOpName::SMinus).unwrap().charge, Some(Charge::new(-1, 1)));
        assert_eq!(b.local_operator(LocalOpName::AUpDag).unwrap().charge, Some(Charge::new(1, 0)));
        let sx = b.local_operator(LocalOpName::Sx).unwrap();
        assert_eq!(sx.charge, None);
        assert_eq!(sx.charge_components(&q).len(), 2);
    }
}
