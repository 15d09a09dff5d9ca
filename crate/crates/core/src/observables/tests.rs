use super::*;
use crate::evolve::{krylov_step_dense, KrylovConfig};
use crate::models::{build_bh, build_tj, build_xxz, CouplingSet, SectorBasis};
use crate::states::{apply_hole, apply_spin_flip, domain_wall, polarized};
use crate::symmetry::SymmetrySector;
use ndarray::Array1;
use std::sync::Arc;

fn tj(l: usize, u: f64) -> HamiltonianRep {
    build_tj(l, &CouplingSet::isotropic(1.0, u).unwrap(), true).unwrap()
}

fn evolve_dense(psi: &QuantumState, h: &HamiltonianRep, dt: f64, steps: usize) -> QuantumState {
    let mut d = psi.to_dense().unwrap();
    let op = SparseOperator::from_terms(&d.sb, h.terms()).unwrap();
    let cfg = KrylovConfig::default().with_dt(dt).with_epsilon(1e-20);
    for _ in 0..steps {
        d = krylov_step_dense(&d, &op, &cfg).unwrap().0;
    }
    QuantumState::Dense(d)
}

#[test]
fn wall_and_hole_profiles() {
    let h = tj(8, 15.0);
    let wall = domain_wall(&h.basis, 8).unwrap();
    let sz = magnetization_profile(&wall).unwrap();
    assert_eq!(sz, vec![0.5, 0.5, 0.5, 0.5, -0.5, -0.5, -0.5, -0.5]);
    assert_eq!(density_profile(&wall).unwrap(), vec![1.0; 8]);
    let hole = apply_hole(&wall, 3).unwrap();
    let sz = magnetization_profile(&hole).unwrap();
    assert_eq!(sz[2], 0.0);
    assert_eq!(density_profile(&hole).unwrap()[2], 0.0);
    let flip = apply_spin_flip(&wall, 2).unwrap();
    assert_eq!(magnetization_profile(&flip).unwrap()[1], -0.5);
}

#[test]
fn product_states_have_no_connected_correlations() {
    let h = tj(8, 15.0);
    let wall = domain_wall(&h.basis, 8).unwrap();
    for dx in 1..=4 {
        assert!(connected_zz(&wall, dx).unwrap().abs() < 1e-15);
        assert!(xx_correlator(&wall, dx).unwrap().abs() < 1e-15);
    }
    assert!(matches!(connected_zz(&wall, 5), Err(Error::Parameter(_))));
    assert!(matches!(xx_correlator(&wall, 0), Err(Error::Parameter(_))));
}

#[test]
fn density_needs_holes_in_the_basis() {
    let h = build_xxz(4, 1.0, 1.0).unwrap();
    let wall = domain_wall(&h.basis, 4).unwrap();
    assert!(matches!(density_profile(&wall), Err(Error::UnsupportedBasis(_))));
}

#[test]
fn bell_pair_entropy() {
    let h = build_xxz(2, 1.0, 1.0).unwrap();
    let sec = SymmetrySector::new(&h.basis, 2, 1, 1).unwrap();
    let sb = Arc::new(SectorBasis::new(&h.basis, 2, sec).unwrap());
    let amps = Array1::from_elem(2, C64::new(0.5f64.sqrt(), 0.0));
    let psi = QuantumState::Dense(DenseState::new(sb, amps).unwrap());
    assert!((entanglement_entropy(&psi, 1).unwrap() - 2f64.ln()).abs() < 1e-12);
    let m = psi.into_mps().unwrap();
    assert!((entanglement_entropy(&m, 1).unwrap() - 2f64.ln()).abs() < 1e-12);
    let wall = domain_wall(&h.basis, 2).unwrap();
    assert!(entanglement_entropy(&wall, 1).unwrap().abs() < 1e-14);
}

#[test]
fn static_states_carry_no_current() {
    let h = tj(8, 15.0);
    for psi in [domain_wall(&h.basis, 8).unwrap(), polarized(&h.basis, 8).unwrap()] {
        for b in 1..8 {
            let c = currents(&psi, &h, b).unwrap();
            assert!(c.up.abs() < 1e-15 && c.down.abs() < 1e-15);
        }
    }
    assert!(currents(&domain_wall(&h.basis, 8).unwrap(), &h, 8).is_err());
}

#[test]
fn edge_bonds_have_no_three_site_part() {
    let h = tj(6, 15.0);
    let psi = evolve_dense(&apply_hole(&domain_wall(&h.basis, 6).unwrap(), 3).unwrap(), &h, 0.1, 3);
    let set: ObservableSet = [ObservableKind::Currents].into();
    let v = measure(&psi, &h, None, &set).unwrap();
    let c3 = &v[keys::CURRENT_UP_3SITE];
    assert!(c3[0].is_nan() && c3[4].is_nan());
    assert!(c3[1..4].iter().all(|x| x.is_finite()));
    for b in 0..5 {
        let total = v[keys::CURRENT_UP][b];
        if c3[b].is_finite() {
            assert!((total - v[keys::CURRENT_UP_2SITE][b] - c3[b]).abs() < 1e-14);
        }
        let spin = v[keys::CURRENT_SPIN][b];
        assert!((spin - 0.5 * (total - v[keys::CURRENT_DOWN][b])).abs() < 1e-15);
    }
    let h2 = build_tj(6, &CouplingSet::isotropic(1.0, 15.0).unwrap(), false).unwrap();
    let c = currents(&psi, &h2, 3).unwrap();
    assert!(c.up_3site.is_none());
}

#[test]
fn continuity_by_finite_differences() {
    let l = 8;
    let h = tj(l, 15.0);
    let fd = 1e-4;
    let minus = evolve_dense(&apply_hole(&domain_wall(&h.basis, l).unwrap(), 3).unwrap(), &h, 0.1, 5);
    let psi = evolve_dense(&minus, &h, fd, 1);
    let plus = evolve_dense(&psi, &h, fd, 1);
    let nu = |s: &QuantumState| Probe::new(s).unwrap().profile(LocalOpName::NUp).unwrap();
    let nd = |s: &QuantumState| Probe::new(s).unwrap().profile(LocalOpName::NDown).unwrap();
    let (up_p, up_m, dn_p, dn_m) = (nu(&plus), nu(&minus), nd(&plus), nd(&minus));
    let cs: Vec<BondCurrents> = (1..l).map(|b| currents(&psi, &h, b).unwrap()).collect();
    for j in 0..l {
        let left = |f: fn(&BondCurrents) -> f64| if j == 0 { 0.0 } else { f(&cs[j - 1]) };
        let right = |f: fn(&BondCurrents) -> f64| if j == l - 1 { 0.0 } else { f(&cs[j]) };
        let dup = (up_p[j] - up_m[j]) / (2.0 * fd);
        let ddn = (dn_p[j] - dn_m[j]) / (2.0 * fd);
        assert!((dup - (left(|c| c.up) - right(|c| c.up))).abs() < 1e-6, "site {j}");
        assert!((ddn - (left(|c| c.down) - right(|c| c.down))).abs() < 1e-6, "site {j}");
    }
}

#[test]
fn dense_and_mps_measurements_agree() {
    let l = 8;
    let h = tj(l, 8.0);
    let psi = evolve_dense(&apply_hole(&domain_wall(&h.basis, l).unwrap(), 3).unwrap(), &h, 0.1, 6);
    let mps = psi.to_mps().unwrap();
    let all: ObservableSet = ObservableKind::ALL.into_iter().collect();
    let a = measure(&psi, &h, None, &all).unwrap();
    let b = measure(&QuantumState::Mps(mps), &h, None, &all).unwrap();
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, va) in &a {
        let vb = &b[k];
        assert_eq!(va.len(), vb.len(), "{k}");
        for (x, y) in va.iter().zip(vb) {
            assert!((x.is_nan() && y.is_nan()) || (x - y).abs() < 1e-10, "{k}: {x} vs {y}");
        }
    }
    // transverse profiles vanish in a sector eigenstate of S^z_total
    for k in [keys::SX_PROFILE, keys::SY_PROFILE] {
        assert!(a[k].iter().all(|x| x.abs() < 1e-12));
    }
}

#[test]
fn zeta_uses_the_central_pair() {
    let l = 6;
    let h = tj(l, 8.0);
    let psi = evolve_dense(&domain_wall(&h.basis, l).unwrap(), &h, 0.1, 8);
    let set: ObservableSet = [ObservableKind::Correlators, ObservableKind::Products].into();
    let v = measure(&psi, &h, None, &set).unwrap();
    assert_eq!(v[keys::ZETA].len(), 3);
    assert_eq!(v["szsz_d2"].len(), 1);
    for dx in 1..=3 {
        assert!((v[keys::ZETA][dx - 1] - connected_zz(&psi, dx).unwrap()).abs() < 1e-14);
        assert!((v[keys::CHI][dx - 1] - xx_correlator(&psi, dx).unwrap()).abs() < 1e-14);
    }
    let mut p = Probe::new(&psi).unwrap();
    let sz = p.basis().local_operator(LocalOpName::Sz).unwrap().matrix;
    // dx = 1 shifted by one: sites (4, 5)
    let want = p.expect(&[(4, sz.clone()), (5, sz)]).unwrap().re;
    assert!((v["szsz_d1"][0] - want).abs() < 1e-14);
}

#[test]
fn boson_currents_have_two_site_parts_only() {
    let c = CouplingSet::isotropic(1.0, 8.0).unwrap();
    let h = build_bh(4, &c, 2, None).unwrap();
    let wall = domain_wall(&h.basis, 4).unwrap();
    let psi = evolve_dense(&wall, &h, 0.05, 4);
    let cur = currents(&psi, &h, 2).unwrap();
    assert!(cur.up_3site.is_none());
    assert!((cur.up - cur.up_2site).abs() < 1e-15);
    let cur_mps = currents(&psi.to_mps().map(QuantumState::Mps).unwrap(), &h, 2).unwrap();
    assert!((cur.up - cur_mps.up).abs() < 1e-10);
}
