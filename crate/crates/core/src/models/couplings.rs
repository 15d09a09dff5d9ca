use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Raw Bose-Hubbard parameters together with the effective spin couplings
/// they induce at large repulsion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub t_up: f64,
    pub t_down: f64,
    pub u_up: f64,
    pub u_down: f64,
    pub v: f64,
    /// Preparation chemical potential.
    pub mu: Option<f64>,
    pub j_perp: f64,
    pub j_z: f64,
    pub h: f64,
    pub delta_v: f64,
}

/// `(J_perp, J_z, h)` of the unit-filling effective model.
pub fn effective_couplings(
    t_up: f64,
    t_down: f64,
    u_up: f64,
    u_down: f64,
    v: f64,
) -> Result<(f64, f64, f64)> {
    for (name, x) in [("U_up", u_up), ("U_down", u_down), ("V", v)] {
        if !(x > 0.0) || !x.is_finite() {
            return param(format!("{name} must be positive, got {x}"));
        }
    }
    let j_z = 2.0 * (t_up * t_up + t_down * t_down) / v
        - 4.0 * t_up * t_up / u_up
        - 4.0 * t_down * t_down / u_down;
    let j_perp = -4.0 * t_up * t_down / v;
    let h = 4.0 * t_up * t_up / u_up - 4.0 * t_down * t_down / u_down;
    Ok((j_perp, j_z, h))
}

impl CouplingSet {
    pub fn from_bh(t_up: f64, t_down: f64, u_up: f64, u_down: f64, v: f64) -> Result<Self> {
        let (j_perp, j_z, h) = effective_couplings(t_up, t_down, u_up, u_down, v)?;
        Ok(CouplingSet {
            t_up,
            t_down,
            u_up,
            u_down,
            v,
            mu: None,
            j_perp,
            j_z,
            h,
            delta_v: 0.5 * (u_up + u_down) - v,
        })
    }

    /// `t_up = t_down = t` and `U_up = U_down = V = U`.
    pub fn isotropic(t: f64, u: f64) -> Result<Self> {
        Self::from_bh(t, t, u, u, u)
    }

    /// Spin couplings only, for the XXZ chain.
    pub fn xxz(j_perp: f64, j_z: f64) -> Self {
        CouplingSet {
            t_up: 0.0,
            t_down: 0.0,
            u_up: 0.0,
            u_down: 0.0,
            v: 0.0,
            mu: None,
            j_perp,
            j_z,
            h: 0.0,
            delta_v: 0.0,
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_point() {
        let (jp, jz, h) = effective_couplings(1.0, 1.0, 15.0, 15.0, 15.0).unwrap();
        assert!((jp + 4.0 / 15.0).abs() < 1e-15);
        assert!((jz + 4.0 / 15.0).abs() < 1e-15);
        assert_eq!(h, 0.0);
        assert!((jp - jz).abs() <= 1e-15);
    }

    #[test]
    fn single_species_hopping() {
        let (u, v) = (12.0, 9.0);
        let (jp, jz, h) = effective_couplings(1.0, 0.0, u, u, v).unwrap();
        assert_eq!(jp, 0.0);
        assert!((jz - (2.0 / v - 4.0 / u)).abs() < 1e-15);
        assert!((h - 4.0 / u).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_example() {
        let (jp, jz, h) = effective_couplings(1.0, 1.0, 10.0, 10.0, 8.0).unwrap();
        assert!((jp + 0.5).abs() < 1e-15);
        assert!((jz + 0.3).abs() < 1e-15);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn delta_v_definition() {
        let c = CouplingSet::from_bh(1.0, 0.7, 10.0, 14.0, 9.0).unwrap();
        assert_eq!(c.delta_v, 12.0 - 9.0);
    }

    #[test]
    fn non_positive_interactions_rejected() {
        assert!(effective_couplings(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(effective_couplings(1.0, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(effective_couplings(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(effective_couplings(1.0, 1.0, f64::NAN, 1.0, 1.0).is_err());
    }
}
