use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

const SIMPSON_INTERVALS: usize = 48;

/// Coefficients `c(s) = exp(-i T s) e_1` of the projected propagator.
pub(crate) struct Projected {
    vals: Array1<f64>,
    vecs: Array2<f64>,
}

impl Projected {
    pub fn new(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        let m = alpha.len();
        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alpha[i];
            if i + 1 < m {
                t[[i, i + 1]] = beta[i];
                t[[i + 1, i]] = beta[i];
            }
        }
        let (vals, vecs) = t.eigh(UPLO::Lower)?;
        Ok(Projected { vals, vecs })
    }

    pub fn dim(&self) -> usize {
        self.vals.len()
    }

    pub fn coeffs(&self, s: f64) -> Array1<C64> {
        let m = self.dim();
        let mut c = Array1::<C64>::zeros(m);
        for k in 0..m {
            let w = C64::new(0.0, -self.vals[k] * s).exp() * self.vecs[[0, k]];
            for n in 0..m {
                c[n] += w * self.vecs[[n, k]];
            }
        }
        c
    }

    /// `int_0^dt |c_n(s)| ds` for every `n`, by composite Simpson.
    pub fn abs_integrals(&self, dt: f64) -> Vec<f64> {
        let m = self.dim();
        let h = dt / SIMPSON_INTERVALS as f64;
        let mut acc = vec![0.0; m];
        for i in 0..=SIMPSON_INTERVALS {
            let w = if i == 0 || i == SIMPSON_INTERVALS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let c = self.coeffs(h * i as f64);
            for n in 0..m {
                acc[n] += w * c[n].norm();
            }
        }
        acc.iter().map(|x| x * h / 3.0).collect()
    }
}

/// Error bound on `|psi(dt) - sum_n c_n(dt) k_n|` for a recurrence
/// `H K = K T + b w e_m^T + R` with unit `w` and residual column norms `res`.
pub(crate) fn error_bound(p: &Projected, dt: f64, b: f64, res: &[f64], safety: f64) -> f64 {
    let ints = p.abs_integrals(dt);
    let m = p.dim();
    let tail = safety * b * ints[m - 1];
    let resid: f64 = res.iter().zip(&ints).map(|(r, i)| r * i).sum();
    tail + resid
}

/// Largest distance between unit states that still guarantees a fidelity
/// of at least `1 - eps`; it also implies `r^2 < eps`.
pub(crate) fn delta_max(eps: f64) -> f64 {
    (2.0 * eps / (1.0 + (1.0 - eps).sqrt())).sqrt()
}

/// Upper bound on `1 - |<a|b>|^2` for unit states at distance `delta`.
pub(crate) fn infidelity_of_delta(delta: f64) -> f64 {
    let c = 1.0 - 0.5 * delta * delta;
    if c <= 0.0 {
        1.0
    } else {
        // 1 - c^2 without cancellation
        0.5 * delta * delta * (1.0 + c)
    }
}

pub(crate) fn r2_of_delta(delta: f64) -> f64 {
    if delta >= 2.0 {
        f64::INFINITY
    } else {
        delta * delta / (4.0 - delta * delta)
    }
}

/// `|a - a'|` for unit `a` and its normalized truncation with fidelity at least `f`.
pub(crate) fn truncation_distance(f: f64) -> f64 {
    (2.0 - 2.0 * f.clamp(0.0, 1.0).sqrt()).max(0.0).sqrt()
}

/// Discarded weight whose truncation distance is at most `x`.
pub(crate) fn weight_for_distance(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = 1.0 - 0.5 * x * x;
    if y <= 0.0 {
        1.0
    } else {
        1.0 - y * y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_coefficients() {
        // T = [[0, 1], [1, 0]]: c(s) = (cos s, -i sin s)
        let p = Projected::new(&[0.0, 0.0], &[1.0]).unwrap();
        let c = p.coeffs(0.3);
        assert!((c[0] - C64::new(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((c[1] - C64::new(0.0, -(0.3f64.sin()))).norm() < 1e-14);
        let ints = p.abs_integrals(0.5);
        assert!((ints[1] - (1.0 - 0.5f64.cos())).abs() < 1e-9);
    }

    #[test]
    fn distance_weight_roundtrip() {
        for &x in &[1e-3, 0.1, 0.5] {
            let w = weight_for_distance(x);
            assert!((truncation_distance(1.0 - w) - x).abs() < 1e-9 * x.max(1e-3));
        }
        let d = delta_max(1e-6);
        assert!((infidelity_of_delta(d) - 1e-6).abs() < 1e-15);
        assert!(r2_of_delta(d) < 1e-6);
    }
}
