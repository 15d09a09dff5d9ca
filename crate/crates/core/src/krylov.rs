//! Lanczos iterations shared by the dense and tensor-network paths.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensornet::BlockTensor;

/// Minimal inner-product space interface.
pub trait VectorSpace: Clone {
    /// `<self|other>`, antilinear in `self`.
    fn dot(&self, other: &Self) -> C64;
    /// `self += a * x`.
    fn axpy(&mut self, a: C64, x: &Self);
    fn scale(&mut self, a: C64);

    fn norm(&self) -> f64 {
        self.dot(self).re.max(0.0).sqrt()
    }
}

impl VectorSpace for Array1<C64> {
    fn dot(&self, other: &Self) -> C64 {
        self.iter().zip(other.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    fn axpy(&mut self, a: C64, x: &Self) {
        self.zip_mut_with(x, |y, v| *y += a * v);
    }

    fn scale(&mut self, a: C64) {
        self.mapv_inplace(|y| y * a);
    }
}

impl VectorSpace for BlockTensor {
    fn dot(&self, other: &Self) -> C64 {
        self.inner(other)
    }

    fn axpy(&mut self, a: C64, x: &Self) {
        self.add_scaled(x, a);
    }

    fn scale(&mut self, a: C64) {
        BlockTensor::scale(self, a);
    }
}

/// Result of [`lanczos_ground`].
#[derive(Clone, Debug)]
pub struct GroundPair<V> {
    pub energy: f64,
    pub vector: V,
    /// Residual norm `|H v - E v|` estimated from the last iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos with full
/// reorthogonalization. Converged when the residual norm is below `tol`.
pub fn lanczos_ground<V: VectorSpace>(
    mut apply: impl FnMut(&V) -> Result<V>,
    start: &V,
    max_dim: usize,
    max_restarts: usize,
    tol: f64,
) -> Result<GroundPair<V>> {
    let mut x = start.clone();
    let n0 = x.norm();
    if n0 == 0.0 {
        return Err(Error::LinAlg("Lanczos start vector is zero".into()));
    }
    x.scale(C64::new(1.0 / n0, 0.0));
    let mut energy = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..=max_restarts {
        let mut vs: Vec<V> = vec![x.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut coeffs: Array1<f64>;
        loop {
            let k = vs.len() - 1;
            let mut w = apply(&vs[k])?;
            let a = vs[k].dot(&w).re;
            alpha.push(a);
            for _ in 0..2 {
                for v in &vs {
                    let c = v.dot(&w);
                    w.axpy(-c, v);
                }
            }
            let b = w.norm();
            let (e, c) = tridiag_lowest(&alpha, &beta)?;
            energy = e;
            coeffs = c;
            residual = b * coeffs[coeffs.len() - 1].abs();
            if residual < tol || b < 1e-14 {
                converged = true;
                break;
            }
            if vs.len() >= max_dim {
                break;
            }
            w.scale(C64::new(1.0 / b, 0.0));
            beta.push(b);
            vs.push(w);
        }
        let mut y = vs[0].clone();
        y.scale(C64::new(coeffs[0], 0.0));
        for (v, &c) in vs.iter().zip(coeffs.iter()).skip(1) {
            y.axpy(C64::new(c, 0.0), v);
        }
        let ny = y.norm();
        y.scale(C64::new(1.0 / ny, 0.0));
        x = y;
        if converged {
            return Ok(GroundPair { energy, vector: x, residual, converged: true });
        }
    }
    Ok(GroundPair { energy, vector: x, residual, converged: false })
}

/// Lowest eigenpair of the symmetric tridiagonal matrix (alpha, beta).
fn tridiag_lowest(alpha: &[f64], beta: &[f64]) -> Result<(f64, Array1<f64>)> {
    let n = alpha.len();
    let mut t = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        t[[i, i]] = alpha[i];
        if i + 1 < n {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (ev, vecs) = t.eigh(UPLO::Lower)?;
    Ok((ev[0], vecs.column(0).to_owned()))
}

/// `exp(-i H s)` for a small Hermitian matrix, via its eigendecomposition.
pub fn expm_hermitian(h: &Array2<C64>, s: f64) -> Result<Array2<C64>> {
    let (ev, u) = h.eigh(UPLO::Lower)?;
    let mut ud = u.clone();
    for (j, &e) in ev.iter().enumerate() {
        let ph = C64::new(0.0, -e * s).exp();
        ud.column_mut(j).mapv_inplace(|x| x * ph);
    }
    Ok(ud.dot(&u.t().mapv(|x| x.conj())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::EigValsh;

    #[test]
    fn ground_state_of_small_matrix() {
        let n = 40;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                C64::new((i as f64).sin() * 3.0, 0.0)
            } else if i + 1 == j || j + 1 == i {
                C64::new(-1.0, if i < j { 0.2 } else { -0.2 })
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let start = Array1::from_elem(n, C64::new(1.0, 0.0));
        let gp = lanczos_ground(|x| Ok(h.dot(x)), &start, 30, 10, 1e-12).unwrap();
        assert!(gp.converged);
        let (e, v) = (gp.energy, gp.vector);
        let exact = h.eigvalsh(UPLO::Lower).unwrap()[0];
        assert!((e - exact).abs() < 1e-10);
        let r = h.dot(&v) - v.mapv(|x| x * e);
        assert!(r.norm() < 1e-8);
    }

    #[test]
    fn expm_is_unitary() {
        let h = Array2::from_shape_fn((3, 3), |(i, j)| C64::new((i + j) as f64, i as f64 - j as f64));
        let u = expm_hermitian(&h, 0.7).unwrap();
        let id = u.t().mapv(|x| x.conj()).dot(&u);
        for ((i, j), x) in id.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((x - C64::new(want, 0.0)).norm() < 1e-13);
        }
    }
}
