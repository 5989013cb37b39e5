//! Small dense symmetric solves used by the Newton fits and projections.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry count as zero.
const PIVOT_RELATIVE_TOLERANCE: f64 = 1e-13;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factorizes `a`; only the lower triangle is read.
    pub fn new(a: ArrayView2<'_, f64>) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max);
        let floor = PIVOT_RELATIVE_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > floor) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Some(Cholesky { l })
    }

    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut z = b.to_owned();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[[i, k]] * z[k];
            }
            z[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * z[k];
            }
            z[i] = s / self.l[[i, i]];
        }
        z
    }

    pub fn solve_matrix(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.l.nrows();
        self.solve_matrix(Array2::eye(n).view())
    }
}

/// `XᵀX` for a tall matrix.
pub fn gram(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.t().dot(&x)
}

/// `X (XᵀX)⁻¹ Xᵀ`, the orthogonal projector onto the column space of `X`.
pub fn projector(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let chol = Cholesky::new(gram(x).view()).ok_or(Error::RankDeficient("XᵀX is singular"))?;
    let solved = chol.solve_matrix(x.t());
    Ok(x.dot(&solved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_spd_system() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = array![1.0, -2.0, 0.5];
        let x = Cholesky::new(a.view()).unwrap().solve(b.view());
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let inv = Cholesky::new(a.view()).unwrap().inverse();
        let eye = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(Cholesky::new(a.view()).is_none());
        assert!(Cholesky::new(array![[-1.0]].view()).is_none());
    }

    #[test]
    fn projector_is_idempotent() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 5.0]];
        let p = projector(x.view()).unwrap();
        let pp = p.dot(&p);
        assert!((&pp - &p).iter().all(|v| v.abs() < 1e-12));
        let px = p.dot(&x);
        assert!((&px - &x).iter().all(|v| v.abs() < 1e-12));
        assert!(projector(array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]].view()).is_err());
    }
}
