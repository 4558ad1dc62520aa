//! Small dense linear-algebra helpers shared by the GP modules and the plant.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Relative jitter levels tried, in order, when a covariance matrix fails to
/// factorize. Each level is multiplied by the signal variance.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor together with the absolute jitter that made it succeed.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Factorizes `a`, and on failure `a + jitter * I` walking up
/// [`JITTER_LADDER`] (scaled by `scale`) until the factorization succeeds.
pub fn cholesky_with_jitter(a: &DMatrix<f64>, scale: f64) -> Result<JitteredCholesky> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(JitteredCholesky { chol, jitter: 0.0 });
    }
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(JitteredCholesky { chol, jitter });
        }
    }
    Err(Error::Numerical(format!(
        "cholesky failed up to jitter {:e} (n = {})",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale,
        a.nrows()
    )))
}

/// Solves `L x = b` for lower-triangular `L` in place.
pub fn solve_lower(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Inverse of a lower-triangular matrix, column by column; each column of
/// the identity only touches rows at or below its own index.
pub fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut x = inv.column_mut(j);
        x[j] = 1.0;
        for k in j..n {
            let xk = x[k] / l[(k, k)];
            x[k] = xk;
            if xk != 0.0 {
                let col = l.column(k);
                for i in (k + 1)..n {
                    x[i] -= xk * col[i];
                }
            }
        }
    }
    inv
}

/// `(L Lᵀ)⁻¹` from the lower Cholesky factor.
pub fn spd_inverse_from_lower(l: &DMatrix<f64>) -> DMatrix<f64> {
    let li = lower_triangular_inverse(l);
    li.transpose() * li
}

/// Sum of `ln L_ii`, i.e. half the log-determinant of `L Lᵀ`.
pub fn half_log_det(l: &DMatrix<f64>) -> f64 {
    l.diagonal().iter().map(|d| d.ln()).sum()
}

/// Cross-product (skew-symmetric) matrix `v×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

/// Extreme eigenvalues of a symmetric 3×3 matrix.
pub fn sym3_eig_range(m: &Matrix3<f64>) -> (f64, f64) {
    let eig = m.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Principal square root of a symmetric positive semi-definite 3×3 matrix.
pub fn sym3_sqrt(m: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = m.symmetric_eigen();
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|e| e.max(0.0).sqrt()));
    let q = eig.eigenvectors;
    let r = q * d * q.transpose();
    0.5 * (r + r.transpose())
}

pub fn all_finite<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_gram() {
        // rank-one matrix: plain cholesky fails, smallest jitter rescues it
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = cholesky_with_jitter(&a, 1.0).unwrap();
        assert!(f.jitter >= 1e-10 && f.jitter <= 1e-6);
    }

    #[test]
    fn indefinite_matrix_is_a_numerical_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_with_jitter(&a, 1.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn lower_solve_matches_inverse() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.25]);
        let mut x = b.clone();
        solve_lower(&l, &mut x);
        assert!((&l * x - b).norm() < 1e-14);
    }

    #[test]
    fn triangular_and_spd_inverse() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 1.5]);
        let li = lower_triangular_inverse(&l);
        assert!((&l * &li - DMatrix::identity(3, 3)).amax() < 1e-15);
        let a = &l * l.transpose();
        assert!((&a * spd_inverse_from_lower(&l) - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn skew_is_cross_product() {
        let a = Vector3::new(0.3, -1.2, 2.0);
        let b = Vector3::new(-0.7, 0.4, 0.9);
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let m = Matrix3::from_diagonal(&Vector3::new(4.0, 9.0, 16.0));
        let r = sym3_sqrt(&m);
        assert!((r - Matrix3::from_diagonal(&Vector3::new(2.0, 3.0, 4.0))).norm() < 1e-12);
    }
}
