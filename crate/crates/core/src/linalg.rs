//! Small dense helpers for the q×q covariance work. Matrices are row-major
//! `Vec<f64>` of length q², which keeps the simulation loop allocation free.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative pivot floor for accepting a covariance as positive definite.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Lower Cholesky factor of a row-major q×q matrix.
///
/// Rejects the matrix when it is not symmetric, not positive definite, or any
/// squared pivot falls below `PIVOT_TOLERANCE` times the largest diagonal entry.
pub fn cholesky_lower(a: &[f64], q: usize) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if a.len() != q * q {
        return Err(Error::DimensionMismatch {
            expected: q * q,
            got: a.len(),
        });
    }
    let max_diag = (0..q)
        .map(|i| a[i * q + i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max_diag.is_nan() || max_diag <= 0.0 || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    for i in 0..q {
        for j in 0..i {
            let (x, y) = (a[i * q + j], a[j * q + i]);
            if (x - y).abs() > 1e-12 * max_diag {
                return Err(Error::SingularCovariance);
            }
        }
    }
    let m = DMatrix::from_row_slice(q, q, a);
    let chol = m.cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l();
    for i in 0..q {
        if l[(i, i)] * l[(i, i)] < PIVOT_TOLERANCE * max_diag {
            return Err(Error::SingularCovariance);
        }
    }
    let mut out = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..=i {
            out[i * q + j] = l[(i, j)];
        }
    }
    Ok(out)
}

/// Squared norm of `L⁻¹ v` by forward substitution, i.e. `v' (L L')⁻¹ v`.
///
/// `scratch` must have length q.
#[inline]
pub fn whitened_norm_sq(l: &[f64], v: &[f64], scratch: &mut [f64]) -> f64 {
    let q = v.len();
    let mut acc = 0.0;
    for i in 0..q {
        let row = &l[i * q..i * q + i];
        let mut s = v[i];
        for (lij, uj) in row.iter().zip(scratch.iter()) {
            s -= lij * uj;
        }
        let u = s / l[i * q + i];
        scratch[i] = u;
        acc += u * u;
    }
    acc
}

/// `out = L x` for lower-triangular row-major `L`.
#[inline]
pub fn lower_mul(l: &[f64], x: &[f64], out: &mut [f64]) {
    let q = x.len();
    for i in 0..q {
        let row = &l[i * q..=i * q + i];
        out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Quadratic form `v' A⁻¹ v` through a Cholesky solve.
pub fn quad_form_inv(a: &[f64], v: &[f64]) -> Result<f64> {
    let q = v.len();
    let l = cholesky_lower(a, q)?;
    let mut scratch = vec![0.0; q];
    Ok(whitened_norm_sq(&l, v, &mut scratch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let a = [2.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0, 1.0, 3.0];
        let l = cholesky_lower(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_singular_and_asymmetric() {
        assert_eq!(
            cholesky_lower(&[1.0, 1.0, 1.0, 1.0], 2),
            Err(Error::SingularCovariance)
        );
        assert_eq!(
            cholesky_lower(&[1.0, 0.5, 0.0, 1.0], 2),
            Err(Error::SingularCovariance)
        );
        // pivot below the relative floor
        assert_eq!(
            cholesky_lower(&[1.0, 0.0, 0.0, 1e-14], 2),
            Err(Error::SingularCovariance)
        );
    }

    #[test]
    fn quad_form_matches_explicit_inverse() {
        // inverse of [[2,1],[1,3]] is [[3,-1],[-1,2]]/5
        let v = [1.0, -2.0];
        let want = (3.0 * 1.0 + 2.0 * 1.0 * 2.0 + 2.0 * 4.0) / 5.0;
        let got = quad_form_inv(&[2.0, 1.0, 1.0, 3.0], &v).unwrap();
        assert!((got - want).abs() < 1e-14);
    }
}
